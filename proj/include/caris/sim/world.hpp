#pragma once

#include <filesystem>
#include <vector>

#include "caris/error.hpp"
#include "caris/geometry.hpp"
#include "caris/json.hpp"

namespace caris::sim {

CARIS_DEFINE_ERROR(InvalidWorld, Error);

/// Axis-aligned rectangle in world meters.
struct Rect {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool contains(double x, double y) const { return x >= min_x && x <= max_x && y >= min_y && y <= max_y; }
  Rect inflated(double margin) const { return {min_x - margin, min_y - margin, max_x + margin, max_y + margin}; }
  bool operator==(const Rect&) const = default;
};

/// Rectangular room [0, width] x [0, height] whose walls bound every ray,
/// plus solid rectangular obstacles.
struct World {
  double width = 4.0;
  double height = 4.0;
  std::vector<Rect> obstacles;
  Pose2D spawn{2.0, 2.0, 0.0};

  bool operator==(const World&) const = default;
};

/// Throws InvalidWorld if obstacles leave the bounds or the spawn point is
/// blocked for a robot of the given radius.
void validate(const World& world, double robot_radius = 0.0);

/// `{"width": 4, "height": 4, "obstacles": [[x0, y0, x1, y1], ...],
///   "spawn": {"x": 2, "y": 2, "theta": 0}}`
World world_from_json(const Json& doc);
Json world_to_json(const World& world);
World load_world(const std::filesystem::path& path);

/// True when a disc of `radius` centered at (x, y) overlaps an obstacle or
/// reaches outside the room.
bool blocked(const World& world, double x, double y, double radius);

/// True when sweeping a disc of `radius` along the segment hits anything.
bool segment_blocked(const World& world, double x0, double y0, double x1, double y1, double radius);

}  // namespace caris::sim
