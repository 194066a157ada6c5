#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>

#include "caris/bridge/ros_msgs.hpp"
#include "caris/error.hpp"
#include "caris/geometry.hpp"
#include "caris/mapping/occupancy_grid.hpp"

namespace caris::mapping {

CARIS_DEFINE_ERROR(InvalidInterval, Error);

/// Dead-reckoning update shared with the simulator, without collisions.
/// Throws InvalidInterval unless dt > 0.
Pose2D integrate_odometry(const Pose2D& pose, const TwistCommand& twist, double dt);

struct MapperConfig {
  double resolution = 0.05;
  Pose2D origin{-1.0, -1.0, 0.0};
  int width = 240;
  int height = 240;
  SensorModel<double> model;
};

/// Mapping with known pose.
///
/// Odometry, when any has arrived, is the pose source; until then the pose is
/// dead-reckoned from commanded twists. Scans are integrated at the current
/// pose. All methods are thread-safe; snapshot() hands out an immutable copy
/// that later updates never touch.
class Mapper {
 public:
  explicit Mapper(MapperConfig config = {});

  void on_odometry(const bridge::Odometry& odom);
  /// `stamp` is in seconds on the same clock as scan stamps.
  void on_command(const TwistCommand& twist, double stamp);
  /// Returns false if the scan was taken outside the grid and was skipped.
  bool on_scan(const bridge::LaserScan& scan);

  Pose2D pose() const;
  bool has_odometry() const;
  std::uint64_t version() const;
  std::shared_ptr<const OccupancyGrid> snapshot() const;

 private:
  mutable std::mutex mutex_;
  OccupancyGrid grid_;
  Pose2D pose_;
  bool has_odometry_ = false;
  std::optional<TwistCommand> last_command_;
  double last_command_stamp_ = 0.0;
  std::uint64_t version_ = 0;
  mutable std::shared_ptr<const OccupancyGrid> cached_;
};

}  // namespace caris::mapping
