#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "caris/bridge/ros_msgs.hpp"
#include "caris/error.hpp"
#include "caris/geometry.hpp"
#include "caris/mapping/line_walk.hpp"

namespace caris::mapping {

CARIS_DEFINE_ERROR(PoseOutOfBounds, Error);
CARIS_DEFINE_ERROR(GridFormatError, Error);

/// Log-odds increments, clamp bounds and classification thresholds.
template <typename Scalar>
struct SensorModel {
  Scalar l_occ = Scalar(0.85);
  Scalar l_free = Scalar(-0.4);
  Scalar l_min = Scalar(-10);
  Scalar l_max = Scalar(10);
  Scalar t_free = Scalar(2);
  Scalar t_occ = Scalar(2);
};

enum class CellClass { Free, Unknown, Occupied };

/// Fixed-size log-odds occupancy grid.
///
/// Cell (x, y) covers [origin + x*res, origin + (x+1)*res) on each axis.
/// Storage is an Eigen array indexed (x, y). The origin heading is carried
/// for the persisted header but the grid itself is axis-aligned.
template <typename Scalar>
class BasicOccupancyGrid {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  BasicOccupancyGrid(double resolution, Pose2D origin, int width, int height, SensorModel<Scalar> model = {})
      : resolution_(resolution), origin_(origin), model_(model), logodds_(Array::Zero(width, height)) {
    if (!(resolution > 0.0) || width <= 0 || height <= 0) throw GridFormatError("grid dimensions must be positive");
  }

  double resolution() const { return resolution_; }
  const Pose2D& origin() const { return origin_; }
  int width() const { return static_cast<int>(logodds_.rows()); }
  int height() const { return static_cast<int>(logodds_.cols()); }
  const SensorModel<Scalar>& model() const { return model_; }
  const Array& logodds() const { return logodds_; }

  bool contains(const Cell& c) const { return c.x() >= 0 && c.y() >= 0 && c.x() < width() && c.y() < height(); }

  Scalar at(const Cell& c) const { return logodds_(c.x(), c.y()); }
  Scalar at(int x, int y) const { return logodds_(x, y); }

  /// Adds `delta` to a cell and clamps; out-of-grid cells are ignored.
  void add(const Cell& c, Scalar delta) {
    if (!contains(c)) return;
    Scalar& v = logodds_(c.x(), c.y());
    v = std::clamp(v + delta, model_.l_min, model_.l_max);
  }

  /// Cell containing a world point; may lie outside the grid.
  Cell cell_of(double x, double y) const {
    return Cell(static_cast<int>(std::floor((x - origin_.x) / resolution_)),
                static_cast<int>(std::floor((y - origin_.y) / resolution_)));
  }

  Eigen::Vector2d center_of(const Cell& c) const {
    return {origin_.x + (c.x() + 0.5) * resolution_, origin_.y + (c.y() + 0.5) * resolution_};
  }

  CellClass classify(const Cell& c) const {
    const Scalar v = at(c);
    if (v <= -model_.t_free) return CellClass::Free;
    if (v >= model_.t_occ) return CellClass::Occupied;
    return CellClass::Unknown;
  }

  void set_logodds(Array values) {
    if (values.rows() != logodds_.rows() || values.cols() != logodds_.cols()) {
      throw GridFormatError("dimension mismatch");
    }
    logodds_ = values.cwiseMax(model_.l_min).cwiseMin(model_.l_max);
  }

  bool operator==(const BasicOccupancyGrid& other) const {
    return resolution_ == other.resolution_ && origin_ == other.origin_ &&
           logodds_.rows() == other.logodds_.rows() && logodds_.cols() == other.logodds_.cols() &&
           (logodds_ == other.logodds_).all();
  }

 private:
  double resolution_;
  Pose2D origin_;
  SensorModel<Scalar> model_;
  Array logodds_;
};

using OccupancyGrid = BasicOccupancyGrid<double>;

/// Surface hits are nudged this far past the measured range, as a fraction
/// of the resolution, so a return lying exactly on a cell boundary marks the
/// cell behind the surface rather than the free cell in front of it.
inline constexpr double kEndpointNudge = 1e-3;

/// Applies one beam from `pose` at absolute heading `angle`. A beam with a
/// return marks the traversed cells free and its end cell occupied; a beam
/// without a return clears up to `range_max`. Cells beyond the grid edge are
/// skipped. Throws PoseOutOfBounds if the pose is outside the grid.
template <typename Scalar>
void integrate_beam(BasicOccupancyGrid<Scalar>& grid, const Pose2D& pose, double angle, double range, bool hit) {
  const Cell start = grid.cell_of(pose.x, pose.y);
  if (!grid.contains(start)) throw PoseOutOfBounds("robot cell outside grid");
  const double reach = hit ? range + kEndpointNudge * grid.resolution() : range;
  const Cell end = grid.cell_of(pose.x + reach * std::cos(angle), pose.y + reach * std::sin(angle));
  const auto& m = grid.model();
  walk_line(start, end, [&](const Cell& c) {
    // The walk starts inside a convex grid, so the first exit is final.
    if (!grid.contains(c)) return false;
    grid.add(c, (hit && c == end) ? m.l_occ : m.l_free);
    return true;
  });
}

/// Inverse sensor model for a full scan taken at `pose`.
template <typename Scalar>
void update_grid(BasicOccupancyGrid<Scalar>& grid, const Pose2D& pose, const bridge::LaserScan& scan) {
  const Cell start = grid.cell_of(pose.x, pose.y);
  if (!grid.contains(start)) throw PoseOutOfBounds("robot cell outside grid");
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    const double angle = pose.theta + scan.beam_angle(i);
    const bool hit = scan.has_return(i);
    integrate_beam(grid, pose, angle, hit ? scan.ranges[i] : scan.range_max, hit);
  }
}

/// 8-bit grayscale PNG, one pixel per cell: image row y, column x.
/// Free cells are white, occupied black, everything else mid-gray.
std::vector<std::uint8_t> render_map(const OccupancyGrid& grid);

inline constexpr std::uint8_t kFreePixel = 255;
inline constexpr std::uint8_t kOccupiedPixel = 0;
inline constexpr std::uint8_t kUnknownPixel = 128;

/// Writes `<base>.json` (resolution, origin, dims, dtype) and `<base>.bin`
/// (row-major float64, x fastest, little-endian).
void save_grid(const OccupancyGrid& grid, const std::filesystem::path& base);
OccupancyGrid load_grid(const std::filesystem::path& base);

}  // namespace caris::mapping
