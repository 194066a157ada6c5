#include "caris/mapping/mapper.hpp"

namespace caris::mapping {

Pose2D integrate_odometry(const Pose2D& pose, const TwistCommand& twist, double dt) {
  if (!(dt > 0.0)) throw InvalidInterval("dt must be positive");
  return unicycle_step(pose, twist, dt);
}

Mapper::Mapper(MapperConfig config)
    : grid_(config.resolution, config.origin, config.width, config.height, config.model) {
  const Eigen::Vector2d center = grid_.center_of(Cell(config.width / 2, config.height / 2));
  pose_ = {center.x(), center.y(), 0.0};
}

void Mapper::on_odometry(const bridge::Odometry& odom) {
  std::lock_guard lock(mutex_);
  pose_ = odom.pose;
  has_odometry_ = true;
}

void Mapper::on_command(const TwistCommand& twist, double stamp) {
  std::lock_guard lock(mutex_);
  if (!has_odometry_ && last_command_ && stamp > last_command_stamp_) {
    pose_ = integrate_odometry(pose_, *last_command_, stamp - last_command_stamp_);
  }
  last_command_ = twist;
  last_command_stamp_ = stamp;
}

bool Mapper::on_scan(const bridge::LaserScan& scan) {
  std::lock_guard lock(mutex_);
  if (!has_odometry_ && last_command_ && scan.stamp > last_command_stamp_) {
    pose_ = integrate_odometry(pose_, *last_command_, scan.stamp - last_command_stamp_);
    last_command_stamp_ = scan.stamp;
  }
  try {
    update_grid(grid_, pose_, scan);
  } catch (const PoseOutOfBounds&) {
    return false;
  }
  ++version_;
  cached_.reset();
  return true;
}

Pose2D Mapper::pose() const {
  std::lock_guard lock(mutex_);
  return pose_;
}

bool Mapper::has_odometry() const {
  std::lock_guard lock(mutex_);
  return has_odometry_;
}

std::uint64_t Mapper::version() const {
  std::lock_guard lock(mutex_);
  return version_;
}

std::shared_ptr<const OccupancyGrid> Mapper::snapshot() const {
  std::lock_guard lock(mutex_);
  if (!cached_) cached_ = std::make_shared<const OccupancyGrid>(grid_);
  return cached_;
}

}  // namespace caris::mapping
