#include "caris/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace caris::sim {
namespace {

// Entry distance of a ray into a rectangle (slab method); +inf on a miss.
double ray_rect_entry(double x, double y, double dx, double dy, const Rect& r) {
  double t_min = 0.0;
  double t_max = std::numeric_limits<double>::infinity();
  const double origin[2] = {x, y};
  const double dir[2] = {dx, dy};
  const double lo[2] = {r.min_x, r.min_y};
  const double hi[2] = {r.max_x, r.max_y};
  for (int axis = 0; axis < 2; ++axis) {
    if (dir[axis] == 0.0) {
      if (origin[axis] < lo[axis] || origin[axis] > hi[axis]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (lo[axis] - origin[axis]) / dir[axis];
    double t1 = (hi[axis] - origin[axis]) / dir[axis];
    if (t0 > t1) std::swap(t0, t1);
    t_min = std::max(t_min, t0);
    t_max = std::min(t_max, t1);
    if (t_min > t_max) return std::numeric_limits<double>::infinity();
  }
  return t_min;
}

std::uint64_t steps_per_period(double rate, double dt) {
  if (rate <= 0.0) return 0;
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(1.0 / (rate * dt))));
}

}  // namespace

SimState step(const SimState& state, const World& world, const SimParams& params, double dt) {
  SimState next = state;
  next.steps = state.steps + 1;
  next.clock = state.clock + dt;

  if (state.clock - state.command_stamp >= params.command_timeout - 1e-9) next.commanded = {};

  const Pose2D moved = unicycle_step(state.pose, next.commanded, dt);
  if (segment_blocked(world, state.pose.x, state.pose.y, moved.x, moved.y, params.robot_radius)) {
    next.commanded = {};
    return next;
  }
  next.pose = moved;
  return next;
}

double cast_ray(const World& world, double x, double y, double angle) {
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  const double inf = std::numeric_limits<double>::infinity();
  // Exit distance from the room, which contains the origin.
  double t_x = inf;
  double t_y = inf;
  if (dx > 0.0) t_x = (world.width - x) / dx;
  if (dx < 0.0) t_x = -x / dx;
  if (dy > 0.0) t_y = (world.height - y) / dy;
  if (dy < 0.0) t_y = -y / dy;
  double nearest = std::min(t_x, t_y);
  for (const Rect& r : world.obstacles) nearest = std::min(nearest, ray_rect_entry(x, y, dx, dy, r));
  return nearest;
}

bridge::LaserScan raycast_scan(const Pose2D& pose, const World& world, const ScanParams& params) {
  bridge::LaserScan scan = bridge::make_scan_geometry(params.beams, params.range_max);
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    const double range = cast_ray(world, pose.x, pose.y, pose.theta + scan.beam_angle(i));
    scan.ranges[i] = range <= params.range_max ? range : std::numeric_limits<double>::infinity();
  }
  return scan;
}

Simulator::Simulator(World world, SimParams params)
    : world_(std::move(world)),
      params_(params),
      rng_(params.seed),
      scan_every_(steps_per_period(params.scan_rate, params.dt)),
      odom_every_(steps_per_period(params.odom_rate, params.dt)) {
  validate(world_, params_.robot_radius);
  state_.pose = world_.spawn;
  state_.pose.theta = normalize_angle(state_.pose.theta);
  state_.rng_seed = params.seed;
}

void Simulator::set_command(const TwistCommand& twist) {
  state_.commanded = twist;
  state_.command_stamp = state_.clock;
}

void Simulator::advance(std::uint64_t steps) {
  for (std::uint64_t i = 0; i < steps; ++i) {
    state_ = step(state_, world_, params_, params_.dt);
    if (odom_every_ != 0 && state_.steps % odom_every_ == 0 && on_odometry) on_odometry(current_odometry());
    if (scan_every_ != 0 && state_.steps % scan_every_ == 0 && on_scan) on_scan(current_scan());
  }
}

bridge::LaserScan Simulator::current_scan() {
  bridge::LaserScan scan = raycast_scan(state_.pose, world_, params_.scan);
  scan.stamp = state_.clock;
  if (params_.scan.range_noise_stddev > 0.0) {
    std::normal_distribution<double> noise(0.0, params_.scan.range_noise_stddev);
    for (double& r : scan.ranges) {
      if (std::isfinite(r)) r = std::max(0.0, r + noise(rng_));
    }
  }
  return scan;
}

bridge::Odometry Simulator::current_odometry() const {
  return {state_.clock, state_.pose, state_.commanded};
}

}  // namespace caris::sim
