#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include "caris/bridge/ros_msgs.hpp"
#include "caris/geometry.hpp"
#include "caris/sim/world.hpp"

namespace caris::sim {

struct ScanParams {
  std::size_t beams = 360;
  double range_max = 8.0;
  double range_noise_stddev = 0.0;
};

struct SimParams {
  double dt = 0.05;
  double command_timeout = 0.5;
  double robot_radius = 0.2;
  double scan_rate = 10.0;  // Hz
  double odom_rate = 20.0;  // Hz
  ScanParams scan;
  std::uint64_t seed = 1;
};

struct SimState {
  Pose2D pose;
  TwistCommand commanded;
  double clock = 0.0;          // seconds of simulated time
  double command_stamp = 0.0;  // clock value when `commanded` was last set
  std::uint64_t steps = 0;
  std::uint64_t rng_seed = 1;

  bool operator==(const SimState&) const = default;
};

/// Advances the state by one fixed interval. The commanded twist expires
/// after params.command_timeout; a motion whose chord would touch an
/// obstacle or wall is cancelled and the command zeroed.
SimState step(const SimState& state, const World& world, const SimParams& params, double dt);

/// Noise-free range to the first wall or obstacle along each beam, measured
/// in the robot frame. Beams with nothing within range_max read +inf.
bridge::LaserScan raycast_scan(const Pose2D& pose, const World& world, const ScanParams& params);

/// Distance along the ray from (x, y) with heading `angle` to the first
/// surface. Always finite because the room is closed.
double cast_ray(const World& world, double x, double y, double angle);

/// Fixed-step simulator. Scans and odometry are emitted through the sinks at
/// their configured rates, derived from the step counter so the schedule
/// never drifts.
class Simulator {
 public:
  Simulator(World world, SimParams params);

  const SimState& state() const { return state_; }
  const World& world() const { return world_; }
  const SimParams& params() const { return params_; }

  void set_command(const TwistCommand& twist);
  void advance(std::uint64_t steps = 1);

  bridge::LaserScan current_scan();
  bridge::Odometry current_odometry() const;

  std::function<void(const bridge::LaserScan&)> on_scan;
  std::function<void(const bridge::Odometry&)> on_odometry;

 private:
  World world_;
  SimParams params_;
  SimState state_;
  std::mt19937_64 rng_;
  std::uint64_t scan_every_;
  std::uint64_t odom_every_;
};

}  // namespace caris::sim
