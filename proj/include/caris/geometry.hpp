#pragma once

#include <cmath>
#include <numbers>

namespace caris {

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar normalize_angle(Scalar theta) {
  constexpr Scalar kPi = std::numbers::pi_v<Scalar>;
  Scalar wrapped = std::remainder(theta, Scalar(2) * kPi);
  if (wrapped <= -kPi) wrapped += Scalar(2) * kPi;
  return wrapped;
}

/// Planar pose: position in meters, heading in radians (CCW from +x).
template <typename Scalar>
struct Pose2 {
  Scalar x{0};
  Scalar y{0};
  Scalar theta{0};

  bool operator==(const Pose2&) const = default;
};

/// Velocity command: signed linear speed along heading (m/s) and yaw rate
/// (rad/s, counterclockwise positive).
template <typename Scalar>
struct Twist2 {
  Scalar linear{0};
  Scalar angular{0};

  bool operator==(const Twist2&) const = default;
};

using Pose2D = Pose2<double>;
using TwistCommand = Twist2<double>;

/// Below this yaw rate the unicycle update takes the straight-line branch.
inline constexpr double kStraightLineYawRate = 1e-9;

/// Exact unicycle motion over one interval with constant (v, w).
///
/// Straight segment when |w| is below kStraightLineYawRate, otherwise the
/// closed-form circular arc. The returned heading is normalized. Both the
/// simulator and odometry integration go through this function.
template <typename Scalar>
Pose2<Scalar> unicycle_step(const Pose2<Scalar>& pose, const Twist2<Scalar>& twist, Scalar dt) {
  const Scalar v = twist.linear;
  const Scalar w = twist.angular;
  Pose2<Scalar> out = pose;
  if (std::abs(w) < Scalar(kStraightLineYawRate)) {
    out.x += v * std::cos(pose.theta) * dt;
    out.y += v * std::sin(pose.theta) * dt;
    out.theta = normalize_angle(pose.theta);
    return out;
  }
  const Scalar theta_next = pose.theta + w * dt;
  const Scalar radius = v / w;
  out.x += radius * (std::sin(theta_next) - std::sin(pose.theta));
  out.y -= radius * (std::cos(theta_next) - std::cos(pose.theta));
  out.theta = normalize_angle(theta_next);
  return out;
}

}  // namespace caris
