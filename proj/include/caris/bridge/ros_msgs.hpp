#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "caris/bridge/message.hpp"
#include "caris/geometry.hpp"
#include "caris/json.hpp"

namespace caris::bridge {

/// Topic names and message types spoken on the wire. Defaults follow the
/// usual ROS conventions and can be overridden from configuration.
struct TopicConfig {
  std::string cmd_vel = "/cmd_vel";
  std::string scan = "/scan";
  std::string odom = "/odom";
  std::string tts = "/tts";
};

inline constexpr const char* kTwistType = "geometry_msgs/Twist";
inline constexpr const char* kLaserScanType = "sensor_msgs/LaserScan";
inline constexpr const char* kOdometryType = "nav_msgs/Odometry";
inline constexpr const char* kSpeechType = "caris_msgs/Speech";

struct LaserScan {
  double stamp = 0.0;
  double angle_min = 0.0;
  double angle_max = 0.0;
  double angle_increment = 0.0;
  double range_max = 0.0;
  // Entries that are non-finite or beyond range_max mean "no return".
  std::vector<double> ranges;

  double beam_angle(std::size_t i) const { return angle_min + static_cast<double>(i) * angle_increment; }
  bool has_return(std::size_t i) const;

  bool operator==(const LaserScan&) const = default;
};

/// Beam count implied by the angular window; tolerant of the rounding
/// that creeps in when angle_max was itself computed from the increment.
std::size_t expected_beam_count(double angle_min, double angle_max, double angle_increment);

/// Evenly spaced full-circle scan parameters with `beams` rays starting at -pi.
LaserScan make_scan_geometry(std::size_t beams, double range_max);

/// Throws InvalidMessage if the increment or the beam count is inconsistent.
void validate_scan(const LaserScan& scan);

struct Odometry {
  double stamp = 0.0;
  Pose2D pose;
  TwistCommand twist;

  bool operator==(const Odometry&) const = default;
};

Json twist_to_msg(const TwistCommand& twist);
TwistCommand twist_from_msg(const Json& msg);

Json scan_to_msg(const LaserScan& scan);
LaserScan scan_from_msg(const Json& msg);

Json odometry_to_msg(const Odometry& odom);
Odometry odometry_from_msg(const Json& msg);

Json speech_to_msg(const std::string& text);
std::string speech_from_msg(const Json& msg);

}  // namespace caris::bridge
