#include "caris/bridge/ros_msgs.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace caris::bridge {
namespace {

Json stamp_to_msg(double seconds) {
  const auto total_ns = static_cast<std::int64_t>(std::llround(seconds * 1e9));
  Json stamp = Json::object();
  stamp["secs"] = total_ns / 1'000'000'000;
  stamp["nsecs"] = total_ns % 1'000'000'000;
  return stamp;
}

double stamp_from_msg(const Json& header) {
  if (!header.is_object() || !header.contains("stamp")) return 0.0;
  const Json& stamp = header.at("stamp");
  return stamp.value("secs", 0.0) + stamp.value("nsecs", 0.0) * 1e-9;
}

double number_at(const Json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    throw InvalidMessage(std::string("expected numeric field \"") + key + "\"");
  }
  return it->get<double>();
}

const Json& object_at(const Json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_object()) {
    throw InvalidMessage(std::string("expected object field \"") + key + "\"");
  }
  return *it;
}

}  // namespace

bool LaserScan::has_return(std::size_t i) const {
  const double r = ranges.at(i);
  return std::isfinite(r) && r <= range_max;
}

std::size_t expected_beam_count(double angle_min, double angle_max, double angle_increment) {
  const double span = (angle_max - angle_min) / angle_increment;
  return static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
}

LaserScan make_scan_geometry(std::size_t beams, double range_max) {
  LaserScan scan;
  scan.angle_increment = 2.0 * std::numbers::pi / static_cast<double>(beams);
  scan.angle_min = -std::numbers::pi;
  scan.angle_max = scan.angle_min + static_cast<double>(beams - 1) * scan.angle_increment;
  scan.range_max = range_max;
  scan.ranges.assign(beams, std::numeric_limits<double>::infinity());
  return scan;
}

void validate_scan(const LaserScan& scan) {
  if (!(scan.angle_increment > 0.0)) throw InvalidMessage("angle_increment must be positive");
  const auto expected = expected_beam_count(scan.angle_min, scan.angle_max, scan.angle_increment);
  if (scan.ranges.size() != expected) {
    throw InvalidMessage("scan has " + std::to_string(scan.ranges.size()) + " ranges, expected " +
                         std::to_string(expected));
  }
}

// Components that this robot cannot command are emitted as integer zeros so
// frames match the documented byte layout exactly.
Json twist_to_msg(const TwistCommand& twist) {
  Json linear = Json::object();
  linear["x"] = twist.linear;
  linear["y"] = 0;
  linear["z"] = 0;
  Json angular = Json::object();
  angular["x"] = 0;
  angular["y"] = 0;
  angular["z"] = twist.angular;
  Json msg = Json::object();
  msg["linear"] = std::move(linear);
  msg["angular"] = std::move(angular);
  return msg;
}

TwistCommand twist_from_msg(const Json& msg) {
  TwistCommand twist;
  twist.linear = number_at(object_at(msg, "linear"), "x");
  twist.angular = number_at(object_at(msg, "angular"), "z");
  return twist;
}

Json scan_to_msg(const LaserScan& scan) {
  Json header = Json::object();
  header["stamp"] = stamp_to_msg(scan.stamp);
  header["frame_id"] = "base_laser";

  // Non-finite ranges serialize as null, the rosbridge convention for inf.
  Json ranges = Json::array();
  for (double r : scan.ranges) {
    if (std::isfinite(r)) {
      ranges.push_back(r);
    } else {
      ranges.push_back(nullptr);
    }
  }

  Json msg = Json::object();
  msg["header"] = std::move(header);
  msg["angle_min"] = scan.angle_min;
  msg["angle_max"] = scan.angle_max;
  msg["angle_increment"] = scan.angle_increment;
  msg["time_increment"] = 0.0;
  msg["scan_time"] = 0.0;
  msg["range_min"] = 0.0;
  msg["range_max"] = scan.range_max;
  msg["ranges"] = std::move(ranges);
  msg["intensities"] = Json::array();
  return msg;
}

LaserScan scan_from_msg(const Json& msg) {
  LaserScan scan;
  if (msg.contains("header")) scan.stamp = stamp_from_msg(msg.at("header"));
  scan.angle_min = number_at(msg, "angle_min");
  scan.angle_max = number_at(msg, "angle_max");
  scan.angle_increment = number_at(msg, "angle_increment");
  scan.range_max = number_at(msg, "range_max");
  const auto it = msg.find("ranges");
  if (it == msg.end() || !it->is_array()) throw InvalidMessage("expected array field \"ranges\"");
  scan.ranges.reserve(it->size());
  for (const Json& r : *it) {
    scan.ranges.push_back(r.is_number() ? r.get<double>() : std::numeric_limits<double>::infinity());
  }
  validate_scan(scan);
  return scan;
}

Json odometry_to_msg(const Odometry& odom) {
  Json header = Json::object();
  header["stamp"] = stamp_to_msg(odom.stamp);
  header["frame_id"] = "odom";

  Json position = Json::object();
  position["x"] = odom.pose.x;
  position["y"] = odom.pose.y;
  position["z"] = 0.0;
  Json orientation = Json::object();
  orientation["x"] = 0.0;
  orientation["y"] = 0.0;
  orientation["z"] = std::sin(odom.pose.theta / 2.0);
  orientation["w"] = std::cos(odom.pose.theta / 2.0);
  Json pose = Json::object();
  pose["position"] = std::move(position);
  pose["orientation"] = std::move(orientation);

  Json msg = Json::object();
  msg["header"] = std::move(header);
  msg["child_frame_id"] = "base_link";
  msg["pose"] = Json{{"pose", std::move(pose)}};
  msg["twist"] = Json{{"twist", twist_to_msg(odom.twist)}};
  return msg;
}

Odometry odometry_from_msg(const Json& msg) {
  Odometry odom;
  if (msg.contains("header")) odom.stamp = stamp_from_msg(msg.at("header"));
  const Json& pose = object_at(object_at(msg, "pose"), "pose");
  const Json& position = object_at(pose, "position");
  const Json& orientation = object_at(pose, "orientation");
  odom.pose.x = number_at(position, "x");
  odom.pose.y = number_at(position, "y");
  const double qz = number_at(orientation, "z");
  const double qw = number_at(orientation, "w");
  odom.pose.theta = normalize_angle(2.0 * std::atan2(qz, qw));
  if (msg.contains("twist")) odom.twist = twist_from_msg(object_at(object_at(msg, "twist"), "twist"));
  return odom;
}

Json speech_to_msg(const std::string& text) { return Json{{"text", text}}; }

std::string speech_from_msg(const Json& msg) {
  const auto it = msg.find("text");
  if (it == msg.end() || !it->is_string()) throw InvalidMessage("expected string field \"text\"");
  return it->get<std::string>();
}

}  // namespace caris::bridge
