#include "caris/bridge/teleop.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>

namespace caris::bridge {
namespace {

constexpr std::array<std::pair<TeleopKind, std::string_view>, 5> kKindNames{{
    {TeleopKind::Forward, "forward"},
    {TeleopKind::Backward, "backward"},
    {TeleopKind::RotateLeft, "rotate_left"},
    {TeleopKind::RotateRight, "rotate_right"},
    {TeleopKind::Stop, "stop"},
}};

}  // namespace

std::string_view to_string(TeleopKind kind) {
  for (const auto& [value, name] : kKindNames) {
    if (value == kind) return name;
  }
  return "stop";
}

TeleopKind parse_teleop_kind(std::string_view text) {
  for (const auto& [value, name] : kKindNames) {
    if (name == text) return value;
  }
  throw InvalidCommand("unknown teleop command \"" + std::string(text) + "\"");
}

void validate(const TeleopCommand& command) {
  if (!std::isfinite(command.scale) || command.scale < 0.0 || command.scale > 1.0) {
    throw InvalidCommand("scale must lie in [0, 1]");
  }
}

TwistCommand teleop_to_twist(const TeleopCommand& command, const TeleopLimits& limits) {
  const double s = std::clamp(command.scale, 0.0, 1.0);
  switch (command.kind) {
    case TeleopKind::Forward:
      return {limits.max_linear * s, 0.0};
    case TeleopKind::Backward:
      return {-limits.max_linear * s, 0.0};
    case TeleopKind::RotateLeft:
      return {0.0, limits.max_angular * s};
    case TeleopKind::RotateRight:
      return {0.0, -limits.max_angular * s};
    case TeleopKind::Stop:
      break;
  }
  return {0.0, 0.0};
}

TwistCommand clamp_twist(const TwistCommand& twist, const TeleopLimits& limits) {
  return {std::clamp(twist.linear, -limits.max_linear, limits.max_linear),
          std::clamp(twist.angular, -limits.max_angular, limits.max_angular)};
}

}  // namespace caris::bridge
