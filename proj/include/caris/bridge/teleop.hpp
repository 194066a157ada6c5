#pragma once

#include <string_view>

#include "caris/error.hpp"
#include "caris/geometry.hpp"

namespace caris::bridge {

CARIS_DEFINE_ERROR(InvalidCommand, Error);

enum class TeleopKind { Forward, Backward, RotateLeft, RotateRight, Stop };

std::string_view to_string(TeleopKind kind);
/// Accepts "forward", "backward", "rotate_left", "rotate_right", "stop".
TeleopKind parse_teleop_kind(std::string_view text);

struct TeleopCommand {
  TeleopKind kind{TeleopKind::Stop};
  double scale{1.0};  // [0, 1]; ignored by Stop
};

struct TeleopLimits {
  double max_linear = 0.3;   // m/s
  double max_angular = 0.5;  // rad/s
};

/// Throws InvalidCommand when scale is outside [0, 1] or not finite.
void validate(const TeleopCommand& command);

TwistCommand teleop_to_twist(const TeleopCommand& command, const TeleopLimits& limits);

/// Saturates each component to the configured limits.
TwistCommand clamp_twist(const TwistCommand& twist, const TeleopLimits& limits);

}  // namespace caris::bridge
