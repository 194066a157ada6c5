#pragma once

#include <string>

namespace caris::gateway {

/// Self-contained page served at `/`: video, map, teleop keys, prompt box
/// with model dropdown and notes, quick phrases. The full console is a
/// separate application; this one only uses the public endpoints.
const std::string& console_html();

}  // namespace caris::gateway
