#pragma once

#include <json.hpp>

namespace caris {

// Insertion-ordered so that wire frames and log lines keep a stable,
// documented field order.
using Json = nlohmann::ordered_json;

}  // namespace caris
