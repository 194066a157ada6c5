#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "caris/error.hpp"
#include "caris/json.hpp"

namespace caris::bridge {

CARIS_DEFINE_ERROR(InvalidMessage, Error);
CARIS_DEFINE_ERROR(ParseError, Error);
CARIS_DEFINE_ERROR(UnknownOp, Error);

enum class Op { Advertise, Unadvertise, Publish, Subscribe, Unsubscribe };

std::string_view to_string(Op op);
/// Throws UnknownOp for anything outside the five supported operations.
Op parse_op(std::string_view text);

/// One rosbridge v2.0 envelope.
///
/// `type` is required for advertise/subscribe, `msg` for publish. `extras`
/// carries unrecognized top-level fields when the codec is configured to
/// preserve them; it is encoded after the known fields.
struct BridgeMessage {
  Op op{Op::Publish};
  std::string topic;
  std::optional<std::string> type;
  std::optional<Json> msg;
  std::optional<std::string> id;
  Json extras = Json::object();

  bool operator==(const BridgeMessage&) const = default;

  static BridgeMessage publish(std::string topic, Json msg);
  static BridgeMessage advertise(std::string topic, std::string type);
  static BridgeMessage subscribe(std::string topic, std::string type);
};

struct CodecOptions {
  bool preserve_unknown_fields = false;
};

/// Throws InvalidMessage when an op-dependent required field is missing.
void validate(const BridgeMessage& message);

/// Serializes to a single UTF-8 JSON object with fields in the order
/// op, topic, type, msg, id; absent optionals are omitted.
std::string encode_message(const BridgeMessage& message);

BridgeMessage decode_message(std::string_view bytes, const CodecOptions& options = {});

}  // namespace caris::bridge
