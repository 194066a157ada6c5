#include "caris/bridge/message.hpp"

#include <array>
#include <utility>

namespace caris::bridge {
namespace {

constexpr std::array<std::pair<Op, std::string_view>, 5> kOpNames{{
    {Op::Advertise, "advertise"},
    {Op::Unadvertise, "unadvertise"},
    {Op::Publish, "publish"},
    {Op::Subscribe, "subscribe"},
    {Op::Unsubscribe, "unsubscribe"},
}};

bool is_known_field(const std::string& key) {
  return key == "op" || key == "topic" || key == "type" || key == "msg" || key == "id";
}

}  // namespace

std::string_view to_string(Op op) {
  for (const auto& [value, name] : kOpNames) {
    if (value == op) return name;
  }
  return "publish";
}

Op parse_op(std::string_view text) {
  for (const auto& [value, name] : kOpNames) {
    if (name == text) return value;
  }
  throw UnknownOp("\"" + std::string(text) + "\"");
}

BridgeMessage BridgeMessage::publish(std::string topic, Json msg) {
  BridgeMessage m;
  m.op = Op::Publish;
  m.topic = std::move(topic);
  m.msg = std::move(msg);
  return m;
}

BridgeMessage BridgeMessage::advertise(std::string topic, std::string type) {
  BridgeMessage m;
  m.op = Op::Advertise;
  m.topic = std::move(topic);
  m.type = std::move(type);
  return m;
}

BridgeMessage BridgeMessage::subscribe(std::string topic, std::string type) {
  BridgeMessage m;
  m.op = Op::Subscribe;
  m.topic = std::move(topic);
  m.type = std::move(type);
  return m;
}

void validate(const BridgeMessage& message) {
  if (message.topic.empty()) throw InvalidMessage("topic is required");
  switch (message.op) {
    case Op::Advertise:
    case Op::Subscribe:
      if (!message.type || message.type->empty()) {
        throw InvalidMessage(std::string(to_string(message.op)) + " requires a type");
      }
      break;
    case Op::Publish:
      if (!message.msg) throw InvalidMessage("publish requires a msg payload");
      if (!message.msg->is_object()) throw InvalidMessage("msg must be a JSON object");
      break;
    case Op::Unadvertise:
    case Op::Unsubscribe:
      break;
  }
  if (!message.extras.is_object()) throw InvalidMessage("extras must be an object");
}

std::string encode_message(const BridgeMessage& message) {
  validate(message);
  Json frame = Json::object();
  frame["op"] = to_string(message.op);
  frame["topic"] = message.topic;
  if (message.type) frame["type"] = *message.type;
  if (message.msg) frame["msg"] = *message.msg;
  if (message.id) frame["id"] = *message.id;
  for (const auto& [key, value] : message.extras.items()) {
    if (!is_known_field(key)) frame[key] = value;
  }
  return frame.dump();
}

BridgeMessage decode_message(std::string_view bytes, const CodecOptions& options) {
  Json frame;
  try {
    frame = Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::parse_error& e) {
    throw ParseError(e.what());
  }
  if (!frame.is_object()) throw ParseError("frame is not a JSON object");

  const auto op_it = frame.find("op");
  if (op_it == frame.end() || !op_it->is_string()) throw InvalidMessage("missing \"op\"");

  BridgeMessage message;
  message.op = parse_op(op_it->get<std::string>());

  auto read_string = [&](const char* key) -> std::optional<std::string> {
    const auto it = frame.find(key);
    if (it == frame.end()) return std::nullopt;
    if (!it->is_string()) throw InvalidMessage(std::string("\"") + key + "\" must be a string");
    return it->get<std::string>();
  };
  message.topic = read_string("topic").value_or("");
  message.type = read_string("type");
  message.id = read_string("id");
  if (const auto it = frame.find("msg"); it != frame.end()) message.msg = *it;

  if (options.preserve_unknown_fields) {
    for (const auto& [key, value] : frame.items()) {
      if (!is_known_field(key)) message.extras[key] = value;
    }
  }
  validate(message);
  return message;
}

}  // namespace caris::bridge
