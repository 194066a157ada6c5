#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "caris/bridge/message.hpp"
#include "caris/bridge/ros_msgs.hpp"
#include "caris/error.hpp"
#include "caris/geometry.hpp"

namespace caris::bridge {

CARIS_DEFINE_ERROR(Disconnected, Error);
CARIS_DEFINE_ERROR(ConnectError, Error);

struct WsEndpoint {
  std::string host;
  std::string port;
  std::string path = "/";
};

/// Parses "ws://host:port[/path]". Throws ConnectError on anything else.
WsEndpoint parse_ws_url(const std::string& url);

/// Acknowledges that a frame was queued on the connection writer. Sequence
/// numbers count outbound frames, starting at 1.
struct PublishAck {
  std::uint64_t frame_seq = 0;
};

/// Returned by say(); carries what the recorder needs to log the utterance.
struct SpeechHandle {
  std::uint64_t frame_seq = 0;
  std::string topic;
  std::string text;
};

/// Client side of a rosbridge connection.
///
/// One reader and one writer run on a private I/O thread. publish() may be
/// called from any thread; frames leave in call order. Sinks for a topic are
/// invoked one at a time, in arrival order, on the I/O thread, so they must
/// not block for long and must not destroy the client.
///
/// The client never reconnects by itself. After the peer goes away every
/// publish throws Disconnected and the disconnect handler fires once.
class BridgeClient {
 public:
  struct Options {
    TopicConfig topics;
    CodecOptions codec;
  };

  using MessageSink = std::function<void(const BridgeMessage&)>;

  /// Connects and advertises the command topics. Throws ConnectError.
  static std::unique_ptr<BridgeClient> connect(const std::string& url, Options options);
  static std::unique_ptr<BridgeClient> connect(const std::string& url) { return connect(url, Options{}); }

  ~BridgeClient();
  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  bool is_open() const;
  const TopicConfig& topics() const;

  PublishAck publish(const BridgeMessage& message);
  PublishAck publish_twist(const TwistCommand& twist);
  SpeechHandle say(const std::string& text);

  void subscribe(const std::string& topic, const std::string& type, MessageSink sink);
  void subscribe_scan(std::function<void(const LaserScan&)> sink);
  void subscribe_odom(std::function<void(const Odometry&)> sink);

  void set_disconnect_handler(std::function<void()> handler);

  /// Graceful close; idempotent.
  void close();

  std::uint64_t frames_sent() const;
  std::uint64_t frames_dropped() const;

 private:
  struct Impl;
  explicit BridgeClient(std::shared_ptr<Impl> impl);
  std::shared_ptr<Impl> impl_;
};

}  // namespace caris::bridge
