#include "caris/bridge/client.hpp"

#include <atomic>
#include <deque>
#include <map>
#include <mutex>
#include <regex>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace caris::bridge {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

WsEndpoint parse_ws_url(const std::string& url) {
  static const std::regex kPattern(R"(^ws://([^:/]+):(\d+)(/.*)?$)");
  std::smatch match;
  if (!std::regex_match(url, match, kPattern)) throw ConnectError("unsupported endpoint \"" + url + "\"");
  WsEndpoint endpoint;
  endpoint.host = match[1];
  endpoint.port = match[2];
  if (match[3].matched) endpoint.path = match[3];
  return endpoint;
}

struct BridgeClient::Impl {
  Options options;
  asio::io_context io;
  websocket::stream<beast::tcp_stream> ws{io};
  beast::flat_buffer read_buffer;
  std::thread io_thread;

  std::atomic<bool> open{false};
  std::atomic<std::uint64_t> sent{0};
  std::atomic<std::uint64_t> dropped{0};

  // Touched only on the I/O thread.
  std::deque<std::string> write_queue;
  bool writing = false;

  std::mutex sinks_mutex;
  std::map<std::string, std::vector<MessageSink>> sinks;
  std::function<void()> on_disconnect;
  std::once_flag disconnect_once;

  void start_read() {
    ws.async_read(read_buffer, [this](beast::error_code ec, std::size_t) {
      if (ec) {
        mark_disconnected();
        return;
      }
      const std::string frame = beast::buffers_to_string(read_buffer.data());
      read_buffer.consume(read_buffer.size());
      dispatch(frame);
      start_read();
    });
  }

  void dispatch(const std::string& frame) {
    BridgeMessage message;
    try {
      message = decode_message(frame, options.codec);
    } catch (const Error&) {
      ++dropped;
      return;
    }
    std::vector<MessageSink> targets;
    {
      std::lock_guard lock(sinks_mutex);
      const auto it = sinks.find(message.topic);
      if (it == sinks.end()) return;
      targets = it->second;
    }
    for (const auto& sink : targets) {
      try {
        sink(message);
      } catch (const Error&) {
        ++dropped;
      }
    }
  }

  void enqueue(std::string frame) {
    asio::post(io, [this, frame = std::move(frame)]() mutable {
      write_queue.push_back(std::move(frame));
      if (!writing) start_write();
    });
  }

  void start_write() {
    if (write_queue.empty() || !open) {
      writing = false;
      return;
    }
    writing = true;
    ws.text(true);
    ws.async_write(asio::buffer(write_queue.front()), [this](beast::error_code ec, std::size_t) {
      write_queue.pop_front();
      if (ec) {
        writing = false;
        mark_disconnected();
        return;
      }
      start_write();
    });
  }

  void mark_disconnected() {
    open = false;
    std::call_once(disconnect_once, [this] {
      std::function<void()> handler;
      {
        std::lock_guard lock(sinks_mutex);
        handler = on_disconnect;
      }
      if (handler) handler();
    });
  }

  PublishAck send(const BridgeMessage& message) {
    std::string frame = encode_message(message);
    if (!open) throw Disconnected("bridge connection is not open");
    const auto seq = ++sent;
    enqueue(std::move(frame));
    return {seq};
  }

  void shutdown() {
    if (!io_thread.joinable()) return;
    asio::post(io, [this] {
      // A peer that never answers the close handshake must not hang us.
      auto deadline = std::make_shared<asio::steady_timer>(io, std::chrono::seconds(1));
      deadline->async_wait([this, deadline](beast::error_code) { io.stop(); });
      if (ws.is_open()) {
        ws.async_close(websocket::close_code::normal, [this](beast::error_code) { io.stop(); });
      } else {
        io.stop();
      }
    });
    if (io_thread.get_id() == std::this_thread::get_id()) {
      io_thread.detach();
    } else {
      io_thread.join();
    }
    open = false;
  }
};

BridgeClient::BridgeClient(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

BridgeClient::~BridgeClient() { close(); }

std::unique_ptr<BridgeClient> BridgeClient::connect(const std::string& url, Options options) {
  const WsEndpoint endpoint = parse_ws_url(url);
  auto impl = std::make_shared<Impl>();
  impl->options = std::move(options);
  // Connect and handshake on the caller's thread, bounded by a deadline so a
  // listener that never answers cannot hang us.
  beast::error_code failure;
  tcp::resolver resolver(impl->io);
  auto& socket_layer = beast::get_lowest_layer(impl->ws);
  socket_layer.expires_after(std::chrono::seconds(5));
  resolver.async_resolve(endpoint.host, endpoint.port, [&](beast::error_code ec, tcp::resolver::results_type results) {
    if (ec) {
      failure = ec;
      return;
    }
    socket_layer.async_connect(results, [&](beast::error_code ec, const tcp::endpoint&) {
      if (ec) {
        failure = ec;
        return;
      }
      socket_layer.socket().set_option(tcp::no_delay(true));
      impl->ws.async_handshake(endpoint.host + ":" + endpoint.port, endpoint.path,
                               [&](beast::error_code ec) { failure = ec; });
    });
  });
  impl->io.run();
  impl->io.restart();
  socket_layer.expires_never();
  if (failure) throw ConnectError(url + ": " + failure.message());
  impl->ws.set_option(websocket::stream_base::timeout::suggested(beast::role_type::client));
  impl->open = true;
  impl->start_read();
  impl->io_thread = std::thread([impl] { impl->io.run(); });

  std::unique_ptr<BridgeClient> client(new BridgeClient(impl));
  const auto& topics = client->impl_->options.topics;
  client->publish(BridgeMessage::advertise(topics.cmd_vel, kTwistType));
  client->publish(BridgeMessage::advertise(topics.tts, kSpeechType));
  return client;
}

bool BridgeClient::is_open() const { return impl_->open; }

const TopicConfig& BridgeClient::topics() const { return impl_->options.topics; }

PublishAck BridgeClient::publish(const BridgeMessage& message) { return impl_->send(message); }

PublishAck BridgeClient::publish_twist(const TwistCommand& twist) {
  return publish(BridgeMessage::publish(impl_->options.topics.cmd_vel, twist_to_msg(twist)));
}

SpeechHandle BridgeClient::say(const std::string& text) {
  const auto& topic = impl_->options.topics.tts;
  const PublishAck ack = publish(BridgeMessage::publish(topic, speech_to_msg(text)));
  return {ack.frame_seq, topic, text};
}

void BridgeClient::subscribe(const std::string& topic, const std::string& type, MessageSink sink) {
  bool first = false;
  {
    std::lock_guard lock(impl_->sinks_mutex);
    auto& list = impl_->sinks[topic];
    first = list.empty();
    list.push_back(std::move(sink));
  }
  if (first) publish(BridgeMessage::subscribe(topic, type));
}

void BridgeClient::subscribe_scan(std::function<void(const LaserScan&)> sink) {
  subscribe(impl_->options.topics.scan, kLaserScanType,
            [sink = std::move(sink)](const BridgeMessage& m) { sink(scan_from_msg(*m.msg)); });
}

void BridgeClient::subscribe_odom(std::function<void(const Odometry&)> sink) {
  subscribe(impl_->options.topics.odom, kOdometryType,
            [sink = std::move(sink)](const BridgeMessage& m) { sink(odometry_from_msg(*m.msg)); });
}

void BridgeClient::set_disconnect_handler(std::function<void()> handler) {
  std::lock_guard lock(impl_->sinks_mutex);
  impl_->on_disconnect = std::move(handler);
}

void BridgeClient::close() {
  if (!impl_) return;
  impl_->shutdown();
}

std::uint64_t BridgeClient::frames_sent() const { return impl_->sent; }

std::uint64_t BridgeClient::frames_dropped() const { return impl_->dropped; }

}  // namespace caris::bridge
