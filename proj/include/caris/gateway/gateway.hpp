#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

#include "caris/conversation/conversation.hpp"
#include "caris/conversation/scenario.hpp"
#include "caris/gateway/http_server.hpp"
#include "caris/json.hpp"
#include "caris/mapping/mapper.hpp"
#include "caris/recorder/recorder.hpp"
#include "caris/tracker/tracker.hpp"

namespace caris::gateway {

enum class ClockSource { Steady, Robot };

struct GatewayConfig {
  std::string robot_url;  // ws://host:port; empty runs without a robot
  conversation::ScenarioConfig scenario;
  std::filesystem::path scenario_dir;  // listed by GET /scenarios when set
  std::filesystem::path storage = ".";
  std::string listen = "127.0.0.1:8080";
  double state_hz = 20.0;
  double video_fps = 15.0;
  std::chrono::milliseconds reconnect_interval{500};
  conversation::ConversationOptions conversation;
  tracker::TrackerParams tracker;
  mapping::MapperConfig map;
  /// Robot: event timestamps follow odometry stamps once they arrive, so a
  /// session recorded against the simulator runs on simulated time.
  ClockSource clock = ClockSource::Steady;
  recorder::SessionOptions session;  // an explicit clock here wins
};

/// The HTTP/WebSocket surface of the platform.
///
/// Owns the recording session, the tracker, the mapper, the conversation
/// and the robot connection. Teleop and streaming never wait on provider
/// I/O: each connection has its own thread, and the only state they share
/// with language requests is behind short mutexes.
class Gateway {
 public:
  /// Starts the session and binds the listener. Throws ListenError,
  /// recorder::StorageError, conversation::InvalidScenario.
  explicit Gateway(GatewayConfig config);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Serves requests and keeps (re)connecting to the robot.
  void start();
  void stop();

  unsigned short port() const;
  std::string url() const;

  /// Request dispatch without the socket layer.
  HttpResponse handle(const HttpRequest& request);
  Json state_frame() const;

  recorder::Session& session();
  conversation::ProviderRegistry& providers();
  bool robot_connected() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace caris::gateway
