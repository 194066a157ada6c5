#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "caris/bridge/ros_msgs.hpp"
#include "caris/error.hpp"
#include "caris/sim/simulator.hpp"

namespace caris::sim {

CARIS_DEFINE_ERROR(BindError, Error);

/// Topic accepted in lockstep mode to advance the clock: `{"steps": n}`.
inline constexpr const char* kStepTopic = "/sim/step";

/// Serves a Simulator over the rosbridge wire protocol.
///
/// Incoming /cmd_vel publishes replace the commanded twist, /tts publishes are
/// appended to the spoken log, and every subscriber to /scan or /odom gets the
/// same frames in the same order. With `realtime` the clock is paced by a
/// wall-clock loop; otherwise it only moves on advance() or /sim/step.
class SimServer {
 public:
  struct Options {
    std::string address = "127.0.0.1";
    unsigned short port = 0;  // 0 picks an ephemeral port
    bool realtime = true;
    bridge::TopicConfig topics;
  };

  /// Binds immediately; throws BindError if the endpoint is taken.
  SimServer(World world, SimParams params, Options options);
  ~SimServer();
  SimServer(const SimServer&) = delete;
  SimServer& operator=(const SimServer&) = delete;

  void start();
  void stop();

  unsigned short port() const;
  std::string url() const;

  /// Lockstep advance; also allowed while realtime, interleaving with the loop.
  void advance(std::uint64_t steps);

  SimState state() const;
  std::vector<std::string> spoken() const;
  std::size_t client_count() const;
  std::uint64_t frames_rejected() const;

  /// Called on the I/O thread each time a /cmd_vel frame is applied.
  void set_command_observer(std::function<void(const TwistCommand&)> observer);
  /// Called on the I/O thread for every /tts utterance.
  void set_speech_observer(std::function<void(const std::string&)> observer);

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace caris::sim
