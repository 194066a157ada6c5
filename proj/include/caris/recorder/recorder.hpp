#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "caris/error.hpp"
#include "caris/json.hpp"

namespace caris::recorder {

CARIS_DEFINE_ERROR(StorageError, Error);
CARIS_DEFINE_ERROR(SessionClosed, Error);
CARIS_DEFINE_ERROR(InvalidImage, Error);
CARIS_DEFINE_ERROR(CorruptSession, Error);

enum class EventKind { Teleop, Tts, Stt, Snapshot, Llm, Track, Registry, Scenario };
const char* to_string(EventKind k);
/// Throws std::invalid_argument for unknown names.
EventKind parse_event_kind(const std::string& name);

struct SessionEvent {
  std::uint64_t seq = 0;
  std::int64_t timestamp = 0;  // ms since session start
  EventKind kind = EventKind::Teleop;
  Json payload = Json::object();
  std::optional<std::int64_t> person_id;

  bool operator==(const SessionEvent&) const = default;
};

/// One events.jsonl line, without the newline. Keys in the fixed order
/// seq, timestamp, kind, payload, person_id (omitted when absent).
std::string serialize_event(const SessionEvent& e);
SessionEvent parse_event(const std::string& line);
/// Concatenation of serialized lines, each newline-terminated.
std::string serialize_events(const std::vector<SessionEvent>& events);

/// Milliseconds since session start. Implementations must be thread-safe.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() = 0;
};

class SteadyClock : public Clock {
 public:
  SteadyClock() : start_(std::chrono::steady_clock::now()) {}
  std::int64_t now_ms() override {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Driven by the caller, e.g. from the simulator's virtual clock.
class ManualClock : public Clock {
 public:
  std::int64_t now_ms() override { return now_.load(); }
  void set(std::int64_t ms) { now_.store(ms); }
  void advance(std::int64_t ms) { now_.fetch_add(ms); }

 private:
  std::atomic<std::int64_t> now_{0};
};

struct SessionOptions {
  std::shared_ptr<Clock> clock;  // defaults to SteadyClock
  /// Wall time used to name the directory; defaults to now.
  std::optional<std::chrono::system_clock::time_point> started_at;
};

/// An open recording session. Writes are serialized; every record call
/// returns only after the line has been flushed to disk.
class Session {
 public:
  /// Creates `<storage>/sessions/<YYYYMMDDTHHMMSSZ>_<scenario>[_n]/` with
  /// events.jsonl, commands.log, llm/, snapshots/ and scenario.json.
  static std::unique_ptr<Session> start(const std::filesystem::path& storage, const std::string& scenario_name,
                                        const Json& scenario, SessionOptions options = {});
  ~Session();

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::filesystem::path& directory() const { return dir_; }

  /// Appends one event. Teleop and tts events also go to commands.log.
  /// `note` is stored in the payload. Throws SessionClosed after close().
  std::uint64_t record(EventKind kind, Json payload, std::optional<std::int64_t> person_id = std::nullopt,
                       std::optional<std::string> note = std::nullopt);

  /// Writes snapshots/<seq>.png and records the snapshot event. Throws
  /// DisabledByScenario when photo capture is off, InvalidImage unless
  /// the bytes carry a PNG signature.
  std::filesystem::path record_snapshot(const std::vector<std::uint8_t>& png,
                                        std::optional<std::int64_t> person_id = std::nullopt,
                                        std::optional<std::string> note = std::nullopt);

  /// Writes llm/<seq>.json (and llm/<seq>.png for an attached image, whose
  /// relative path replaces the exchange's "image" field) and records the
  /// llm event. Returns the JSON path.
  std::filesystem::path record_llm(const Json& exchange, const std::vector<std::uint8_t>* image = nullptr,
                                   std::optional<std::int64_t> person_id = std::nullopt,
                                   std::optional<std::string> note = std::nullopt);

  void set_photo_capture(bool enabled) { photo_capture_.store(enabled); }
  bool photo_capture() const { return photo_capture_.load(); }

  /// Called after each durable append, outside the writer lock.
  void set_observer(std::function<void(const SessionEvent&)> observer);

  std::uint64_t event_count() const;
  std::int64_t now_ms() const { return clock_->now_ms(); }
  void close();
  bool closed() const;

 private:
  Session(std::filesystem::path dir, std::shared_ptr<Clock> clock);
  std::uint64_t append_locked(std::unique_lock<std::mutex>& lock, EventKind kind, Json payload,
                              std::optional<std::int64_t> person_id, SessionEvent& out);
  void notify(const SessionEvent& e);

  std::filesystem::path dir_;
  std::shared_ptr<Clock> clock_;
  mutable std::mutex mutex_;
  int events_fd_ = -1;
  int commands_fd_ = -1;
  std::uint64_t next_seq_ = 1;
  std::int64_t last_timestamp_ = 0;
  bool closed_ = false;
  std::atomic<bool> photo_capture_{true};
  std::mutex observer_mutex_;
  std::function<void(const SessionEvent&)> observer_;
};

/// Events of a recorded session in seq order. Throws CorruptSession naming
/// the 1-based line on malformed or truncated lines, seq gaps, or
/// decreasing timestamps.
std::vector<SessionEvent> replay(const std::filesystem::path& session_dir);

std::vector<SessionEvent> filter_events(const std::vector<SessionEvent>& events, std::optional<EventKind> kind,
                                        std::optional<std::int64_t> person_id);

/// Text used in commands.log for a numeric argument: shortest round-trip
/// form, always with a decimal point ("1.0", "0.25").
std::string format_decimal(double v);

}  // namespace caris::recorder
