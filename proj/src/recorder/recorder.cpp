#include "caris/recorder/recorder.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace caris::recorder {

namespace fs = std::filesystem;

namespace {

constexpr const char* kKindNames[] = {"teleop", "tts", "stt", "snapshot", "llm", "track", "registry", "scenario"};

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool is_png(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() > sizeof(kPngSignature) && std::equal(std::begin(kPngSignature), std::end(kPngSignature), bytes.begin());
}

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    out += ok ? c : '-';
  }
  return out.empty() ? "session" : out;
}

std::string iso_basic(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

int open_append(const fs::path& p) {
  const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw StorageError("cannot open " + p.string() + ": " + std::strerror(errno));
  return fd;
}

void write_all(int fd, const std::string& data, const char* what) {
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StorageError(std::string("write to ") + what + " failed: " + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

void sync(int fd) {
  if (::fdatasync(fd) != 0) throw StorageError(std::string("fsync failed: ") + std::strerror(errno));
}

void write_file_durable(const fs::path& p, const std::string& data) {
  const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw StorageError("cannot create " + p.string() + ": " + std::strerror(errno));
  try {
    write_all(fd, data, p.c_str());
    sync(fd);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

}  // namespace

const char* to_string(EventKind k) { return kKindNames[static_cast<int>(k)]; }

EventKind parse_event_kind(const std::string& name) {
  for (int i = 0; i < 8; ++i) {
    if (name == kKindNames[i]) return static_cast<EventKind>(i);
  }
  throw std::invalid_argument("unknown event kind '" + name + "'");
}

std::string format_decimal(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string serialize_event(const SessionEvent& e) {
  Json j;
  j["seq"] = e.seq;
  j["timestamp"] = e.timestamp;
  j["kind"] = to_string(e.kind);
  j["payload"] = e.payload;
  if (e.person_id) j["person_id"] = *e.person_id;
  return j.dump();
}

SessionEvent parse_event(const std::string& line) {
  const Json j = Json::parse(line);
  SessionEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.timestamp = j.at("timestamp").get<std::int64_t>();
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  e.payload = j.at("payload");
  if (!e.payload.is_object()) throw std::invalid_argument("payload must be an object");
  if (j.contains("person_id")) e.person_id = j.at("person_id").get<std::int64_t>();
  if (j.size() != (e.person_id ? 5u : 4u)) throw std::invalid_argument("unexpected fields");
  return e;
}

std::string serialize_events(const std::vector<SessionEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    out += serialize_event(e);
    out += '\n';
  }
  return out;
}

Session::Session(fs::path dir, std::shared_ptr<Clock> clock) : dir_(std::move(dir)), clock_(std::move(clock)) {}

std::unique_ptr<Session> Session::start(const fs::path& storage, const std::string& scenario_name,
                                        const Json& scenario, SessionOptions options) {
  const fs::path root = storage / "sessions";
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw StorageError("cannot create " + root.string() + ": " + ec.message());

  const std::string base = iso_basic(options.started_at.value_or(std::chrono::system_clock::now())) + "_" +
                           sanitize(scenario_name);
  fs::path dir;
  for (int n = 1;; ++n) {
    dir = root / (n == 1 ? base : base + "_" + std::to_string(n));
    // create_directory reports false when it already exists, which makes
    // the name claim atomic across concurrent starts.
    if (fs::create_directory(dir, ec)) break;
    if (ec) throw StorageError("cannot create " + dir.string() + ": " + ec.message());
  }
  fs::create_directory(dir / "llm", ec);
  if (!ec) fs::create_directory(dir / "snapshots", ec);
  if (ec) throw StorageError("cannot create session subdirectories: " + ec.message());

  auto clock = options.clock ? options.clock : std::make_shared<SteadyClock>();
  std::unique_ptr<Session> s(new Session(dir, std::move(clock)));
  write_file_durable(dir / "scenario.json", scenario.dump(2) + "\n");
  s->events_fd_ = open_append(dir / "events.jsonl");
  s->commands_fd_ = open_append(dir / "commands.log");
  return s;
}

Session::~Session() {
  try {
    close();
  } catch (...) {
  }
}

void Session::close() {
  std::lock_guard lock(mutex_);
  if (closed_) return;
  closed_ = true;
  if (events_fd_ >= 0) ::close(events_fd_);
  if (commands_fd_ >= 0) ::close(commands_fd_);
  events_fd_ = commands_fd_ = -1;
}

bool Session::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::uint64_t Session::event_count() const {
  std::lock_guard lock(mutex_);
  return next_seq_ - 1;
}

void Session::set_observer(std::function<void(const SessionEvent&)> observer) {
  std::lock_guard lock(observer_mutex_);
  observer_ = std::move(observer);
}

void Session::notify(const SessionEvent& e) {
  std::lock_guard lock(observer_mutex_);
  if (observer_) observer_(e);
}

std::uint64_t Session::append_locked(std::unique_lock<std::mutex>& lock, EventKind kind, Json payload,
                                     std::optional<std::int64_t> person_id, SessionEvent& out) {
  (void)lock;
  out.seq = next_seq_;
  out.timestamp = std::max(last_timestamp_, clock_->now_ms());
  out.kind = kind;
  out.payload = std::move(payload);
  out.person_id = person_id;
  write_all(events_fd_, serialize_event(out) + "\n", "events.jsonl");
  sync(events_fd_);
  if (kind == EventKind::Teleop || kind == EventKind::Tts) {
    std::string line = std::to_string(out.timestamp);
    if (kind == EventKind::Teleop) {
      line += " TELEOP " + out.payload.value("command", std::string("?")) + " " +
              format_decimal(out.payload.value("scale", 1.0));
    } else {
      line += " TTS " + one_line(out.payload.value("text", std::string()));
    }
    write_all(commands_fd_, line + "\n", "commands.log");
    sync(commands_fd_);
  }
  ++next_seq_;
  last_timestamp_ = out.timestamp;
  return out.seq;
}

std::uint64_t Session::record(EventKind kind, Json payload, std::optional<std::int64_t> person_id,
                              std::optional<std::string> note) {
  if (!payload.is_object()) throw std::invalid_argument("event payload must be an object");
  if (note) payload["note"] = *note;
  SessionEvent e;
  {
    std::unique_lock lock(mutex_);
    if (closed_) throw SessionClosed("session " + dir_.filename().string() + " is closed");
    append_locked(lock, kind, std::move(payload), person_id, e);
  }
  notify(e);
  return e.seq;
}

fs::path Session::record_snapshot(const std::vector<std::uint8_t>& png, std::optional<std::int64_t> person_id,
                                  std::optional<std::string> note) {
  if (!photo_capture()) throw DisabledByScenario("photo capture is disabled in this scenario");
  if (!is_png(png)) throw InvalidImage("snapshot is not a PNG");
  SessionEvent e;
  fs::path path;
  {
    std::unique_lock lock(mutex_);
    if (closed_) throw SessionClosed("session " + dir_.filename().string() + " is closed");
    const std::string rel = "snapshots/" + std::to_string(next_seq_) + ".png";
    path = dir_ / rel;
    write_file_durable(path, std::string(png.begin(), png.end()));
    Json payload{{"path", rel}, {"bytes", png.size()}};
    if (note) payload["note"] = *note;
    append_locked(lock, EventKind::Snapshot, std::move(payload), person_id, e);
  }
  notify(e);
  return path;
}

fs::path Session::record_llm(const Json& exchange, const std::vector<std::uint8_t>* image,
                             std::optional<std::int64_t> person_id, std::optional<std::string> note) {
  if (image && !is_png(*image)) throw InvalidImage("attached image is not a PNG");
  SessionEvent e;
  fs::path path;
  {
    std::unique_lock lock(mutex_);
    if (closed_) throw SessionClosed("session " + dir_.filename().string() + " is closed");
    const std::string stem = "llm/" + std::to_string(next_seq_);
    Json payload{{"path", stem + ".json"}};
    if (image) {
      write_file_durable(dir_ / (stem + ".png"), std::string(image->begin(), image->end()));
      payload["image"] = stem + ".png";
    }
    path = dir_ / (stem + ".json");
    Json doc = exchange;
    if (image) doc["image"] = stem + ".png";
    write_file_durable(path, doc.dump(2) + "\n");
    for (const char* key : {"exchange_id", "provider", "model"}) {
      if (exchange.contains(key)) payload[key] = exchange[key];
    }
    payload["ok"] = exchange.contains("response");
    if (note) payload["note"] = *note;
    append_locked(lock, EventKind::Llm, std::move(payload), person_id, e);
  }
  notify(e);
  return path;
}

std::vector<SessionEvent> replay(const fs::path& session_dir) {
  std::ifstream in(session_dir / "events.jsonl", std::ios::binary);
  if (!in) throw CorruptSession("no events.jsonl in " + session_dir.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();

  std::vector<SessionEvent> events;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < data.size()) {
    ++line_no;
    const std::size_t nl = data.find('\n', pos);
    if (nl == std::string::npos) {
      throw CorruptSession("line " + std::to_string(line_no) + ": truncated (no newline)");
    }
    const std::string line = data.substr(pos, nl - pos);
    pos = nl + 1;
    SessionEvent e;
    try {
      e = parse_event(line);
    } catch (const std::exception& ex) {
      throw CorruptSession("line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (e.seq != line_no) {
      throw CorruptSession("line " + std::to_string(line_no) + ": seq " + std::to_string(e.seq) + " out of order");
    }
    if (!events.empty() && e.timestamp < events.back().timestamp) {
      throw CorruptSession("line " + std::to_string(line_no) + ": timestamp decreases");
    }
    events.push_back(std::move(e));
  }
  return events;
}

std::vector<SessionEvent> filter_events(const std::vector<SessionEvent>& events, std::optional<EventKind> kind,
                                        std::optional<std::int64_t> person_id) {
  std::vector<SessionEvent> out;
  for (const auto& e : events) {
    if (kind && e.kind != *kind) continue;
    if (person_id && e.person_id != person_id) continue;
    out.push_back(e);
  }
  return out;
}

}  // namespace caris::recorder
