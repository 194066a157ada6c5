#include "caris/gateway/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <limits>
#include <set>
#include <thread>

#include "caris/bridge/client.hpp"
#include "caris/bridge/teleop.hpp"
#include "caris/conversation/speech.hpp"
#include "caris/gateway/console.hpp"
#include "caris/gateway/video.hpp"
#include "caris/mapping/occupancy_grid.hpp"
#include "caris/tracker/synthetic.hpp"

namespace caris::gateway {

namespace fs = std::filesystem;
using conversation::ScenarioConfig;

namespace {

// Request-level failures that map straight onto a status code.
CARIS_DEFINE_ERROR(BadRequest, Error);
CARIS_DEFINE_ERROR(NotFound, Error);
CARIS_DEFINE_ERROR(Conflict, Error);
CARIS_DEFINE_ERROR(RobotUnavailable, Error);
CARIS_DEFINE_ERROR(MethodNotAllowed, Error);

/// Session time that follows the robot's odometry stamps once they arrive,
/// anchored at the wall-clock offset of the first stamp.
class RobotClock : public recorder::Clock {
 public:
  std::int64_t now_ms() override {
    std::lock_guard lock(mutex_);
    if (!first_) return steady_.now_ms();
    return base_ + std::llround((latest_ - *first_) * 1000.0);
  }
  void on_stamp(double stamp) {
    std::lock_guard lock(mutex_);
    if (!first_) {
      first_ = stamp;
      latest_ = stamp;
      base_ = steady_.now_ms();
    }
    latest_ = std::max(latest_, stamp);
  }

 private:
  std::mutex mutex_;
  recorder::SteadyClock steady_;
  std::optional<double> first_;
  double latest_ = 0.0;
  std::int64_t base_ = 0;
};

Json parse_body(const HttpRequest& r) {
  if (r.body.empty()) return Json::object();
  Json j;
  try {
    j = Json::parse(r.body);
  } catch (const Json::exception& e) {
    throw BadRequest(std::string("body is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw BadRequest("body must be a JSON object");
  return j;
}

std::optional<std::string> opt_string(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) throw BadRequest(std::string(key) + " must be a string");
  return j[key].get<std::string>();
}

std::optional<std::int64_t> opt_int(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number_integer()) throw BadRequest(std::string(key) + " must be an integer");
  return j[key].get<std::int64_t>();
}

std::string required_string(const Json& j, const char* key) {
  auto v = opt_string(j, key);
  if (!v) throw BadRequest(std::string("missing field ") + key);
  return *v;
}

std::int64_t parse_id(const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw NotFound("no person '" + text + "'");
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    const auto j = path.find('/', i);
    const auto part = path.substr(i, j == std::string::npos ? std::string::npos : j - i);
    if (!part.empty()) out.push_back(part);
    if (j == std::string::npos) break;
    i = j + 1;
  }
  return out;
}

bool is_png(const std::vector<std::uint8_t>& b) {
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return b.size() > 8 && std::equal(std::begin(sig), std::end(sig), b.begin());
}

std::vector<std::uint8_t> decode_b64(const std::string& text, const char* what) {
  try {
    return conversation::base64_decode(text);
  } catch (const std::invalid_argument&) {
    throw BadRequest(std::string(what) + " is not valid base64");
  }
}

Json person_json(const tracker::PersonRecord& p) {
  return Json{{"person_id", p.person_id},
              {"label", p.label},
              {"group", p.group ? Json(*p.group) : Json(nullptr)},
              {"linked_tracks", std::vector<tracker::TrackId>(p.linked_tracks.begin(), p.linked_tracks.end())},
              {"gallery_size", p.gallery.size()},
              {"history_size", p.history.size()}};
}

Json ref_json(const tracker::EventRef& r) {
  return Json{{"seq", r.seq}, {"kind", r.kind}, {"timestamp", r.timestamp_ms}};
}

std::uint64_t seq_of(const fs::path& artifact) { return std::stoull(artifact.stem().string()); }

HttpResponse ok(const Json& body, int status = 200) { return json_response(status, body.dump()); }

}  // namespace

struct Gateway::Impl {
  GatewayConfig config;
  std::shared_ptr<RobotClock> robot_clock;
  std::unique_ptr<recorder::Session> session;

  mutable std::mutex scenario_mutex;
  std::shared_ptr<const ScenarioConfig> scenario_ptr;

  std::shared_ptr<conversation::ProviderRegistry> providers = std::make_shared<conversation::ProviderRegistry>();
  std::unique_ptr<conversation::Conversation> conversation;
  std::unique_ptr<conversation::Speech> speech;
  tracker::SharedTracker tracker;
  mapping::Mapper mapper;

  mutable std::mutex client_mutex;
  std::shared_ptr<bridge::BridgeClient> client_ptr;

  struct Camera {
    std::mutex mutex;
    std::int64_t last_frame_id = std::numeric_limits<std::int64_t>::min();
    std::uint64_t seq = 0;
    cv::Mat frame;
  } camera;

  struct Composite {
    std::mutex mutex;
    std::uint64_t frame_seq = std::numeric_limits<std::uint64_t>::max();
    std::shared_ptr<const tracker::TrackerSnapshot> snapshot;
    std::vector<std::uint8_t> jpeg;
  } composite_cache;

  std::atomic<bool> running{false};
  std::mutex run_mutex;
  std::condition_variable run_cv;
  std::thread robot_thread;
  std::unique_ptr<HttpServer> server;
  std::string host;

  explicit Impl(GatewayConfig cfg)
      : config(std::move(cfg)), tracker(config.tracker), mapper(config.map) {
    conversation::validate(config.scenario);
    scenario_ptr = std::make_shared<const ScenarioConfig>(config.scenario);
    recorder::SessionOptions options = config.session;
    if (!options.clock && config.clock == ClockSource::Robot) {
      robot_clock = std::make_shared<RobotClock>();
      options.clock = robot_clock;
    }
    session = recorder::Session::start(config.storage, config.scenario.name, conversation::scenario_to_json(config.scenario),
                                       options);
    session->set_photo_capture(config.scenario.enabled_features.photo_capture);
    session->set_observer([this](const recorder::SessionEvent& e) { attribute(e); });

    conversation = std::make_unique<conversation::Conversation>(providers, session.get(), config.conversation);
    conversation->adopt_role(config.scenario.default_role);
    speech = std::make_unique<conversation::Speech>(
        std::make_shared<conversation::MockStt>(),
        std::make_shared<conversation::BridgeTts>([this] { return client(); }), session.get());

    const auto [h, port] = parse_listen(config.listen);
    host = h;
    Routes routes;
    routes.handle = [this](const HttpRequest& r) { return handle(r); };
    routes.streams["/video"] = [this](const HttpRequest& r, StreamWriter& w) { stream_video(r, w); };
    routes.websockets["/state"] = [this](const HttpRequest& r, WsSender& s) { stream_state(r, s); };
    server = std::make_unique<HttpServer>(host, port, std::move(routes));
  }

  std::shared_ptr<const ScenarioConfig> scenario() const {
    std::lock_guard lock(scenario_mutex);
    return scenario_ptr;
  }

  std::shared_ptr<bridge::BridgeClient> client() const {
    std::lock_guard lock(client_mutex);
    return client_ptr;
  }

  bool robot_connected() const {
    const auto c = client();
    return c && c->is_open();
  }

  // Every event that names people joins their interaction history.
  void attribute(const recorder::SessionEvent& e) {
    std::set<tracker::PersonId> ids;
    if (e.person_id) ids.insert(*e.person_id);
    if (const auto it = e.payload.find("person_ids"); it != e.payload.end() && it->is_array()) {
      for (const Json& id : *it) {
        if (id.is_number_integer()) ids.insert(id.get<tracker::PersonId>());
      }
    }
    const tracker::EventRef ref{e.seq, recorder::to_string(e.kind), e.timestamp};
    for (const auto id : ids) {
      if (tracker.has_person(id)) tracker.attribute(id, ref);
    }
  }

  void ensure_connected() {
    if (config.robot_url.empty() || robot_connected()) return;
    try {
      std::shared_ptr<bridge::BridgeClient> c = bridge::BridgeClient::connect(config.robot_url);
      c->subscribe_scan([this](const bridge::LaserScan& s) { mapper.on_scan(s); });
      c->subscribe_odom([this](const bridge::Odometry& o) {
        mapper.on_odometry(o);
        if (robot_clock) robot_clock->on_stamp(o.stamp);
      });
      std::lock_guard lock(client_mutex);
      client_ptr = std::move(c);
    } catch (const Error&) {
      // Retried on the next tick; teleop answers 503 meanwhile.
    }
  }

  void robot_loop() {
    std::unique_lock lock(run_mutex);
    while (running) {
      run_cv.wait_for(lock, config.reconnect_interval, [this] { return !running.load(); });
      if (!running) break;
      lock.unlock();
      ensure_connected();
      lock.lock();
    }
  }

  // ---- state and video ----

  Json state_frame() const {
    const auto snap = tracker.snapshot();
    const Pose2D pose = mapper.pose();
    Json tracks = Json::array();
    for (const auto& t : snap->tracks) {
      tracks.push_back(Json{{"track_id", t.track_id},
                            {"person_id", t.person_id ? Json(*t.person_id) : Json(nullptr)},
                            {"label", t.label},
                            {"group", t.group ? Json(*t.group) : Json(nullptr)},
                            {"bbox", {t.bbox.cx, t.bbox.cy, t.bbox.w, t.bbox.h}}});
    }
    const auto last = speech->last_utterance();
    return Json{{"timestamp", session->now_ms()},
                {"pose", {{"x", pose.x}, {"y", pose.y}, {"theta", pose.theta}}},
                {"tracks", std::move(tracks)},
                {"frame_id", snap->frame_id},
                {"map_version", mapper.version()},
                {"last_utterance", last ? Json(*last) : Json(nullptr)},
                {"active_scenario", scenario()->name},
                {"robot_connected", robot_connected()}};
  }

  void stream_state(const HttpRequest& req, WsSender& out) {
    const double hz = std::clamp(req.query_param("hz") ? std::atof(req.query_param("hz")->c_str()) : config.state_hz,
                                 1.0, 100.0);
    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(1.0 / hz));
    auto next = std::chrono::steady_clock::now();
    while (out.open()) {
      if (!out.send_text(state_frame().dump())) break;
      next += period;
      std::this_thread::sleep_until(next);
    }
  }

  /// Latest camera frame with overlays, re-encoded only when the frame or
  /// the confirmed tracks changed. Returns the composite's change key.
  std::pair<std::vector<std::uint8_t>, std::pair<std::uint64_t, const void*>> composite() {
    cv::Mat frame;
    std::uint64_t seq = 0;
    {
      std::lock_guard lock(camera.mutex);
      frame = camera.frame;
      seq = camera.seq;
    }
    const auto snap = tracker.snapshot();
    std::lock_guard lock(composite_cache.mutex);
    if (composite_cache.frame_seq != seq || composite_cache.snapshot != snap) {
      const cv::Mat base = frame.empty() ? placeholder_frame() : frame;
      composite_cache.jpeg = encode_jpeg(draw_overlays(base, *snap));
      composite_cache.frame_seq = seq;
      composite_cache.snapshot = snap;
    }
    return {composite_cache.jpeg, {seq, snap.get()}};
  }

  void stream_video(const HttpRequest& req, StreamWriter& out) {
    long parts_left = -1;
    if (const auto p = req.query_param("parts")) parts_left = std::max(1L, std::atol(p->c_str()));
    if (!out.write(mjpeg_header())) return;
    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / std::clamp(config.video_fps, 1.0, 60.0)));
    std::optional<std::pair<std::uint64_t, const void*>> sent_key;
    auto sent_at = std::chrono::steady_clock::now();
    while (out.open() && parts_left != 0) {
      auto [jpeg, key] = composite();
      const auto now = std::chrono::steady_clock::now();
      // Unchanged pictures are still repeated once a second so clients can
      // tell a quiet camera from a dead stream.
      if (!sent_key || *sent_key != key || now - sent_at >= std::chrono::seconds(1)) {
        if (!out.write(mjpeg_part(jpeg))) return;
        sent_key = key;
        sent_at = now;
        if (parts_left > 0) --parts_left;
      }
      std::this_thread::sleep_for(period);
    }
  }

  cv::Mat latest_frame() {
    std::lock_guard lock(camera.mutex);
    if (camera.frame.empty()) throw Conflict("no camera frame received yet");
    return camera.frame.clone();
  }

  // ---- handlers ----

  HttpResponse teleop(const HttpRequest& req) {
    const Json body = parse_body(req);
    bridge::TeleopCommand cmd;
    cmd.kind = bridge::parse_teleop_kind(required_string(body, "command"));
    if (body.contains("scale")) {
      if (!body["scale"].is_number()) throw BadRequest("scale must be a number");
      cmd.scale = body["scale"].get<double>();
    }
    bridge::validate(cmd);
    const auto note = opt_string(body, "note");
    const auto person = opt_int(body, "person_id");
    const TwistCommand twist = bridge::teleop_to_twist(cmd, scenario()->teleop);
    const auto c = client();
    if (!c || !c->is_open()) throw RobotUnavailable("robot is not connected");
    bridge::PublishAck ack;
    try {
      ack = c->publish_twist(twist);
    } catch (const bridge::Disconnected& e) {
      throw RobotUnavailable(e.what());
    }
    const auto seq = session->record(recorder::EventKind::Teleop,
                                     {{"command", std::string(bridge::to_string(cmd.kind))},
                                      {"scale", cmd.scale},
                                      {"linear", twist.linear},
                                      {"angular", twist.angular},
                                      {"frame_seq", ack.frame_seq}},
                                     person, note);
    return ok({{"seq", seq}, {"frame_seq", ack.frame_seq}, {"linear", twist.linear}, {"angular", twist.angular}}, 202);
  }

  HttpResponse frames(const HttpRequest& req) {
    std::int64_t frame_id = 0;
    std::vector<std::uint8_t> bytes;
    const std::string type = req.header("content-type");
    if (type.rfind("image/", 0) == 0) {
      auto id = req.query_param("frame_id");
      if (!id && !req.header("x-frame-id").empty()) id = req.header("x-frame-id");
      if (!id) throw BadRequest("frame_id query parameter or X-Frame-Id header required");
      try {
        std::size_t used = 0;
        frame_id = std::stoll(*id, &used);
        if (used != id->size()) throw std::invalid_argument(*id);
      } catch (const std::exception&) {
        throw BadRequest("frame_id must be an integer");
      }
      bytes.assign(req.body.begin(), req.body.end());
    } else {
      const Json body = parse_body(req);
      const auto id = opt_int(body, "frame_id");
      if (!id) throw BadRequest("missing field frame_id");
      frame_id = *id;
      bytes = decode_b64(required_string(body, "image_base64"), "image_base64");
    }
    cv::Mat image = decode_image(bytes);
    std::lock_guard lock(camera.mutex);
    if (frame_id <= camera.last_frame_id) {
      throw Conflict("frame " + std::to_string(frame_id) + " after " + std::to_string(camera.last_frame_id));
    }
    camera.last_frame_id = frame_id;
    camera.frame = std::move(image);
    ++camera.seq;
    return ok({{"frame_id", frame_id}, {"width", camera.frame.cols}, {"height", camera.frame.rows}}, 202);
  }

  HttpResponse detections(const HttpRequest& req) {
    const Json body = parse_body(req);
    const tracker::SyntheticFrame batch = tracker::detections_from_json(body);
    const auto result = tracker.step(batch.frame_id, batch.detections);
    Json events = Json::array();
    std::set<tracker::PersonId> linked;
    for (const auto& e : result.events) {
      Json j{{"kind", tracker::to_string(e.kind)}, {"track_id", e.track_id}};
      if (e.person_id) j["person_id"] = *e.person_id;
      if (e.kind == tracker::TrackEventKind::Linked) {
        j["new_person"] = e.new_person;
        if (e.person_id) linked.insert(*e.person_id);
      }
      events.push_back(std::move(j));
    }
    Json confirmed = Json::array();
    for (const auto& t : result.snapshot->tracks) confirmed.push_back(t.track_id);
    const auto seq = session->record(recorder::EventKind::Track,
                                     {{"frame_id", batch.frame_id},
                                      {"detections", batch.detections.size()},
                                      {"confirmed", confirmed},
                                      {"events", events},
                                      {"person_ids", std::vector<tracker::PersonId>(linked.begin(), linked.end())}},
                                     std::nullopt, opt_string(body, "note"));
    Json out = tracker::snapshot_to_json(*result.snapshot);
    out["events"] = std::move(events);
    out["seq"] = seq;
    return ok(out);
  }

  HttpResponse persons(const HttpRequest& req, const std::vector<std::string>& parts) {
    if (parts.size() == 1) {
      if (req.method != "GET") throw MethodNotAllowed(req.method);
      Json list = Json::array();
      const Json registry = tracker.registry_to_json();
      for (const Json& p : registry["persons"]) list.push_back(person_json(tracker.person(p["person_id"])));
      return ok({{"persons", std::move(list)}});
    }
    if (parts.size() == 2 && parts[1] == "group") {
      if (req.method != "POST") throw MethodNotAllowed(req.method);
      const Json body = parse_body(req);
      if (!body.contains("person_ids") || !body["person_ids"].is_array()) throw BadRequest("person_ids must be a list");
      const auto ids = body["person_ids"].get<std::vector<tracker::PersonId>>();
      if (ids.empty()) throw BadRequest("person_ids is empty");
      const std::string group = required_string(body, "group");
      tracker.group_persons(ids, group);
      const auto seq = session->record(recorder::EventKind::Registry,
                                       {{"action", "group"}, {"group", group}, {"person_ids", ids}}, std::nullopt,
                                       opt_string(body, "note"));
      return ok({{"seq", seq}, {"group", group}, {"person_ids", ids}});
    }
    const tracker::PersonId id = parse_id(parts[1]);
    if (!tracker.has_person(id)) throw NotFound("no person " + std::to_string(id));
    if (parts.size() == 2) {
      if (req.method != "GET") throw MethodNotAllowed(req.method);
      return ok(person_json(tracker.person(id)));
    }
    if (parts.size() == 3 && parts[2] == "rename") {
      if (req.method != "POST") throw MethodNotAllowed(req.method);
      const Json body = parse_body(req);
      const std::string label = required_string(body, "label");
      tracker.label_person(id, label);
      const auto seq = session->record(recorder::EventKind::Registry, {{"action", "rename"}, {"label", label}}, id,
                                       opt_string(body, "note"));
      return ok({{"seq", seq}, {"person_id", id}, {"label", label}});
    }
    if (parts.size() == 3 && parts[2] == "history") {
      if (req.method != "GET") throw MethodNotAllowed(req.method);
      const auto record = tracker.person(id);
      Json history = Json::array();
      for (const auto& r : tracker.person_history(id)) history.push_back(ref_json(r));
      Json out = person_json(record);
      out["history"] = std::move(history);
      return ok(out);
    }
    throw NotFound(req.path);
  }

  HttpResponse snapshot(const HttpRequest& req) {
    const Json body = parse_body(req);
    if (!scenario()->enabled_features.photo_capture) throw DisabledByScenario("photo capture is off in this scenario");
    const auto png = encode_png(latest_frame());
    const auto path = session->record_snapshot(png, opt_int(body, "person_id"), opt_string(body, "note"));
    return ok({{"seq", seq_of(path)}, {"path", "snapshots/" + path.filename().string()}, {"bytes", png.size()}}, 201);
  }

  HttpResponse llm_complete(const HttpRequest& req) {
    const Json body = parse_body(req);
    const auto scen = scenario();
    conversation::CompletionRequest r;
    r.provider = opt_string(body, "provider");
    r.person_id = opt_int(body, "person_id");
    r.note = opt_string(body, "note");
    if (const auto speaker = opt_string(body, "speaker")) {
      try {
        r.speaker = conversation::parse_speaker(*speaker);
      } catch (const std::invalid_argument& e) {
        throw BadRequest(e.what());
      }
    }
    if (const auto tid = opt_string(body, "template_id")) {
      const auto* t = scen->find_template(*tid);
      if (!t) throw conversation::UnknownTemplate("no template '" + *tid + "'");
      std::map<std::string, std::string> vars;
      if (body.contains("vars")) {
        if (!body["vars"].is_object()) throw BadRequest("vars must be an object");
        vars = body["vars"].get<std::map<std::string, std::string>>();
      }
      r.prompt = conversation::render_template(*t, vars);
    } else {
      r.prompt = opt_string(body, "prompt").value_or("");
    }
    if (const auto b64 = opt_string(body, "image_base64")) {
      r.image = decode_b64(*b64, "image_base64");
      if (!is_png(*r.image)) throw BadRequest("image must be a PNG");
    } else if (body.value("attach_frame", false)) {
      if (!scen->enabled_features.llm) throw DisabledByScenario("LLM use is disabled in this scenario");
      r.image = encode_png(latest_frame());
    }
    const auto ex = conversation->complete(r, *scen);
    Json out = conversation::exchange_to_json(ex);
    return ok(out);
  }

  HttpResponse llm_role(const HttpRequest& req) {
    if (req.method == "GET") return ok({{"role", conversation->role()}});
    if (req.method != "POST" && req.method != "PUT") throw MethodNotAllowed(req.method);
    const Json body = parse_body(req);
    const std::string role = opt_string(body, "role").value_or("");
    conversation->set_role(role, opt_string(body, "note"));
    return ok({{"role", role}});
  }

  HttpResponse speak(const HttpRequest& req) {
    const Json body = parse_body(req);
    const std::string text = opt_string(body, "text").value_or("");
    const auto scen = scenario();
    conversation::Utterance u;
    try {
      u = speech->speak(text, scen->enabled_features, opt_int(body, "person_id"), opt_string(body, "note"));
    } catch (const conversation::AdapterUnavailable& e) {
      throw RobotUnavailable(e.what());
    }
    conversation->add_utterance(conversation::Speaker::Wizard, text);
    return ok({{"seq", u.seq}, {"text", u.text}});
  }

  HttpResponse transcribe(const HttpRequest& req) {
    const Json body = parse_body(req);
    const auto audio = decode_b64(required_string(body, "audio_base64"), "audio_base64");
    conversation::Utterance u;
    try {
      u = speech->transcribe(audio, scenario()->enabled_features, opt_int(body, "person_id"), opt_string(body, "note"));
    } catch (const conversation::AdapterUnavailable& e) {
      throw BadRequest(e.what());
    }
    conversation->add_utterance(conversation::Speaker::User, u.text);
    return ok({{"seq", u.seq}, {"text", u.text}});
  }

  HttpResponse put_scenario(const HttpRequest& req) {
    const Json body = parse_body(req);
    auto next = std::make_shared<const ScenarioConfig>(conversation::scenario_from_json(body));
    {
      std::lock_guard lock(scenario_mutex);
      scenario_ptr = next;
      session->set_photo_capture(next->enabled_features.photo_capture);
      conversation->adopt_role(next->default_role);
    }
    const Json doc = conversation::scenario_to_json(*next);
    const auto seq = session->record(recorder::EventKind::Scenario, {{"action", "load"}, {"name", next->name}, {"scenario", doc}},
                                     std::nullopt, opt_string(body, "note"));
    Json out = doc;
    out["seq"] = seq;
    return ok(out);
  }

  HttpResponse suggestions(const HttpRequest& req) {
    const auto scen = scenario();
    std::size_t limit = 5;
    if (const auto l = req.query_param("limit")) limit = static_cast<std::size_t>(std::clamp(std::atol(l->c_str()), 0L, 50L));
    const bool generate = req.query_param("generate").value_or("0") == "1";
    const std::string transcript = conversation->recent_transcript();
    std::function<std::string(const std::string&)> generator;
    if (generate) {
      generator = [&](const std::string&) {
        return conversation->generate_suggestion(*scen, std::chrono::milliseconds(5000));
      };
    }
    return ok({{"suggestions", conversation::suggest_prompts(*scen, transcript, limit, generator)},
               {"transcript", transcript}});
  }

  HttpResponse list_scenarios() {
    Json list = Json::array();
    if (!config.scenario_dir.empty() && fs::is_directory(config.scenario_dir)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(config.scenario_dir)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        try {
          list.push_back(Json{{"file", f.filename().string()},
                              {"scenario", conversation::scenario_to_json(conversation::load_scenario(f))}});
        } catch (const Error&) {
          // Broken files are not offered.
        }
      }
    }
    return ok({{"scenarios", std::move(list)}});
  }

  HttpResponse providers_list() {
    Json list = Json::array();
    const auto scen = scenario();
    for (const auto& p : scen->all_providers()) {
      list.push_back(Json{{"name", p.name}, {"kind", conversation::to_string(p.kind)}, {"model", p.model},
                          {"supports_images", p.supports_images}});
    }
    return ok({{"default", scen->provider}, {"providers", std::move(list)}});
  }

  HttpResponse map_meta() {
    const auto grid = mapper.snapshot();
    const Pose2D pose = mapper.pose();
    return ok({{"version", mapper.version()},
               {"resolution", grid->resolution()},
               {"origin", {{"x", grid->origin().x}, {"y", grid->origin().y}}},
               {"width", grid->width()},
               {"height", grid->height()},
               {"pose", {{"x", pose.x}, {"y", pose.y}, {"theta", pose.theta}}}});
  }

  HttpResponse route(const HttpRequest& req) {
    const auto parts = split_path(req.path);
    const std::string& m = req.method;
    auto only = [&](const char* method) {
      if (m != method) throw MethodNotAllowed(m + " " + req.path);
    };
    if (parts.empty()) {
      only("GET");
      return HttpResponse{200, "text/html; charset=utf-8", console_html(), {}};
    }
    const std::string& head = parts[0];
    if (head == "teleop" && parts.size() == 1) return only("POST"), teleop(req);
    if (head == "state" && parts.size() == 1) return only("GET"), ok(state_frame());
    if (head == "video.jpg" && parts.size() == 1) {
      only("GET");
      auto jpeg = composite().first;
      return HttpResponse{200, "image/jpeg", std::string(jpeg.begin(), jpeg.end()), {}};
    }
    if (head == "frames" && parts.size() == 1) return only("POST"), frames(req);
    if (head == "detections" && parts.size() == 1) return only("POST"), detections(req);
    if (head == "persons") return persons(req, parts);
    if (head == "snapshot" && parts.size() == 1) return only("POST"), snapshot(req);
    if (head == "llm" && parts.size() == 2) {
      if (parts[1] == "complete") return only("POST"), llm_complete(req);
      if (parts[1] == "role") return llm_role(req);
      if (parts[1] == "providers") return only("GET"), providers_list();
      if (parts[1] == "history") {
        only("GET");
        Json list = Json::array();
        for (const auto& msg : conversation->history()) {
          list.push_back(Json{{"speaker", conversation::to_string(msg.speaker)}, {"text", msg.text}});
        }
        return ok({{"messages", std::move(list)}});
      }
    }
    if (head == "speak" && parts.size() == 1) return only("POST"), speak(req);
    if (head == "transcribe" && parts.size() == 1) return only("POST"), transcribe(req);
    if (head == "scenario" && parts.size() == 1) {
      if (m == "GET") return ok(conversation::scenario_to_json(*scenario()));
      return only("PUT"), put_scenario(req);
    }
    if (head == "scenario" && parts.size() == 2 && parts[1] == "suggestions") return only("GET"), suggestions(req);
    if (head == "scenarios" && parts.size() == 1) return only("GET"), list_scenarios();
    if (head == "map.png" && parts.size() == 1) {
      only("GET");
      const auto png = mapping::render_map(*mapper.snapshot());
      return HttpResponse{200, "image/png", std::string(png.begin(), png.end()), {}};
    }
    if (head == "map" && parts.size() == 1) return only("GET"), map_meta();
    if (head == "session" && parts.size() == 1) {
      only("GET");
      return ok({{"directory", session->directory().string()}, {"events", session->event_count()}});
    }
    if (head == "health" && parts.size() == 1) return ok({{"ok", true}, {"robot_connected", robot_connected()}});
    throw NotFound("no endpoint " + req.path);
  }

  HttpResponse handle(const HttpRequest& req) {
    try {
      return route(req);
    } catch (const BadRequest& e) {
      return error_response(400, e.what());
    } catch (const NotFound& e) {
      return error_response(404, e.what());
    } catch (const MethodNotAllowed& e) {
      return error_response(405, e.what());
    } catch (const Conflict& e) {
      return error_response(409, e.what());
    } catch (const RobotUnavailable& e) {
      return error_response(503, e.what());
    } catch (const DisabledByScenario& e) {
      return error_response(403, e.what());
    } catch (const tracker::UnknownPerson& e) {
      return error_response(404, e.what());
    } catch (const conversation::UnknownProvider& e) {
      return error_response(404, e.what());
    } catch (const conversation::UnknownTemplate& e) {
      return error_response(404, e.what());
    } catch (const tracker::NonMonotonicFrame& e) {
      return error_response(409, e.what());
    } catch (const conversation::ProviderUnavailable& e) {
      return error_response(502, e.what());
    } catch (const recorder::StorageError& e) {
      return error_response(500, e.what());
    } catch (const recorder::SessionClosed& e) {
      return error_response(503, e.what());
    } catch (const Error& e) {
      // Remaining library errors are all about the request's content:
      // bad commands, detections, images, templates, scenarios, prompts.
      return error_response(400, e.what());
    } catch (const Json::exception& e) {
      return error_response(400, e.what());
    }
  }
};

Gateway::Gateway(GatewayConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
  if (impl_->running.exchange(true)) return;
  impl_->ensure_connected();
  impl_->robot_thread = std::thread([this] { impl_->robot_loop(); });
  impl_->server->start();
}

void Gateway::stop() {
  {
    std::lock_guard lock(impl_->run_mutex);
    impl_->running = false;
  }
  impl_->run_cv.notify_all();
  if (impl_->robot_thread.joinable()) impl_->robot_thread.join();
  // Stalled model calls would otherwise hold their connections open.
  impl_->providers->cancel_all();
  impl_->server->stop();
  if (auto c = impl_->client()) c->close();
}

unsigned short Gateway::port() const { return impl_->server->port(); }

std::string Gateway::url() const {
  const std::string host = impl_->host == "0.0.0.0" || impl_->host == "::" ? "127.0.0.1" : impl_->host;
  return "http://" + (host.find(':') != std::string::npos ? "[" + host + "]" : host) + ":" + std::to_string(port());
}

HttpResponse Gateway::handle(const HttpRequest& request) { return impl_->handle(request); }
Json Gateway::state_frame() const { return impl_->state_frame(); }
recorder::Session& Gateway::session() { return *impl_->session; }
conversation::ProviderRegistry& Gateway::providers() { return *impl_->providers; }
bool Gateway::robot_connected() const { return impl_->robot_connected(); }

}  // namespace caris::gateway
