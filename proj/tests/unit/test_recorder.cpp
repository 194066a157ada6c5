#include <doctest.h>

#include <unistd.h>

#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "caris/recorder/recorder.hpp"

using namespace caris;
using namespace caris::recorder;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("caris_rec_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::uint8_t> tiny_png() {
  cv::Mat m(4, 4, CV_8UC3, cv::Scalar(10, 200, 30));
  std::vector<std::uint8_t> out;
  cv::imencode(".png", m, out);
  return out;
}

const auto kFixedStart = std::chrono::system_clock::time_point(std::chrono::seconds(1767225600));  // 2026-01-01

std::unique_ptr<Session> open(const TempDir& tmp, std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>(),
                              const std::string& scenario = "tour_guide") {
  return Session::start(tmp.path, scenario, Json{{"name", scenario}}, {clock, kFixedStart});
}

}  // namespace

TEST_SUITE("recorder") {
  TEST_CASE("start creates the session layout") {
    TempDir tmp;
    const Json scenario{{"name", "tour_guide"}, {"enabled_features", {{"photo_capture", true}}}};
    auto s = Session::start(tmp.path, "tour_guide", scenario, {std::make_shared<ManualClock>(), kFixedStart});
    const fs::path dir = s->directory();
    CHECK(dir.parent_path() == tmp.path / "sessions");
    CHECK(dir.filename() == "20260101T000000Z_tour_guide");
    CHECK(fs::is_regular_file(dir / "events.jsonl"));
    CHECK(fs::file_size(dir / "events.jsonl") == 0);
    CHECK(fs::is_regular_file(dir / "commands.log"));
    CHECK(fs::is_directory(dir / "llm"));
    CHECK(fs::is_directory(dir / "snapshots"));
    CHECK(Json::parse(read_file(dir / "scenario.json")) == scenario);
    CHECK(replay(dir).empty());
  }

  TEST_CASE("sessions started in the same second get distinct directories") {
    TempDir tmp;
    auto a = open(tmp);
    auto b = open(tmp);
    auto c = open(tmp);
    CHECK(a->directory() != b->directory());
    CHECK(b->directory().filename() == "20260101T000000Z_tour_guide_2");
    CHECK(c->directory().filename() == "20260101T000000Z_tour_guide_3");
  }

  TEST_CASE("unwritable storage raises StorageError") {
    TempDir tmp;
    std::ofstream(tmp.path / "blocker") << "x";
    CHECK_THROWS_AS(Session::start(tmp.path / "blocker", "x", Json::object()), StorageError);
    if (::geteuid() != 0) {
      fs::create_directories(tmp.path / "ro");
      fs::permissions(tmp.path / "ro", fs::perms::owner_read | fs::perms::owner_exec);
      CHECK_THROWS_AS(Session::start(tmp.path / "ro", "x", Json::object()), StorageError);
      fs::permissions(tmp.path / "ro", fs::perms::owner_all);
    }
  }

  TEST_CASE("teleop and tts events also land in commands.log") {
    TempDir tmp;
    auto clock = std::make_shared<ManualClock>();
    auto s = open(tmp, clock);
    clock->set(1500);
    CHECK(s->record(EventKind::Teleop, {{"command", "forward"}, {"scale", 1.0}}) == 1);
    clock->set(2250);
    CHECK(s->record(EventKind::Tts, {{"text", "hello"}}) == 2);
    CHECK(s->record(EventKind::Track, {{"event", "confirmed"}, {"track_id", 4}}) == 3);

    const auto events = lines_of(read_file(s->directory() / "events.jsonl"));
    REQUIRE(events.size() == 3);
    CHECK(events[0] ==
          R"({"seq":1,"timestamp":1500,"kind":"teleop","payload":{"command":"forward","scale":1.0}})");
    CHECK(lines_of(read_file(s->directory() / "commands.log")) ==
          std::vector<std::string>{"1500 TELEOP forward 1.0", "2250 TTS hello"});
  }

  TEST_CASE("notes and person ids are carried and filterable") {
    TempDir tmp;
    auto s = open(tmp);
    s->record(EventKind::Tts, {{"text", "hi Alice"}}, 3, "first greeting");
    s->record(EventKind::Tts, {{"text", "hi Bob"}}, 4);
    const auto events = replay(s->directory());
    CHECK(events[0].payload["note"] == "first greeting");
    CHECK(filter_events(events, EventKind::Tts, 3).size() == 1);
    CHECK(filter_events(events, std::nullopt, 4)[0].payload["text"] == "hi Bob");
    CHECK(filter_events(events, EventKind::Llm, std::nullopt).empty());
  }

  TEST_CASE("recording after close raises SessionClosed") {
    TempDir tmp;
    auto s = open(tmp);
    s->close();
    CHECK_THROWS_AS(s->record(EventKind::Tts, {{"text", "x"}}), SessionClosed);
    CHECK_THROWS_AS(s->record_llm(Json{{"exchange_id", "e"}}), SessionClosed);
  }

  TEST_CASE("snapshots are PNG files named by seq") {
    TempDir tmp;
    auto s = open(tmp);
    s->record(EventKind::Teleop, {{"command", "stop"}, {"scale", 0.0}});
    const auto png = tiny_png();
    const fs::path path = s->record_snapshot(png, 2);
    CHECK(path == s->directory() / "snapshots" / "2.png");
    CHECK(read_file(path) == std::string(png.begin(), png.end()));
    const auto events = replay(s->directory());
    REQUIRE(events.size() == 2);
    CHECK(events[1].kind == EventKind::Snapshot);
    CHECK(events[1].payload["path"] == "snapshots/2.png");
    CHECK(events[1].person_id == 2);

    CHECK_THROWS_AS(s->record_snapshot({'n', 'o', 'p', 'e'}), InvalidImage);
    s->set_photo_capture(false);
    CHECK_THROWS_AS(s->record_snapshot(png), DisabledByScenario);
    CHECK(replay(s->directory()).size() == 2);
  }

  TEST_CASE("llm exchanges get one JSON file each") {
    TempDir tmp;
    auto s = open(tmp);
    const Json ok{{"exchange_id", "x1"}, {"provider", "mock"}, {"model", "mock"}, {"response", "echo:hi"}};
    const fs::path p = s->record_llm(ok);
    CHECK(Json::parse(read_file(p)) == ok);
    const Json failed{{"exchange_id", "x2"}, {"provider", "mock"}, {"error", "ProviderUnavailable: timeout"}};
    const auto png = tiny_png();
    const fs::path q = s->record_llm(failed, &png);
    CHECK_FALSE(Json::parse(read_file(q)).contains("response"));
    CHECK(fs::is_regular_file(s->directory() / "llm" / "2.png"));
    const auto events = replay(s->directory());
    CHECK(events[0].payload["ok"] == true);
    CHECK(events[1].payload["ok"] == false);
    CHECK(events[1].payload["image"] == "llm/2.png");

    for (int i = 0; i < 98; ++i) s->record_llm(Json{{"exchange_id", "n" + std::to_string(i)}});
    std::size_t json_files = 0;
    for (const auto& entry : fs::directory_iterator(s->directory() / "llm")) {
      json_files += entry.path().extension() == ".json";
    }
    CHECK(json_files == 100);
    const auto all = replay(s->directory());
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(all[i].payload["path"] == "llm/" + std::to_string(i + 1) + ".json");
    }
  }

  TEST_CASE("property: replay re-serializes byte-identically") {
    TempDir tmp;
    auto clock = std::make_shared<ManualClock>();
    auto s = open(tmp, clock);
    std::mt19937 rng(12);
    std::uniform_int_distribution<int> kind(0, 7), step(0, 40), pick(0, 4);
    std::uniform_real_distribution<double> real(-1e6, 1e6);
    const std::vector<std::string> texts = {"hello", "ünïcödé ✓", "quote \" and \\ backslash", "", "line\nbreak"};
    for (int i = 0; i < 500; ++i) {
      clock->advance(step(rng));
      Json payload{{"text", texts[pick(rng)]}, {"value", real(rng)}, {"count", i}, {"nested", {{"z", 1}, {"a", nullptr}}}};
      if (i % 3 == 0) payload["list"] = Json::array({0.1, 1e-300, -0.0, 42});
      std::optional<std::int64_t> person;
      if (i % 4 == 0) person = pick(rng);
      s->record(static_cast<EventKind>(kind(rng)), payload, person, i % 5 == 0 ? std::optional<std::string>("n") : std::nullopt);
    }
    const auto events = replay(s->directory());
    REQUIRE(events.size() == 500);
    CHECK(serialize_events(events) == read_file(s->directory() / "events.jsonl"));
    for (std::size_t i = 0; i < events.size(); ++i) {
      REQUIRE(events[i].seq == i + 1);
      if (i > 0) REQUIRE(events[i].timestamp >= events[i - 1].timestamp);
    }
  }

  TEST_CASE("property: concurrent writers produce a gap-free log") {
    TempDir tmp;
    auto s = Session::start(tmp.path, "load", Json::object());
    std::vector<std::thread> writers;
    for (int t = 0; t < 4; ++t) {
      writers.emplace_back([&, t] {
        for (int i = 0; i < 50; ++i) s->record(EventKind::Track, {{"writer", t}, {"i", i}});
      });
    }
    for (auto& w : writers) w.join();
    const auto events = replay(s->directory());
    REQUIRE(events.size() == 200);
    CHECK(serialize_events(events) == read_file(s->directory() / "events.jsonl"));
  }

  TEST_CASE("truncated and corrupt lines name the line") {
    TempDir tmp;
    auto s = open(tmp);
    for (int i = 0; i < 3; ++i) s->record(EventKind::Tts, {{"text", "x"}});
    s->close();
    const fs::path file = s->directory() / "events.jsonl";
    const std::string data = read_file(file);
    std::ofstream(file, std::ios::binary | std::ios::trunc) << data.substr(0, data.size() - 5);
    try {
      replay(s->directory());
      FAIL("expected CorruptSession");
    } catch (const CorruptSession& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    std::ofstream(file, std::ios::binary | std::ios::trunc) << data << R"({"seq":5,"timestamp":0,"kind":"tts","payload":{}})" << "\n";
    CHECK_THROWS_WITH_AS(replay(s->directory()), doctest::Contains("line 4"), CorruptSession);
  }

  TEST_CASE("observer sees each durable event") {
    TempDir tmp;
    auto s = open(tmp);
    std::vector<std::uint64_t> seen;
    s->set_observer([&](const SessionEvent& e) { seen.push_back(e.seq); });
    s->record(EventKind::Tts, {{"text", "a"}});
    s->record_snapshot(tiny_png());
    CHECK(seen == std::vector<std::uint64_t>{1, 2});
  }

  TEST_CASE("decimal formatting") {
    CHECK(format_decimal(1.0) == "1.0");
    CHECK(format_decimal(0.25) == "0.25");
    CHECK(format_decimal(0.0) == "0.0");
    CHECK(format_decimal(0.1) == "0.1");
  }
}
