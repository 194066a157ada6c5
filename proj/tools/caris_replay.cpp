// Prints a recorded session as JSON lines, optionally filtered.

#include <algorithm>
#include <iostream>

#include <CLI11.hpp>

#include "caris/recorder/recorder.hpp"

namespace fs = std::filesystem;

namespace {

// Accepts a session directory, or a storage root whose newest session is used.
fs::path resolve_session(const fs::path& dir) {
  if (fs::exists(dir / "events.jsonl")) return dir;
  const fs::path root = fs::exists(dir / "sessions") ? dir / "sessions" : dir;
  std::vector<fs::path> sessions;
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (fs::exists(entry.path() / "events.jsonl")) sessions.push_back(entry.path());
    }
  }
  if (sessions.empty()) throw std::runtime_error("no session under " + dir.string());
  // Names start with a UTC timestamp, so lexical order is chronological.
  return *std::max_element(sessions.begin(), sessions.end());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replay a recorded session"};
  fs::path dir;
  std::string kind;
  std::optional<std::int64_t> person;
  bool summary = false;
  app.add_option("dir", dir, "session directory or storage root")->required();
  app.add_option("--kind", kind, "only events of this kind (teleop, tts, stt, snapshot, llm, track, registry, scenario)");
  app.add_option("--person", person, "only events attributed to this person id");
  app.add_flag("--summary", summary, "print event counts per kind instead of the events");
  CLI11_PARSE(app, argc, argv);

  try {
    std::optional<caris::recorder::EventKind> k;
    if (!kind.empty()) {
      try {
        k = caris::recorder::parse_event_kind(kind);
      } catch (const std::invalid_argument&) {
        std::cerr << "caris-replay: unknown kind " << kind << "\n";
        return 2;
      }
    }
    const fs::path session = resolve_session(dir);
    const auto events = caris::recorder::filter_events(caris::recorder::replay(session), k, person);
    if (summary) {
      std::map<std::string, std::size_t> counts;
      for (const auto& e : events) ++counts[caris::recorder::to_string(e.kind)];
      std::cout << session.string() << ": " << events.size() << " events\n";
      for (const auto& [name, n] : counts) std::cout << "  " << name << " " << n << "\n";
    } else {
      std::cout << caris::recorder::serialize_events(events);
    }
  } catch (const std::exception& e) {
    std::cerr << "caris-replay: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
