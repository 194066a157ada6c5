#include "caris/tracker/synthetic.hpp"

#include <algorithm>
#include <map>
#include <random>

namespace caris::tracker {

Embedding basis_embedding(std::size_t dim, std::size_t k) {
  Embedding e = Embedding::Zero(static_cast<Eigen::Index>(dim));
  e(static_cast<Eigen::Index>(k % dim)) = 1.0;
  return e;
}

std::vector<SyntheticFrame> render_scene(const SyntheticScene& scene) {
  std::mt19937_64 rng(scene.seed);
  std::vector<SyntheticFrame> frames;
  for (std::int64_t f = scene.first_frame; f <= scene.last_frame; ++f) {
    SyntheticFrame frame;
    frame.frame_id = f;
    for (const auto& p : scene.people) {
      const bool seen = std::any_of(p.visible.begin(), p.visible.end(),
                                    [&](const auto& r) { return f >= r.first && f <= r.second; });
      if (!seen) continue;
      const double k = static_cast<double>(f - p.start_frame);
      Detection d;
      d.frame_id = f;
      d.bbox = {p.start.cx + p.vx * k, p.start.cy + p.vy * k, p.start.w, p.start.h};
      d.confidence = 0.9;
      d.embedding = p.embedding;
      if (p.embedding_noise > 0.0) {
        std::normal_distribution<double> noise(0.0, p.embedding_noise);
        for (Eigen::Index i = 0; i < d.embedding.size(); ++i) d.embedding(i) += noise(rng);
        d.embedding.normalize();
      }
      frame.detections.push_back(std::move(d));
      frame.truth.push_back(p.truth_id);
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

SyntheticScene crossing_scene(std::size_t dim) {
  SyntheticScene scene;
  scene.first_frame = 1;
  scene.last_frame = 40;
  SyntheticPerson a;
  a.truth_id = 0;
  a.start = {100.0, 240.0, 60.0, 150.0};
  a.vx = 11.0;
  a.embedding = basis_embedding(dim, 0);
  a.visible = {{1, 40}};
  SyntheticPerson b = a;
  b.truth_id = 1;
  b.start = {540.0, 240.0, 60.0, 150.0};
  b.vx = -11.0;
  b.embedding = basis_embedding(dim, 1);
  scene.people = {a, b};
  return scene;
}

SyntheticScene leave_return_scene(std::size_t dim) {
  SyntheticScene scene;
  scene.first_frame = 1;
  scene.last_frame = 80;
  scene.seed = 17;
  SyntheticPerson leaver;
  leaver.truth_id = 0;
  leaver.start = {200.0, 240.0, 60.0, 150.0};
  leaver.vx = 2.0;
  leaver.embedding = basis_embedding(dim, 0);
  leaver.visible = {{1, 20}, {61, 80}};
  // Per-component noise of 0.02 over 128 dims keeps cosine near 0.95.
  leaver.embedding_noise = 0.02;
  SyntheticPerson stayer;
  stayer.truth_id = 1;
  stayer.start = {480.0, 260.0, 70.0, 160.0};
  stayer.vx = -1.0;
  stayer.embedding = basis_embedding(dim, 1);
  stayer.visible = {{1, 80}};
  stayer.embedding_noise = 0.02;
  scene.people = {leaver, stayer};
  return scene;
}

int identity_switches(const std::vector<SyntheticFrame>& frames, const std::vector<TrackerSnapshot>& snapshots) {
  std::map<int, TrackId> last;
  int switches = 0;
  for (std::size_t f = 0; f < frames.size() && f < snapshots.size(); ++f) {
    for (const auto& view : snapshots[f].tracks) {
      if (view.detection < 0) continue;
      const int truth = frames[f].truth.at(static_cast<std::size_t>(view.detection));
      const auto it = last.find(truth);
      if (it != last.end() && it->second != view.track_id) ++switches;
      last[truth] = view.track_id;
    }
  }
  return switches;
}

SyntheticFrame detections_from_json(const Json& j) {
  SyntheticFrame out;
  try {
    out.frame_id = j.at("frame_id").get<std::int64_t>();
    for (const Json& d : j.at("detections")) {
      const Json& b = d.at("bbox");
      if (!b.is_array() || b.size() != 4) throw InvalidDetection("bbox must be [cx, cy, w, h]");
      Detection det;
      det.frame_id = out.frame_id;
      det.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      det.confidence = d.value("confidence", 1.0);
      const auto values = d.at("embedding").get<std::vector<double>>();
      det.embedding = Eigen::Map<const Embedding>(values.data(), static_cast<Eigen::Index>(values.size()));
      out.detections.push_back(std::move(det));
      out.truth.push_back(-1);
    }
  } catch (const Json::exception& e) {
    throw InvalidDetection(std::string("malformed detections: ") + e.what());
  }
  return out;
}

Json detections_to_json(std::int64_t frame_id, const std::vector<Detection>& detections) {
  Json list = Json::array();
  for (const auto& d : detections) {
    list.push_back(Json{{"bbox", {d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h}},
                        {"confidence", d.confidence},
                        {"embedding", std::vector<double>(d.embedding.data(), d.embedding.data() + d.embedding.size())}});
  }
  return Json{{"frame_id", frame_id}, {"detections", std::move(list)}};
}

}  // namespace caris::tracker
