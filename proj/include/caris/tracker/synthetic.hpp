#pragma once

// Deterministic stand-in for a person detector: analytic boxes moving at
// constant velocity and fixed appearance embeddings, with ground truth.

#include <cstdint>
#include <utility>
#include <vector>

#include "caris/json.hpp"
#include "caris/tracker/tracker.hpp"

namespace caris::tracker {

struct SyntheticPerson {
  int truth_id = 0;
  BBox start;               // box at start_frame
  double vx = 0.0;          // px per frame
  double vy = 0.0;
  std::int64_t start_frame = 1;
  Embedding embedding;
  std::vector<std::pair<std::int64_t, std::int64_t>> visible;  // inclusive frame ranges
  double embedding_noise = 0.0;  // stddev per component before renormalizing
};

struct SyntheticScene {
  std::vector<SyntheticPerson> people;
  std::int64_t first_frame = 1;
  std::int64_t last_frame = 40;
  std::uint64_t seed = 1;
};

struct SyntheticFrame {
  std::int64_t frame_id = 0;
  std::vector<Detection> detections;
  std::vector<int> truth;  // truth_id per detection
};

/// Unit basis vector e_k in `dim` dimensions.
Embedding basis_embedding(std::size_t dim, std::size_t k);

std::vector<SyntheticFrame> render_scene(const SyntheticScene& scene);

/// Two people walk toward each other along the same line and pass, 40
/// frames, orthogonal embeddings.
SyntheticScene crossing_scene(std::size_t dim = 128);

/// Person 0 is seen for frames 1-20, is gone long enough for the track to
/// be deleted, then returns at frame 61 with a noisy version of the same
/// embedding. Person 1 stays in view throughout.
SyntheticScene leave_return_scene(std::size_t dim = 128);

/// Times a ground-truth person's confirmed track id changes between frames
/// in which that person is covered by a confirmed track.
int identity_switches(const std::vector<SyntheticFrame>& frames, const std::vector<TrackerSnapshot>& snapshots);

/// Ingestion payload `{frame_id, detections: [{bbox: [cx, cy, w, h],
/// confidence, embedding: [...]}]}`. Throws InvalidDetection on bad shape.
SyntheticFrame detections_from_json(const Json& j);
Json detections_to_json(std::int64_t frame_id, const std::vector<Detection>& detections);

}  // namespace caris::tracker
