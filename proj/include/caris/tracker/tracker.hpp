#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "caris/error.hpp"
#include "caris/json.hpp"
#include "caris/tracker/bbox.hpp"
#include "caris/tracker/kalman.hpp"

namespace caris::tracker {

CARIS_DEFINE_ERROR(InvalidDetection, Error);
CARIS_DEFINE_ERROR(NonMonotonicFrame, Error);
CARIS_DEFINE_ERROR(UnknownPerson, Error);
CARIS_DEFINE_ERROR(EmptyLabel, Error);

using Embedding = Eigen::VectorXd;
using TrackId = std::int64_t;
using PersonId = std::int64_t;

struct Detection {
  std::int64_t frame_id = 0;
  BBox bbox;
  double confidence = 1.0;
  Embedding embedding;
};

/// Throws InvalidDetection unless extents are positive, confidence is in
/// [0, 1] and the embedding has `dim` entries and unit norm (within 1e-6).
void validate(const Detection& d, std::size_t dim);

enum class TrackStatus { Tentative, Confirmed, Deleted };
const char* to_string(TrackStatus s);

struct Track {
  TrackId track_id = 0;
  Gaussian filter;
  TrackStatus status = TrackStatus::Tentative;
  int hits = 0;
  int misses = 0;
  std::deque<Embedding> gallery;  // newest last, capped at K
  std::optional<PersonId> person_id;

  BBox bbox() const { return BBox::from_xyah(filter.mean.head<4>()); }
};

/// Pointer into the session log.
struct EventRef {
  std::uint64_t seq = 0;
  std::string kind;
  std::int64_t timestamp_ms = 0;

  bool operator==(const EventRef&) const = default;
};

struct PersonRecord {
  PersonId person_id = 0;
  std::string label;
  std::optional<std::string> group;
  std::set<TrackId> linked_tracks;
  std::deque<Embedding> gallery;
  std::vector<EventRef> history;
};

struct TrackerParams {
  double lambda = 0.5;     // weight of the IoU term
  double tau_app = 0.4;    // appearance gate on 1 - cosine
  double c_max = 0.7;      // matches costlier than this are dropped
  double tau_reid = 0.8;   // cosine needed to re-link a person
  double gate = kChi2Gate4;
  int n_init = 3;
  int max_age = 30;
  std::size_t gallery_size = 50;
  std::size_t embedding_dim = 128;
  KalmanParams kalman;
};

/// 1 - max cosine between `e` and the gallery; 1 for an empty gallery.
double appearance_distance(const std::deque<Embedding>& gallery, const Embedding& e);

struct Association {
  std::vector<std::pair<int, int>> matches;  // (track index, detection index)
  std::vector<int> unmatched_tracks;
  std::vector<int> unmatched_detections;
};

/// Single-pass gated assignment over predicted tracks.
Association associate(const std::vector<Track>& tracks, const std::vector<Detection>& detections,
                      const TrackerParams& params, const KalmanFilter& filter);

struct TrackView {
  TrackId track_id = 0;
  std::optional<PersonId> person_id;
  std::string label;
  std::optional<std::string> group;
  BBox bbox;
  int detection = -1;  // index of the detection matched this frame, or -1
};

struct TrackerSnapshot {
  std::int64_t frame_id = -1;
  std::vector<TrackView> tracks;  // Confirmed only, ascending track_id
};

Json snapshot_to_json(const TrackerSnapshot& s);

enum class TrackEventKind { Created, Confirmed, Linked, Deleted };
const char* to_string(TrackEventKind k);

struct TrackEvent {
  TrackEventKind kind;
  TrackId track_id;
  std::optional<PersonId> person_id;
  bool new_person = false;  // Linked: the person record was created for this track
};

/// Tracking-by-detection with a person registry. Not thread-safe; see
/// SharedTracker for the serialized front end.
class Tracker {
 public:
  explicit Tracker(TrackerParams params = {});

  const TrackerParams& params() const { return params_; }

  /// Throws NonMonotonicFrame unless frame_id exceeds the previous one, and
  /// InvalidDetection before touching any state.
  TrackerSnapshot step(std::int64_t frame_id, const std::vector<Detection>& detections);

  /// Lifecycle changes produced by the last step().
  const std::vector<TrackEvent>& last_events() const { return events_; }

  TrackerSnapshot snapshot() const;
  const std::vector<Track>& tracks() const { return tracks_; }
  std::int64_t last_frame() const { return last_frame_; }

  /// Links a Confirmed track to the best-matching person not currently
  /// tracked, or to a new record. Returns the person id.
  PersonId reidentify(Track& track);
  /// Best person whose gallery reaches `tau_reid` cosine with `gallery`.
  std::optional<PersonId> best_person(const std::deque<Embedding>& gallery, const std::set<PersonId>& exclude) const;

  void label_person(PersonId id, const std::string& label);
  void group_persons(const std::vector<PersonId>& ids, const std::string& group);
  void attribute(PersonId id, const EventRef& ref);
  const std::vector<EventRef>& person_history(PersonId id) const;
  const PersonRecord& person(PersonId id) const;
  bool has_person(PersonId id) const { return persons_.count(id) != 0; }
  const std::map<PersonId, PersonRecord>& persons() const { return persons_; }

  /// Registry with galleries, for the session directory.
  Json registry_to_json() const;

 private:
  PersonRecord& person_mut(PersonId id);
  PersonId create_person();
  void push_gallery(std::deque<Embedding>& gallery, const Embedding& e) const;

  TrackerParams params_;
  KalmanFilter filter_;
  std::vector<Track> tracks_;
  std::map<TrackId, int> matched_detection_;
  std::map<PersonId, PersonRecord> persons_;
  std::vector<TrackEvent> events_;
  std::int64_t last_frame_ = -1;
  bool started_ = false;
  TrackId next_track_ = 1;
  PersonId next_person_ = 1;
};

/// One mutator at a time; readers take the last published snapshot, which
/// is immutable.
class SharedTracker {
 public:
  explicit SharedTracker(TrackerParams params = {}) : tracker_(params) {
    published_ = std::make_shared<const TrackerSnapshot>();
  }

  struct StepResult {
    std::shared_ptr<const TrackerSnapshot> snapshot;
    std::vector<TrackEvent> events;
  };
  StepResult step(std::int64_t frame_id, const std::vector<Detection>& detections);

  std::shared_ptr<const TrackerSnapshot> snapshot() const;

  void label_person(PersonId id, const std::string& label);
  void group_persons(const std::vector<PersonId>& ids, const std::string& group);
  void attribute(PersonId id, const EventRef& ref);
  std::vector<EventRef> person_history(PersonId id) const;
  PersonRecord person(PersonId id) const;
  bool has_person(PersonId id) const;
  std::int64_t last_frame() const;
  Json registry_to_json() const;

 private:
  void publish();

  mutable std::mutex mutex_;
  Tracker tracker_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const TrackerSnapshot> published_;
};

}  // namespace caris::tracker
