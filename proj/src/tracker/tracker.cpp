#include "caris/tracker/tracker.hpp"

#include <algorithm>
#include <cmath>

#include "caris/tracker/hungarian.hpp"

namespace caris::tracker {

void validate(const Detection& d, std::size_t dim) {
  if (!(d.bbox.w > 0.0) || !(d.bbox.h > 0.0)) throw InvalidDetection("bbox extents must be positive");
  if (!std::isfinite(d.bbox.cx) || !std::isfinite(d.bbox.cy)) throw InvalidDetection("bbox center must be finite");
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) throw InvalidDetection("confidence outside [0, 1]");
  if (static_cast<std::size_t>(d.embedding.size()) != dim) {
    throw InvalidDetection("embedding has " + std::to_string(d.embedding.size()) + " entries, expected " +
                           std::to_string(dim));
  }
  if (!(std::abs(d.embedding.norm() - 1.0) <= 1e-6)) throw InvalidDetection("embedding is not unit norm");
}

const char* to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::Tentative:
      return "tentative";
    case TrackStatus::Confirmed:
      return "confirmed";
    case TrackStatus::Deleted:
      return "deleted";
  }
  return "?";
}

const char* to_string(TrackEventKind k) {
  switch (k) {
    case TrackEventKind::Created:
      return "created";
    case TrackEventKind::Confirmed:
      return "confirmed";
    case TrackEventKind::Linked:
      return "linked";
    case TrackEventKind::Deleted:
      return "deleted";
  }
  return "?";
}

double appearance_distance(const std::deque<Embedding>& gallery, const Embedding& e) {
  double best = -1.0;
  for (const auto& g : gallery) best = std::max(best, g.dot(e));
  return gallery.empty() ? 1.0 : 1.0 - best;
}

Association associate(const std::vector<Track>& tracks, const std::vector<Detection>& detections,
                      const TrackerParams& params, const KalmanFilter& filter) {
  Association out;
  const int n = static_cast<int>(tracks.size());
  const int m = static_cast<int>(detections.size());
  // Forbidden pairs get a cost no allowed pair can reach, so the solver
  // always finds a full assignment and we filter afterwards.
  constexpr double kBlocked = 1e6;
  Eigen::MatrixXd cost(n, m);
  for (int i = 0; i < n; ++i) {
    const BBox predicted = tracks[i].bbox();
    for (int j = 0; j < m; ++j) {
      const Detection& d = detections[j];
      const double d_app = appearance_distance(tracks[i].gallery, d.embedding);
      const double maha = filter.gating_distance(tracks[i].filter, d.bbox.to_xyah());
      if (d_app > params.tau_app || maha > params.gate) {
        cost(i, j) = kBlocked;
      } else {
        cost(i, j) = params.lambda * (1.0 - iou(predicted, d.bbox)) + (1.0 - params.lambda) * d_app;
      }
    }
  }
  std::vector<char> track_used(n), det_used(m);
  for (const auto& [i, j] : hungarian(cost).pairs) {
    if (cost(i, j) >= kBlocked || cost(i, j) > params.c_max) continue;
    out.matches.emplace_back(i, j);
    track_used[i] = det_used[j] = 1;
  }
  for (int i = 0; i < n; ++i)
    if (!track_used[i]) out.unmatched_tracks.push_back(i);
  for (int j = 0; j < m; ++j)
    if (!det_used[j]) out.unmatched_detections.push_back(j);
  return out;
}

Json snapshot_to_json(const TrackerSnapshot& s) {
  Json tracks = Json::array();
  for (const auto& t : s.tracks) {
    Json j;
    j["track_id"] = t.track_id;
    j["person_id"] = t.person_id ? Json(*t.person_id) : Json(nullptr);
    j["label"] = t.label;
    j["group"] = t.group ? Json(*t.group) : Json(nullptr);
    j["bbox"] = Json::array({t.bbox.cx, t.bbox.cy, t.bbox.w, t.bbox.h});
    j["detection"] = t.detection;
    tracks.push_back(std::move(j));
  }
  return Json{{"frame_id", s.frame_id}, {"tracks", std::move(tracks)}};
}

Tracker::Tracker(TrackerParams params) : params_(params), filter_(params.kalman) {}

void Tracker::push_gallery(std::deque<Embedding>& gallery, const Embedding& e) const {
  gallery.push_back(e);
  while (gallery.size() > params_.gallery_size) gallery.pop_front();
}

TrackerSnapshot Tracker::step(std::int64_t frame_id, const std::vector<Detection>& detections) {
  if (started_ && frame_id <= last_frame_) {
    throw NonMonotonicFrame("frame " + std::to_string(frame_id) + " after " + std::to_string(last_frame_));
  }
  for (const auto& d : detections) validate(d, params_.embedding_dim);

  events_.clear();
  matched_detection_.clear();
  const double dt = started_ ? static_cast<double>(frame_id - last_frame_) : 1.0;
  started_ = true;
  last_frame_ = frame_id;

  for (auto& t : tracks_) t.filter = filter_.predict(t.filter, dt);

  const Association a = associate(tracks_, detections, params_, filter_);

  for (const auto& [i, j] : a.matches) {
    Track& t = tracks_[i];
    const Detection& d = detections[j];
    t.filter = filter_.update(t.filter, d.bbox.to_xyah());
    ++t.hits;
    t.misses = 0;
    push_gallery(t.gallery, d.embedding);
    matched_detection_[t.track_id] = j;
    if (t.person_id) push_gallery(person_mut(*t.person_id).gallery, d.embedding);
    if (t.status == TrackStatus::Tentative && t.hits >= params_.n_init) {
      t.status = TrackStatus::Confirmed;
      events_.push_back({TrackEventKind::Confirmed, t.track_id, std::nullopt});
      reidentify(t);
    }
  }

  for (int i : a.unmatched_tracks) {
    Track& t = tracks_[i];
    ++t.misses;
    if (t.status == TrackStatus::Tentative || t.misses > params_.max_age) {
      t.status = TrackStatus::Deleted;
      events_.push_back({TrackEventKind::Deleted, t.track_id, t.person_id});
    }
  }
  std::erase_if(tracks_, [](const Track& t) { return t.status == TrackStatus::Deleted; });

  for (int j : a.unmatched_detections) {
    const Detection& d = detections[j];
    Track t;
    t.track_id = next_track_++;
    t.filter = filter_.initiate(d.bbox.to_xyah());
    t.hits = 1;
    push_gallery(t.gallery, d.embedding);
    matched_detection_[t.track_id] = j;
    events_.push_back({TrackEventKind::Created, t.track_id, std::nullopt});
    tracks_.push_back(std::move(t));
    if (tracks_.back().hits >= params_.n_init) {
      tracks_.back().status = TrackStatus::Confirmed;
      events_.push_back({TrackEventKind::Confirmed, tracks_.back().track_id, std::nullopt});
      reidentify(tracks_.back());
    }
  }
  return snapshot();
}

TrackerSnapshot Tracker::snapshot() const {
  TrackerSnapshot s;
  s.frame_id = last_frame_;
  for (const auto& t : tracks_) {
    if (t.status != TrackStatus::Confirmed) continue;
    TrackView v;
    v.track_id = t.track_id;
    v.person_id = t.person_id;
    if (t.person_id) {
      const PersonRecord& p = persons_.at(*t.person_id);
      v.label = p.label;
      v.group = p.group;
    }
    v.bbox = t.bbox();
    const auto it = matched_detection_.find(t.track_id);
    v.detection = it == matched_detection_.end() ? -1 : it->second;
    s.tracks.push_back(std::move(v));
  }
  std::sort(s.tracks.begin(), s.tracks.end(), [](const auto& a, const auto& b) { return a.track_id < b.track_id; });
  return s;
}

std::optional<PersonId> Tracker::best_person(const std::deque<Embedding>& gallery,
                                             const std::set<PersonId>& exclude) const {
  std::optional<PersonId> best;
  double best_sim = params_.tau_reid;
  for (const auto& [id, p] : persons_) {
    if (exclude.count(id)) continue;
    for (const auto& a : gallery) {
      for (const auto& b : p.gallery) {
        const double sim = a.dot(b);
        if (sim > best_sim || (sim == best_sim && !best)) {
          best_sim = sim;
          best = id;
        }
      }
    }
  }
  return best;
}

PersonId Tracker::reidentify(Track& track) {
  // A person already followed by another live track is somebody else.
  std::set<PersonId> busy;
  for (const auto& t : tracks_) {
    if (t.track_id != track.track_id && t.status != TrackStatus::Deleted && t.person_id) busy.insert(*t.person_id);
  }
  bool created = false;
  PersonId id;
  if (const auto match = best_person(track.gallery, busy)) {
    id = *match;
  } else {
    id = create_person();
    created = true;
  }
  PersonRecord& p = person_mut(id);
  p.linked_tracks.insert(track.track_id);
  for (const auto& e : track.gallery) push_gallery(p.gallery, e);
  track.person_id = id;
  events_.push_back({TrackEventKind::Linked, track.track_id, id, created});
  return id;
}

PersonId Tracker::create_person() {
  const PersonId id = next_person_++;
  PersonRecord p;
  p.person_id = id;
  p.label = "person-" + std::to_string(id);
  persons_.emplace(id, std::move(p));
  return id;
}

PersonRecord& Tracker::person_mut(PersonId id) {
  const auto it = persons_.find(id);
  if (it == persons_.end()) throw UnknownPerson("no person " + std::to_string(id));
  return it->second;
}

const PersonRecord& Tracker::person(PersonId id) const {
  const auto it = persons_.find(id);
  if (it == persons_.end()) throw UnknownPerson("no person " + std::to_string(id));
  return it->second;
}

void Tracker::label_person(PersonId id, const std::string& label) {
  PersonRecord& p = person_mut(id);
  if (label.empty()) throw EmptyLabel("label must be non-empty");
  p.label = label;
}

void Tracker::group_persons(const std::vector<PersonId>& ids, const std::string& group) {
  for (PersonId id : ids) person(id);
  if (group.empty()) throw EmptyLabel("group must be non-empty");
  for (PersonId id : ids) person_mut(id).group = group;
}

void Tracker::attribute(PersonId id, const EventRef& ref) { person_mut(id).history.push_back(ref); }

const std::vector<EventRef>& Tracker::person_history(PersonId id) const { return person(id).history; }

Json Tracker::registry_to_json() const {
  Json persons = Json::array();
  for (const auto& [id, p] : persons_) {
    Json gallery = Json::array();
    for (const auto& e : p.gallery) gallery.push_back(std::vector<double>(e.data(), e.data() + e.size()));
    persons.push_back(Json{{"person_id", id},
                           {"label", p.label},
                           {"group", p.group ? Json(*p.group) : Json(nullptr)},
                           {"linked_tracks", std::vector<TrackId>(p.linked_tracks.begin(), p.linked_tracks.end())},
                           {"gallery", std::move(gallery)}});
  }
  return Json{{"persons", std::move(persons)}};
}

SharedTracker::StepResult SharedTracker::step(std::int64_t frame_id, const std::vector<Detection>& detections) {
  std::lock_guard lock(mutex_);
  auto snap = std::make_shared<const TrackerSnapshot>(tracker_.step(frame_id, detections));
  {
    std::lock_guard s(snapshot_mutex_);
    published_ = snap;
  }
  return {snap, tracker_.last_events()};
}

void SharedTracker::publish() {
  auto snap = std::make_shared<const TrackerSnapshot>(tracker_.snapshot());
  std::lock_guard s(snapshot_mutex_);
  published_ = std::move(snap);
}

std::shared_ptr<const TrackerSnapshot> SharedTracker::snapshot() const {
  std::lock_guard s(snapshot_mutex_);
  return published_;
}

void SharedTracker::label_person(PersonId id, const std::string& label) {
  std::lock_guard lock(mutex_);
  tracker_.label_person(id, label);
  publish();
}

void SharedTracker::group_persons(const std::vector<PersonId>& ids, const std::string& group) {
  std::lock_guard lock(mutex_);
  tracker_.group_persons(ids, group);
  publish();
}

void SharedTracker::attribute(PersonId id, const EventRef& ref) {
  std::lock_guard lock(mutex_);
  tracker_.attribute(id, ref);
}

std::vector<EventRef> SharedTracker::person_history(PersonId id) const {
  std::lock_guard lock(mutex_);
  return tracker_.person_history(id);
}

PersonRecord SharedTracker::person(PersonId id) const {
  std::lock_guard lock(mutex_);
  return tracker_.person(id);
}

bool SharedTracker::has_person(PersonId id) const {
  std::lock_guard lock(mutex_);
  return tracker_.has_person(id);
}

std::int64_t SharedTracker::last_frame() const {
  std::lock_guard lock(mutex_);
  return tracker_.last_frame();
}

Json SharedTracker::registry_to_json() const {
  std::lock_guard lock(mutex_);
  return tracker_.registry_to_json();
}

}  // namespace caris::tracker
