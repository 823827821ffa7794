#include "kinetrack/tracker.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace kinetrack {

std::string to_string(RebirthPolicy p) { return p == RebirthPolicy::Keep ? "keep" : "purge"; }

RebirthPolicy rebirth_policy_from_string(const std::string& s) {
  if (s == "keep") return RebirthPolicy::Keep;
  if (s == "purge") return RebirthPolicy::Purge;
  throw std::invalid_argument("unknown rebirth policy '" + s + "' (expected keep|purge)");
}

void TrackerConfig::validate() const {
  if (iou_gate < 0.0 || iou_gate > 1.0) throw std::invalid_argument("iou_gate must lie in [0, 1]");
  if (t_max < 1) throw std::invalid_argument("t_max must be >= 1");
  if (n_past < 2) throw std::invalid_argument("n_past must be >= 2");
}

std::vector<BBox> Track::window_boxes() const {
  std::vector<BBox> out;
  out.reserve(history.size());
  for (const auto& o : history) out.push_back(o.box);
  return out;
}

void KalmanMotionModel::on_spawn(Track& track) const { track.kalman = kf_init(track.last().box, noise_); }

void KalmanMotionModel::on_match(Track& track, const BBox& z) const {
  if (!track.kalman) {
    track.kalman = kf_init(z, noise_);
    return;
  }
  track.kalman = kf_update(*track.kalman, z, noise_);
}

BBox KalmanMotionModel::predict_next(Track& track) const {
  if (!track.kalman) track.kalman = kf_init(track.last().box, noise_);
  auto [next, box] = kf_predict(*track.kalman, noise_);
  track.kalman = next;
  return decode_offset(box, Offset4{});
}

Tracker::Tracker(TrackerConfig cfg, const MotionModel& model) : cfg_(cfg), model_(model) { cfg_.validate(); }

void Tracker::push_observation(Track& t, Observation obs) const {
  if (!t.history.empty() && obs.frame <= t.history.back().frame) {
    throw std::logic_error("track history frames must increase");
  }
  t.history.push_back(obs);
  while (t.history.size() > static_cast<std::size_t>(cfg_.n_past)) t.history.pop_front();
}

std::vector<FrameRecord> Tracker::step(int frame, std::span<const Detection> detections) {
  if (frame <= last_frame_) {
    throw std::invalid_argument("tracker frames must be strictly increasing: got " + std::to_string(frame) +
                                " after " + std::to_string(last_frame_));
  }
  last_frame_ = frame;

  std::vector<BBox> predicted, det_boxes;
  predicted.reserve(tracks_.size());
  for (const auto& t : tracks_) predicted.push_back(t.predicted);
  det_boxes.reserve(detections.size());
  for (const auto& d : detections) {
    if (!d.box.valid()) throw std::invalid_argument("detection with non-positive extent in frame " + std::to_string(frame));
    det_boxes.push_back(d.box);
  }

  const Eigen::MatrixXd cost = iou_cost_matrix(predicted, det_boxes);
  last_assignment_ = hungarian(cost, cfg_.iou_gate);

  std::set<int> seen_tracks, seen_dets;
  for (const auto& [ti, dj] : last_assignment_.matches) {
    if (!seen_tracks.insert(ti).second || !seen_dets.insert(dj).second) {
      throw std::logic_error("assignment produced a duplicate index");
    }
  }

  std::vector<FrameRecord> records;
  double matched_cost = 0.0;
  for (const auto& [ti, dj] : last_assignment_.matches) {
    Track& t = tracks_[ti];
    const BBox& z = detections[dj].box;
    matched_cost += cost(ti, dj);
    if (cfg_.rebirth == RebirthPolicy::Purge && t.state == TrackState::Lost) {
      std::erase_if(t.history, [](const Observation& o) { return o.pseudo; });
    }
    push_observation(t, Observation{frame, z, false});
    t.state = TrackState::Active;
    t.age = 0;
    model_.on_match(t, z);
    records.push_back(FrameRecord{frame, t.id, z});
  }
  for (int ti : last_assignment_.unmatched_rows) {
    Track& t = tracks_[ti];
    t.state = TrackState::Lost;
    ++t.age;
    push_observation(t, Observation{frame, t.predicted, true});
  }
  int spawned = 0;
  for (int dj : last_assignment_.unmatched_cols) {
    const Detection& d = detections[dj];
    if (d.confidence < cfg_.spawn_confidence) continue;
    Track t;
    t.id = next_id_++;
    push_observation(t, Observation{frame, d.box, false});
    model_.on_spawn(t);
    records.push_back(FrameRecord{frame, t.id, d.box});
    tracks_.push_back(std::move(t));
    ++spawned;
  }
  for (auto& t : tracks_) {
    if (t.state == TrackState::Lost && t.age >= cfg_.t_max) t.state = TrackState::Removed;
  }
  const auto removed = std::erase_if(tracks_, [](const Track& t) { return t.state == TrackState::Removed; });
  for (auto& t : tracks_) t.predicted = model_.predict_next(t);

  std::sort(records.begin(), records.end(),
            [](const FrameRecord& a, const FrameRecord& b) { return a.track_id < b.track_id; });

  if (diagnostics_) {
    const auto n_matches = last_assignment_.matches.size();
    *diagnostics_ << "{\"frame\":" << frame << ",\"detections\":" << detections.size()
                  << ",\"tracks\":" << predicted.size() << ",\"matches\":" << n_matches
                  << ",\"unmatched_tracks\":" << last_assignment_.unmatched_rows.size()
                  << ",\"unmatched_detections\":" << last_assignment_.unmatched_cols.size()
                  << ",\"spawned\":" << spawned << ",\"removed\":" << removed
                  << ",\"mean_match_cost\":" << format_number(n_matches ? matched_cost / n_matches : 0.0) << "}\n";
  }
  return records;
}

Scene run_tracker(const Scene& detections, const TrackerConfig& cfg, const MotionModel& model,
                  std::ostream* diagnostics) {
  Tracker tracker(cfg, model);
  tracker.set_diagnostics(diagnostics);
  Scene out;
  out.info = detections.info;
  const int last = std::max(detections.info.length, detections.last_frame());
  static const std::vector<Detection> kNone;
  for (int frame = 1; frame <= last; ++frame) {
    const auto it = detections.frames.find(frame);
    const auto& dets = it == detections.frames.end() ? kNone : it->second;
    for (const auto& r : tracker.step(frame, dets)) {
      out.frames[frame].push_back(Detection{r.box, 1.0, r.track_id});
    }
  }
  return out;
}

}  // namespace kinetrack
