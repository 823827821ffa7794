#pragma once

// Online tracking-by-detection with motion-only association: every frame,
// predicted boxes of all retained tracks are matched to the detections by
// IoU with an optimal assignment; matched tracks take the detection, the
// rest go (or stay) lost, unmatched confident detections open new tracks,
// long-lost tracks are removed, and every survivor predicts its next box.

#include "kinetrack/assignment.hpp"
#include "kinetrack/kalman.hpp"
#include "kinetrack/predictor.hpp"
#include "kinetrack/scene.hpp"

#include <deque>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace kinetrack {

enum class TrackState { Active, Lost, Removed };

/// What happens to pseudo-observations when a lost track is re-matched.
enum class RebirthPolicy { Keep, Purge };

std::string to_string(RebirthPolicy p);
RebirthPolicy rebirth_policy_from_string(const std::string& s);

struct TrackerConfig {
  double iou_gate = 0.3;
  int t_max = 30;
  double spawn_confidence = 0.6;
  int n_past = 10;
  RebirthPolicy rebirth = RebirthPolicy::Keep;

  void validate() const;
  friend bool operator==(const TrackerConfig&, const TrackerConfig&) = default;
};

struct Observation {
  int frame = 0;
  BBox box;
  bool pseudo = false;
};

struct Track {
  int id = 0;
  std::deque<Observation> history;  // oldest first, at most n_past entries
  TrackState state = TrackState::Active;
  int age = 0;  // consecutive frames without a match
  BBox predicted;
  std::optional<KalmanState> kalman;

  const Observation& last() const { return history.back(); }
  /// The boxes of the (at most n_past) most recent observations.
  std::vector<BBox> window_boxes() const;
};

/// Per-track motion model used for prediction.
class MotionModel {
 public:
  virtual ~MotionModel() = default;
  virtual std::string name() const = 0;
  /// Called once when a track is spawned from a detection.
  virtual void on_spawn(Track&) const {}
  /// Called when a track is matched to detection `z` (already appended).
  virtual void on_match(Track&, const BBox&) const {}
  /// Box for the next frame. May advance per-track state.
  virtual BBox predict_next(Track& track) const = 0;
};

class NoMotionModel final : public MotionModel {
 public:
  std::string name() const override { return "none"; }
  BBox predict_next(Track& track) const override { return no_motion_predict(track.last().box); }
};

class KalmanMotionModel final : public MotionModel {
 public:
  explicit KalmanMotionModel(KalmanNoise noise = {}) : noise_(noise) {}
  std::string name() const override { return "kalman"; }
  void on_spawn(Track& track) const override;
  void on_match(Track& track, const BBox& z) const override;
  BBox predict_next(Track& track) const override;

 private:
  KalmanNoise noise_;
};

/// Learned predictor over the track's window; a single observation falls
/// back to no motion.
template <typename Scalar>
BBox predict_for_track(const Track& track, const Predictor<Scalar>& predictor, DecodeStats* stats = nullptr) {
  const auto boxes = track.window_boxes();
  if (boxes.size() < 2) return no_motion_predict(boxes.back());
  const TrajectoryWindow window(boxes);
  return decode_offset(window.base_box(), predictor.predict_offset(window), stats);
}

template <typename Scalar>
class LearnedMotionModel final : public MotionModel {
 public:
  explicit LearnedMotionModel(const Predictor<Scalar>& predictor) : predictor_(predictor) {}
  std::string name() const override { return "learned"; }
  BBox predict_next(Track& track) const override { return predict_for_track(track, predictor_, &stats_); }
  const DecodeStats& decode_stats() const { return stats_; }

 private:
  const Predictor<Scalar>& predictor_;
  mutable DecodeStats stats_;
};

struct FrameRecord {
  int frame = 0;
  int track_id = 0;
  BBox box;
};

class Tracker {
 public:
  Tracker(TrackerConfig cfg, const MotionModel& model);

  /// Processes the detections of `frame`. Returns the tracks matched or born
  /// in this frame with their detection boxes, ordered by id. Frames must be
  /// strictly increasing.
  std::vector<FrameRecord> step(int frame, std::span<const Detection> detections);

  const std::vector<Track>& tracks() const { return tracks_; }
  const AssignmentResult& last_assignment() const { return last_assignment_; }
  int next_id() const { return next_id_; }

  /// JSON-lines diagnostics, one object per frame.
  void set_diagnostics(std::ostream* out) { diagnostics_ = out; }

 private:
  void push_observation(Track& t, Observation obs) const;

  TrackerConfig cfg_;
  const MotionModel& model_;
  std::vector<Track> tracks_;
  AssignmentResult last_assignment_;
  int next_id_ = 1;
  int last_frame_ = 0;
  std::ostream* diagnostics_ = nullptr;
};

/// Runs the tracker over frames 1..max(info.length, last detection frame).
Scene run_tracker(const Scene& detections, const TrackerConfig& cfg, const MotionModel& model,
                  std::ostream* diagnostics = nullptr);

}  // namespace kinetrack
