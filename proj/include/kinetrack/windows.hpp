#pragma once

#include "kinetrack/predictor.hpp"
#include "kinetrack/scene.hpp"

#include <random>
#include <vector>

namespace kinetrack {

struct TrainingSample {
  TrajectoryWindow window;
  Offset4 target;  // encode_offset(window.base_box(), next_box)
  BBox next_box;
};

/// For every identity and every observation with at least one predecessor,
/// emits the window of the last <= n_past observations and the offset to the
/// following observation. Samples whose following observation is not in the
/// immediately next frame are skipped.
std::vector<TrainingSample> extract_windows(const Scene& scene, int n_past);

struct AugmentPolicy {
  bool drop = true;
  double drop_prob = 0.1;
  bool jitter = true;
  double jitter_scale = 0.05;
  bool random_length = false;

  friend bool operator==(const AugmentPolicy&, const AugmentPolicy&) = default;
};

/// Random drop, then random length, then spatial jitter. The final
/// observation is never dropped and at least two observations survive.
TrainingSample augment(const TrainingSample& sample, const AugmentPolicy& policy, std::mt19937_64& rng);

/// Replaces each gt box with the detection matched to it (IoU >= iou_min,
/// optimal per frame); unmatched gt boxes are removed. Used to train on
/// detector-quality boxes.
Scene detections_with_gt_ids(const Scene& gt, const Scene& det, double iou_min = 0.5);

}  // namespace kinetrack
