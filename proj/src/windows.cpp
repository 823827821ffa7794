#include "kinetrack/windows.hpp"

#include "kinetrack/assignment.hpp"

#include <algorithm>
#include <cmath>

namespace kinetrack {

std::vector<TrainingSample> extract_windows(const Scene& scene, int n_past) {
  std::vector<TrainingSample> out;
  for (const auto& [id, obs] : scene.trajectories()) {
    for (std::size_t k = 1; k + 1 < obs.size(); ++k) {
      if (obs[k + 1].first != obs[k].first + 1) continue;
      const std::size_t first = k + 1 > static_cast<std::size_t>(n_past) ? k + 1 - n_past : 0;
      std::vector<BBox> boxes;
      for (std::size_t i = first; i <= k; ++i) boxes.push_back(obs[i].second);
      TrainingSample s;
      s.window = TrajectoryWindow(std::move(boxes));
      s.next_box = obs[k + 1].second;
      s.target = encode_offset(s.window.base_box(), s.next_box);
      out.push_back(std::move(s));
    }
  }
  return out;
}

TrainingSample augment(const TrainingSample& sample, const AugmentPolicy& policy, std::mt19937_64& rng) {
  std::vector<BBox> boxes = sample.window.boxes();

  if (policy.drop && policy.drop_prob > 0.0 && boxes.size() > 2) {
    std::bernoulli_distribution drop(policy.drop_prob);
    std::vector<char> keep(boxes.size(), 1);
    for (std::size_t i = 0; i + 1 < boxes.size(); ++i) keep[i] = drop(rng) ? 0 : 1;
    const auto survivors = std::count(keep.begin(), keep.end(), 1);
    if (survivors < 2) keep[boxes.size() - 2] = 1;
    std::vector<BBox> kept;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (keep[i]) kept.push_back(boxes[i]);
    }
    boxes = std::move(kept);
  }

  if (policy.random_length && boxes.size() > 2) {
    std::uniform_int_distribution<std::size_t> len(2, boxes.size());
    const std::size_t n = len(rng);
    boxes.erase(boxes.begin(), boxes.end() - static_cast<std::ptrdiff_t>(n));
  }

  if (policy.jitter && policy.jitter_scale > 0.0) {
    std::uniform_real_distribution<double> u(-policy.jitter_scale, policy.jitter_scale);
    for (auto& b : boxes) {
      const double dx = u(rng), dy = u(rng), dw = u(rng), dh = u(rng);
      b.cx += dx * b.w;
      b.cy += dy * b.h;
      b.w *= std::exp(dw);
      b.h *= std::exp(dh);
    }
  }

  TrainingSample out;
  out.window = TrajectoryWindow(std::move(boxes));
  out.next_box = sample.next_box;
  out.target = encode_offset(out.window.base_box(), out.next_box);
  return out;
}

Scene detections_with_gt_ids(const Scene& gt, const Scene& det, double iou_min) {
  Scene out;
  out.info = gt.info;
  for (const auto& [frame, gts] : gt.frames) {
    const auto it = det.frames.find(frame);
    if (it == det.frames.end() || gts.empty() || it->second.empty()) continue;
    std::vector<BBox> gb, db;
    for (const auto& g : gts) gb.push_back(g.box);
    for (const auto& d : it->second) db.push_back(d.box);
    const auto result = hungarian(iou_cost_matrix(gb, db), iou_min);
    for (const auto& [gi, dj] : result.matches) {
      Detection d = it->second[dj];
      d.id = gts[gi].id;
      out.frames[frame].push_back(d);
    }
  }
  return out;
}

}  // namespace kinetrack
