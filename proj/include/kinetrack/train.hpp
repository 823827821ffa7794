#pragma once

#include "kinetrack/optim.hpp"
#include "kinetrack/predictor.hpp"
#include "kinetrack/windows.hpp"

#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

namespace kinetrack {

struct TrainConfig {
  long steps = 3000;
  int batch_size = 64;
  int warmup = 400;
  double lr_scale = 1.0;
  AdamConfig adam;
  long log_every = 1;
  long checkpoint_every = 0;  // 0 disables periodic checkpoints

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainStats {
  std::vector<double> batch_losses;  // loss of the batch each update was computed from
};

template <typename Scalar>
struct TrainHooks {
  std::ostream* log = nullptr;  // JSON lines: {"step":..,"loss":..,"lr":..}
  std::function<void(long, const Predictor<Scalar>&)> on_checkpoint;
};

/// Mean smooth-L1 over the samples, without augmentation.
template <typename Scalar>
double dataset_loss(const Predictor<Scalar>& model, const std::vector<TrainingSample>& samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : samples) {
    const Offset4 p = model.predict_offset(s.window);
    total += smooth_l1(p.d_cx - s.target.d_cx) + smooth_l1(p.d_cy - s.target.d_cy) +
             smooth_l1(p.d_w - s.target.d_w) + smooth_l1(p.d_h - s.target.d_h);
  }
  return total / static_cast<double>(samples.size());
}

template <typename Scalar>
Matrix<Scalar> target_matrix(const std::vector<TrainingSample>& batch) {
  Matrix<Scalar> t(static_cast<Eigen::Index>(batch.size()), 4);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& o = batch[i].target;
    t.row(static_cast<Eigen::Index>(i)) << Scalar(o.d_cx), Scalar(o.d_cy), Scalar(o.d_w), Scalar(o.d_h);
  }
  return t;
}

/// Records the batch loss on `tape` and returns it; gradients are not run.
template <typename Scalar>
Var<Scalar> batch_loss(Tape<Scalar>& tape, const Predictor<Scalar>& model, const std::vector<TrainingSample>& batch,
                       std::mt19937_64* dropout_rng = nullptr) {
  std::vector<Var<Scalar>> preds;
  preds.reserve(batch.size());
  for (const auto& s : batch) preds.push_back(model.forward(tape, s.window, dropout_rng));
  return smooth_l1_loss(concat_rows(preds), target_matrix<Scalar>(batch));
}

/// Adam with the warmup schedule over uniformly drawn, freshly augmented
/// batches. Deterministic for a given seed.
template <typename Scalar>
TrainStats train_predictor(Predictor<Scalar>& model, const std::vector<TrainingSample>& samples,
                           const TrainConfig& cfg, const AugmentPolicy& policy, std::uint64_t seed,
                           const TrainHooks<Scalar>& hooks = {}) {
  if (samples.empty()) throw std::invalid_argument("train_predictor: no training samples");
  if (cfg.batch_size < 1 || cfg.warmup < 1) throw std::invalid_argument("train_predictor: bad batch size or warmup");
  std::mt19937_64 rng(seed);
  std::mt19937_64 dropout_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  const WarmupSchedule schedule{model.config().d_model, cfg.warmup, cfg.lr_scale};
  Adam<Scalar> adam(cfg.adam);
  auto params = model.parameters();
  TrainStats stats;
  stats.batch_losses.reserve(static_cast<std::size_t>(cfg.steps));
  std::vector<TrainingSample> batch(static_cast<std::size_t>(cfg.batch_size));
  for (long step = 1; step <= cfg.steps; ++step) {
    for (auto& b : batch) b = augment(samples[pick(rng)], policy, rng);
    model.zero_grad();
    Tape<Scalar> tape;
    const auto loss = batch_loss(tape, model, batch, model.config().dropout > 0 ? &dropout_rng : nullptr);
    tape.backward(loss);
    const double lr = schedule(step);
    adam.step(params, lr);
    const double value = static_cast<double>(loss.value()(0, 0));
    stats.batch_losses.push_back(value);
    if (hooks.log && cfg.log_every > 0 && (step % cfg.log_every == 0 || step == cfg.steps)) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "{\"step\":%ld,\"loss\":%.9g,\"lr\":%.9g}\n", step, value, lr);
      *hooks.log << buf;
    }
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      hooks.on_checkpoint(step, model);
    }
  }
  return stats;
}

}  // namespace kinetrack
