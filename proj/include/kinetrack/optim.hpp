#pragma once

#include "kinetrack/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace kinetrack {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Warmup-then-inverse-sqrt learning rate:
///   lr(step) = scale * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)
struct WarmupSchedule {
  int d_model = 64;
  int warmup = 4000;
  double scale = 1.0;

  double operator()(long step) const {
    if (step < 1) throw std::invalid_argument("WarmupSchedule: step must be >= 1");
    const double s = static_cast<double>(step);
    return scale / std::sqrt(static_cast<double>(d_model)) *
           std::min(1.0 / std::sqrt(s), s * std::pow(static_cast<double>(warmup), -1.5));
  }
};

template <typename Scalar>
struct AdamMoments {
  Matrix<Scalar> m;
  Matrix<Scalar> v;
};

/// In-place Adam update with bias correction. `step` is 1-based.
template <typename Scalar>
void adam_step(Parameter<Scalar>& p, AdamMoments<Scalar>& state, long step, double lr,
               const AdamConfig& cfg) {
  if (step < 1) throw std::invalid_argument("adam_step: step must be >= 1");
  if (state.m.size() == 0) {
    state.m = Matrix<Scalar>::Zero(p.value.rows(), p.value.cols());
    state.v = Matrix<Scalar>::Zero(p.value.rows(), p.value.cols());
  }
  const Scalar b1 = Scalar(cfg.beta1), b2 = Scalar(cfg.beta2);
  state.m = b1 * state.m + (Scalar(1) - b1) * p.grad;
  state.v = b2 * state.v + (Scalar(1) - b2) * p.grad.cwiseProduct(p.grad);
  const Scalar c1 = Scalar(1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(step))));
  const Scalar c2 = Scalar(1.0 / (1.0 - std::pow(cfg.beta2, static_cast<double>(step))));
  const Scalar eps = Scalar(cfg.eps);
  const Scalar rate = Scalar(lr);
  p.value.array() -= rate * (state.m.array() * c1) / ((state.v.array() * c2).sqrt() + eps);
}

template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update to every trainable parameter and advances the step.
  void step(const std::vector<Parameter<Scalar>*>& params, double lr) {
    if (state_.size() != params.size()) state_.assign(params.size(), {});
    ++step_;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i]->trainable) adam_step(*params[i], state_[i], step_, lr, cfg_);
    }
  }

  long steps_taken() const { return step_; }

 private:
  AdamConfig cfg_;
  std::vector<AdamMoments<Scalar>> state_;
  long step_ = 0;
};

}  // namespace kinetrack
