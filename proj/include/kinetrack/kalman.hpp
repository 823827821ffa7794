#pragma once

// Constant-velocity Kalman filter over (cx, cy, a, h) and their velocities,
// with process/measurement noise proportional to box height (SORT lineage).

#include "kinetrack/geometry.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <utility>

namespace kinetrack {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KalmanNoise {
  double position_weight = 1.0 / 20.0;
  double velocity_weight = 1.0 / 160.0;
  double aspect_process_std = 1e-2;
  double aspect_velocity_std = 1e-5;
  double aspect_measurement_std = 1e-1;
};

struct KalmanState {
  Eigen::Matrix<double, 8, 1> mean;
  Eigen::Matrix<double, 8, 8> covariance;

  BBox box() const;
};

KalmanState kf_init(const BBox& b, const KalmanNoise& noise = {});
std::pair<KalmanState, BBox> kf_predict(const KalmanState& s, const KalmanNoise& noise = {});
/// Throws NumericalError when the innovation covariance is not positive definite.
KalmanState kf_update(const KalmanState& s, const BBox& z, const KalmanNoise& noise = {});

inline BBox no_motion_predict(const BBox& last) { return last; }

}  // namespace kinetrack
