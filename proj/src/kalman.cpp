#include "kinetrack/kalman.hpp"

#include <Eigen/Cholesky>

#include <sstream>

namespace kinetrack {
namespace {

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Mat48 = Eigen::Matrix<double, 4, 8>;

Mat8 transition() {
  Mat8 f = Mat8::Identity();
  f.topRightCorner<4, 4>() = Mat4::Identity();
  return f;
}

Mat48 observation() { return Mat48::Identity(); }

}  // namespace

BBox KalmanState::box() const {
  const double h = mean(3);
  return BBox{mean(0), mean(1), mean(2) * h, h};
}

KalmanState kf_init(const BBox& b, const KalmanNoise& noise) {
  KalmanState s;
  s.mean << b.cx, b.cy, b.aspect(), b.h, 0, 0, 0, 0;
  const double pos = 2.0 * noise.position_weight * b.h;
  const double vel = 10.0 * noise.velocity_weight * b.h;
  Vec8 std;
  std << pos, pos, 1e-2, pos, vel, vel, noise.aspect_velocity_std, vel;
  s.covariance = std.array().square().matrix().asDiagonal();
  return s;
}

std::pair<KalmanState, BBox> kf_predict(const KalmanState& s, const KalmanNoise& noise) {
  const double h = s.mean(3);
  const double pos = noise.position_weight * h;
  const double vel = noise.velocity_weight * h;
  Vec8 std;
  std << pos, pos, noise.aspect_process_std, pos, vel, vel, noise.aspect_velocity_std, vel;
  const Mat8 f = transition();
  KalmanState out;
  out.mean = f * s.mean;
  out.covariance = f * s.covariance * f.transpose();
  out.covariance.diagonal() += std.array().square().matrix();
  return {out, out.box()};
}

KalmanState kf_update(const KalmanState& s, const BBox& z, const KalmanNoise& noise) {
  const double h = s.mean(3);
  const double pos = noise.position_weight * h;
  Vec4 r;
  r << pos, pos, noise.aspect_measurement_std, pos;
  const Mat48 obs = observation();
  Mat4 innovation_cov = obs * s.covariance * obs.transpose();
  innovation_cov.diagonal() += r.array().square().matrix();
  const Eigen::LLT<Mat4> llt(innovation_cov);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "kf_update: innovation covariance is not positive definite; diag = ["
        << innovation_cov.diagonal().transpose() << "], state h = " << h;
    throw NumericalError(msg.str());
  }
  // K = P H^T S^-1, computed as (S^-1 H P)^T since S and P are symmetric.
  const Eigen::Matrix<double, 8, 4> gain = llt.solve(obs * s.covariance).transpose();
  Vec4 measured;
  measured << z.cx, z.cy, z.aspect(), z.h;
  KalmanState out;
  out.mean = s.mean + gain * (measured - obs * s.mean);
  out.covariance = s.covariance - gain * innovation_cov * gain.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

}  // namespace kinetrack
