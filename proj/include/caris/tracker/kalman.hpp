#pragma once

#include <utility>

#include <Eigen/Core>
#include <Eigen/Cholesky>

#include "caris/error.hpp"

namespace caris::tracker {

CARIS_DEFINE_ERROR(SingularInnovation, Error);

using StateVector = Eigen::Matrix<double, 8, 1>;
using StateCovariance = Eigen::Matrix<double, 8, 8>;
using Measurement = Eigen::Vector4d;
using MeasurementCovariance = Eigen::Matrix4d;

/// Constant-velocity box filter over (cx, cy, aspect, h) and their rates.
/// Noise follows the usual DeepSORT convention: position and velocity
/// deviations proportional to box height, aspect noise fixed.
struct KalmanParams {
  double std_weight_position = 1.0 / 20;
  double std_weight_velocity = 1.0 / 160;
  double measurement_scale = 1.0;  // multiplies R
};

struct Gaussian {
  StateVector mean;
  StateCovariance covariance;
};

class KalmanFilter {
 public:
  explicit KalmanFilter(KalmanParams params = {}) : params_(params) {}

  const KalmanParams& params() const { return params_; }

  Gaussian initiate(const Measurement& z) const;

  /// Process noise for one unit of time at box height `h`.
  StateCovariance process_noise(double h) const;
  MeasurementCovariance measurement_noise(double h) const;

  /// x <- F x, P <- F P F^T + dt Q. Requires dt > 0.
  Gaussian predict(const Gaussian& g, double dt) const;

  /// Innovation distribution (H x, H P H^T + R).
  std::pair<Measurement, MeasurementCovariance> project(const Gaussian& g) const;

  /// Standard update; throws SingularInnovation if H P H^T + R is not
  /// positive definite.
  Gaussian update(const Gaussian& g, const Measurement& z) const;

  /// Squared Mahalanobis distance of `z` from the projected state.
  double gating_distance(const Gaussian& g, const Measurement& z) const;

 private:
  KalmanParams params_;
};

/// 0.95 quantile of chi-square with 4 degrees of freedom.
inline constexpr double kChi2Gate4 = 9.4877;

}  // namespace caris::tracker
