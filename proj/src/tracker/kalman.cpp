#include "caris/tracker/kalman.hpp"

#include <cmath>
#include <stdexcept>

namespace caris::tracker {

namespace {

Eigen::Matrix<double, 4, 8> observation() {
  Eigen::Matrix<double, 4, 8> h = Eigen::Matrix<double, 4, 8>::Zero();
  h.leftCols<4>().setIdentity();
  return h;
}

}  // namespace

Gaussian KalmanFilter::initiate(const Measurement& z) const {
  Gaussian g;
  g.mean << z, Eigen::Vector4d::Zero();
  const double h = z(3);
  const double p = params_.std_weight_position * h;
  const double v = params_.std_weight_velocity * h;
  StateVector std_dev;
  std_dev << 2 * p, 2 * p, 1e-2, 2 * p, 10 * v, 10 * v, 1e-5, 10 * v;
  g.covariance = std_dev.array().square().matrix().asDiagonal();
  return g;
}

StateCovariance KalmanFilter::process_noise(double h) const {
  const double p = params_.std_weight_position * h;
  const double v = params_.std_weight_velocity * h;
  StateVector std_dev;
  std_dev << p, p, 1e-2, p, v, v, 1e-5, v;
  return std_dev.array().square().matrix().asDiagonal();
}

MeasurementCovariance KalmanFilter::measurement_noise(double h) const {
  const double p = params_.std_weight_position * h;
  const Eigen::Vector4d std_dev(p, p, 1e-1, p);
  return (params_.measurement_scale * std_dev.array().square()).matrix().asDiagonal();
}

Gaussian KalmanFilter::predict(const Gaussian& g, double dt) const {
  if (!(dt > 0.0)) throw std::invalid_argument("predict: dt must be positive");
  StateCovariance f = StateCovariance::Identity();
  f.topRightCorner<4, 4>().diagonal().setConstant(dt);
  Gaussian out;
  out.mean = f * g.mean;
  out.covariance = f * g.covariance * f.transpose() + dt * process_noise(g.mean(3));
  out.covariance = (0.5 * (out.covariance + out.covariance.transpose())).eval();
  return out;
}

std::pair<Measurement, MeasurementCovariance> KalmanFilter::project(const Gaussian& g) const {
  const auto h = observation();
  MeasurementCovariance s = h * g.covariance * h.transpose() + measurement_noise(g.mean(3));
  return {h * g.mean, 0.5 * (s + s.transpose())};
}

Gaussian KalmanFilter::update(const Gaussian& g, const Measurement& z) const {
  const auto h = observation();
  const auto [predicted, s] = project(g);
  const Eigen::LLT<MeasurementCovariance> llt(s);
  if (llt.info() != Eigen::Success || !s.allFinite()) throw SingularInnovation("innovation covariance not positive definite");
  // K = P H^T S^-1, computed as (S^-1 H P)^T since S and P are symmetric.
  const Eigen::Matrix<double, 8, 4> gain = llt.solve(h * g.covariance).transpose();
  Gaussian out;
  out.mean = g.mean + gain * (z - predicted);
  out.covariance = (StateCovariance::Identity() - gain * h) * g.covariance;
  out.covariance = (0.5 * (out.covariance + out.covariance.transpose())).eval();
  return out;
}

double KalmanFilter::gating_distance(const Gaussian& g, const Measurement& z) const {
  const auto [predicted, s] = project(g);
  const Eigen::LLT<MeasurementCovariance> llt(s);
  if (llt.info() != Eigen::Success) throw SingularInnovation("innovation covariance not positive definite");
  const Measurement d = z - predicted;
  return d.dot(llt.solve(d));
}

}  // namespace caris::tracker
