#include "icpcov/fusion.hpp"

#include <Eigen/Cholesky>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "icpcov/error.hpp"

namespace icpcov {

namespace {

using Block3 = Eigen::Matrix3d;

// Per-axis covariance of a triple (x, ẋ, ẍ) driven by white jerk of unit PSD.
Eigen::Matrix3d white_jerk_block(double dt) {
  const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt, dt5 = dt4 * dt;
  Eigen::Matrix3d Q;
  Q << dt5 / 20.0, dt4 / 8.0, dt3 / 6.0,
       dt4 / 8.0, dt3 / 3.0, dt2 / 2.0,
       dt3 / 6.0, dt2 / 2.0, dt;
  return Q;
}

}  // namespace

FilterState propagate_nominal(const FilterState& s, double dt) {
  FilterState out = s;
  const Eigen::Vector3d p = s.p(), v = s.v(), a = s.a(), w = s.w(), wdot = s.wdot();
  out.x.segment<3>(0) = p + v * dt + 0.5 * a * dt * dt;
  out.x.segment<3>(3) = v + a * dt;
  out.x.segment<3>(9) = w + wdot * dt;
  out.R = s.R * exp_so3(w * dt + 0.5 * wdot * dt * dt);
  return out;
}

Matrix18d transition_jacobian(const FilterState& s, double dt) {
  const Eigen::Vector3d phi = s.w() * dt + 0.5 * s.wdot() * dt * dt;
  const Block3 I = Block3::Identity();
  const Block3 Jr = right_jacobian_so3(phi);
  Matrix18d F = Matrix18d::Identity();
  F.block<3, 3>(err::kTheta, err::kTheta) = exp_so3(phi).transpose();
  F.block<3, 3>(err::kTheta, err::kW) = Jr * dt;
  F.block<3, 3>(err::kTheta, err::kWdot) = Jr * (0.5 * dt * dt);
  F.block<3, 3>(err::kP, err::kV) = I * dt;
  F.block<3, 3>(err::kP, err::kA) = I * (0.5 * dt * dt);
  F.block<3, 3>(err::kV, err::kA) = I * dt;
  F.block<3, 3>(err::kW, err::kWdot) = I * dt;
  return F;
}

Matrix18d process_covariance(double dt, const ProcessNoise& q) {
  const Eigen::Matrix3d B = white_jerk_block(dt);
  const std::array<int, 3> lin{err::kP, err::kV, err::kA};
  const std::array<int, 3> ang{err::kTheta, err::kW, err::kWdot};
  Matrix18d Q = Matrix18d::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Q.block<3, 3>(lin[i], lin[j]) = q.jerk_psd * B(i, j) * Block3::Identity();
      Q.block<3, 3>(ang[i], ang[j]) = q.angular_jerk_psd * B(i, j) * Block3::Identity();
    }
  }
  return Q;
}

FilterState predict_step(const FilterState& s, double dt, const ProcessNoise& q) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "predict_step needs dt > 0");
  const Matrix18d F = transition_jacobian(s, dt);
  FilterState out = propagate_nominal(s, dt);
  out.P = F * s.P * F.transpose() + process_covariance(dt, q);
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  return out;
}

FilterState update_step(const FilterState& s, const Measurement& m) {
  const Eigen::Vector3d p = s.p();
  Vector6d r;
  r.head<3>() = log_so3(s.R.transpose() * m.pose.R);
  r.tail<3>() = m.pose.t - p;

  // World twist (u, w) -> residual coordinates (δθ body, δp world) around the prior.
  Matrix6d M = Matrix6d::Zero();
  M.block<3, 3>(0, 3) = s.R.transpose();
  M.block<3, 3>(3, 0) = Block3::Identity();
  M.block<3, 3>(3, 3) = -skew(p);
  Matrix6d Rm = M * m.cov * M.transpose();
  Rm = 0.5 * (Rm + Rm.transpose()).eval();
  Rm.diagonal().array() += 1e-10;

  Eigen::Matrix<double, 6, 18> H = Eigen::Matrix<double, 6, 18>::Zero();
  H.block<3, 3>(0, err::kTheta) = Block3::Identity();
  H.block<3, 3>(3, err::kP) = Block3::Identity();

  const Eigen::Matrix<double, 18, 6> PHt = s.P * H.transpose();
  const Matrix6d S = H * PHt + Rm;
  Eigen::LDLT<Matrix6d> ldlt(S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error(ErrorCode::NumericalFailure, "innovation covariance is not positive definite");
  }
  const Eigen::Matrix<double, 18, 6> K = ldlt.solve(PHt.transpose()).transpose();
  if (!K.allFinite()) throw Error(ErrorCode::NumericalFailure, "non-finite Kalman gain");

  const Vector18d dx = K * r;
  FilterState out = s;
  out.R = s.R * exp_so3(dx.segment<3>(err::kTheta));
  out.x += dx.tail<15>();
  const Matrix18d IKH = Matrix18d::Identity() - K * H;
  out.P = IKH * s.P * IKH.transpose() + K * Rm * K.transpose();
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  return out;
}

Cov6 cov_to_world(const Cov6& cov_body, const Pose& T) {
  const Matrix6d Ad = adjoint(T);
  return Ad * cov_body * Ad.transpose();
}

Cov6 smooth_covariance(std::span<const Cov6> history, std::size_t window) {
  if (history.empty()) throw Error(ErrorCode::EmptyInput, "covariance history is empty");
  const std::size_t n = std::min(std::max<std::size_t>(window, 1), history.size());
  Cov6 sum = Cov6::Zero();
  for (std::size_t i = history.size() - n; i < history.size(); ++i) sum += history[i];
  return sum / static_cast<double>(n);
}

FilterInit make_initial_state(const Pose& pose, double time, double pose_sigma, double rate_sigma) {
  FilterInit init;
  init.time = time;
  init.state.R = pose.R;
  init.state.x.segment<3>(0) = pose.t;
  Vector18d var = Vector18d::Constant(rate_sigma * rate_sigma);
  var.segment<3>(err::kTheta).setConstant(pose_sigma * pose_sigma);
  var.segment<3>(err::kP).setConstant(pose_sigma * pose_sigma);
  init.state.P = var.asDiagonal();
  return init;
}

std::vector<Pose> run_filter(std::span<const TimedMeasurement> measurements, const FilterInit& init,
                             const ProcessNoise& q, std::size_t smoothing_window) {
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const double prev = i == 0 ? init.time : measurements[i - 1].time;
    const bool ok = i == 0 ? measurements[i].time >= prev : measurements[i].time > prev;
    if (!ok || !std::isfinite(measurements[i].time)) {
      throw Error(ErrorCode::BadTimestamps, "timestamps must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
  std::vector<Pose> trajectory;
  trajectory.reserve(measurements.size());
  std::deque<Cov6> history;
  FilterState state = init.state;
  double t = init.time;
  for (const auto& m : measurements) {
    if (m.time > t) state = predict_step(state, m.time - t, q);
    t = m.time;
    history.push_back(m.cov_body);
    if (history.size() > smoothing_window) history.pop_front();
    const std::vector<Cov6> window(history.begin(), history.end());
    const Cov6 smoothed = smooth_covariance(window, smoothing_window);
    state = update_step(state, {m.pose, cov_to_world(smoothed, state.pose())});
    trajectory.push_back(state.pose());
  }
  return trajectory;
}

void write_trajectory(std::ostream& os, std::span<const Pose> poses) {
  os << std::setprecision(17);
  for (const auto& T : poses) {
    const auto v = to_row12(T);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
    os << '\n';
  }
}

void write_trajectory(const std::string& path, std::span<const Pose> poses) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  write_trajectory(os, poses);
}

}  // namespace icpcov
