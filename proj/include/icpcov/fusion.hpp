#pragma once

#include <Eigen/Core>
#include <deque>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "icpcov/liegroup.hpp"

namespace icpcov {

using Vector15d = Eigen::Matrix<double, 15, 1>;
using Matrix18d = Eigen::Matrix<double, 18, 18>;
using Vector18d = Eigen::Matrix<double, 18, 1>;

/// Error-state layout: [δθ, δp, δv, δa, δω, δω̇], rotation error on the right
/// (R_true = R Exp(δθ)); the rest additive.
namespace err {
constexpr int kTheta = 0;
constexpr int kP = 3;
constexpr int kV = 6;
constexpr int kA = 9;
constexpr int kW = 12;
constexpr int kWdot = 15;
}  // namespace err

struct FilterState {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  /// [p, v, a, ω, ω̇]; p, v, a in the world frame, ω, ω̇ in the body frame.
  Vector15d x = Vector15d::Zero();
  Matrix18d P = Matrix18d::Identity();

  Eigen::Vector3d p() const { return x.segment<3>(0); }
  Eigen::Vector3d v() const { return x.segment<3>(3); }
  Eigen::Vector3d a() const { return x.segment<3>(6); }
  Eigen::Vector3d w() const { return x.segment<3>(9); }
  Eigen::Vector3d wdot() const { return x.segment<3>(12); }
  Pose pose() const { return {R, p()}; }
};

struct ProcessNoise {
  double jerk_psd = 1.0;          // (m/s³)²/Hz
  double angular_jerk_psd = 0.5;  // (rad/s³)²/Hz
};

struct Measurement {
  Pose pose;
  /// Measurement noise on the world-frame twist, ordered (translation, rotation).
  Cov6 cov = Cov6::Identity();
};

struct TimedMeasurement {
  double time = 0.0;
  Pose pose;
  /// Sensor-frame covariance, ordered (translation, rotation).
  Cov6 cov_body = Cov6::Identity();
};

/// Nominal-state propagation only (no covariance).
FilterState propagate_nominal(const FilterState& s, double dt);
/// First-order Jacobian of propagate_nominal in error coordinates.
Matrix18d transition_jacobian(const FilterState& s, double dt);
/// White-jerk discretization for both the translational and rotational chains.
Matrix18d process_covariance(double dt, const ProcessNoise& q);

FilterState predict_step(const FilterState& s, double dt, const ProcessNoise& q);
FilterState update_step(const FilterState& s, const Measurement& m);

/// Ad_T cov Ad_Tᵀ.
Cov6 cov_to_world(const Cov6& cov_body, const Pose& T);

/// Elementwise mean of the last min(window, size) covariances.
Cov6 smooth_covariance(std::span<const Cov6> history, std::size_t window = 5);

struct FilterInit {
  FilterState state;
  double time = 0.0;
};

/// Initial state sitting at `pose` with zero rates and a broad prior.
FilterInit make_initial_state(const Pose& pose, double time, double pose_sigma = 1.0, double rate_sigma = 10.0);

/// Runs predict/smooth/transport/update per measurement and returns the
/// posterior pose after each step. Throws BadTimestamps unless times are
/// strictly increasing and not earlier than init.time.
std::vector<Pose> run_filter(std::span<const TimedMeasurement> measurements, const FilterInit& init,
                             const ProcessNoise& q = {}, std::size_t smoothing_window = 5);

/// KITTI pose format: 12 values per line, row-major 3x4, 17 significant digits.
void write_trajectory(std::ostream& os, std::span<const Pose> poses);
void write_trajectory(const std::string& path, std::span<const Pose> poses);

}  // namespace icpcov
