#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <random>

namespace icpcov {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// se(3) element, ordered (u, w): translation first, axis-angle rotation second.
using Twist = Vector6d;

/// Covariance on the se(3) tangent, block order matching Twist.
using Cov6 = Matrix6d;

/// Rigid transform x -> R x + t.
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }

  Eigen::Matrix4d matrix() const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return R * p + t; }

  /// Checks RᵀR = I and det(R) = 1 within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);
inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

Eigen::Matrix3d skew(const Eigen::Vector3d& v);
Eigen::Vector3d vee(const Eigen::Matrix3d& m);

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w);
/// Rotation vector of R. Throws AngleNearPi when the angle is within 1e-6 of π.
Eigen::Vector3d log_so3(const Eigen::Matrix3d& R);
/// Right Jacobian of SO(3): Exp(w + d) ≈ Exp(w) Exp(Jr(w) d).
Eigen::Matrix3d right_jacobian_so3(const Eigen::Vector3d& w);

Pose exp_se3(const Twist& xi);
Twist log_se3(const Pose& T);

/// Ad_T for twists ordered (u, w): [[R, [t]x R], [0, R]].
Matrix6d adjoint(const Pose& T);

Pose rotation_z(double angle);

/// Zero-mean Gaussian twist with covariance `cov` using the Cholesky factor of
/// cov + 1e-12 I. Throws NotPSD when the factorization fails.
Twist sample_twist(const Cov6& cov, std::mt19937_64& rng);

/// Row-major 3x4 [R | t].
std::array<double, 12> to_row12(const Pose& T);
Pose from_row12(const std::array<double, 12>& v);

/// Row-major lower triangle: (0,0), (1,0), (1,1), (2,0), ...
std::array<double, 21> to_lower21(const Cov6& M);
Cov6 from_lower21(const std::array<double, 21>& v);

/// Stateless 64-bit mixing (splitmix64 finalizer) used to derive per-task seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

}  // namespace icpcov
