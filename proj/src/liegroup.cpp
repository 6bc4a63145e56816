#include "icpcov/liegroup.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "icpcov/error.hpp"

namespace icpcov {

namespace {

constexpr double kSmallAngle = 1e-8;
constexpr double kNearPiMargin = 1e-6;

}  // namespace

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d M = Eigen::Matrix4d::Identity();
  M.topLeftCorner<3, 3>() = R;
  M.topRightCorner<3, 1>() = t;
  return M;
}

bool Pose::is_valid(double tol) const {
  if (!R.allFinite() || !t.allFinite()) return false;
  const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).norm();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

Pose compose(const Pose& a, const Pose& b) { return {a.R * b.R, a.R * b.t + a.t}; }

Pose inverse(const Pose& a) {
  Eigen::Matrix3d Rt = a.R.transpose();
  return {Rt, -(Rt * a.t)};
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d M;
  M << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return M;
}

Eigen::Vector3d vee(const Eigen::Matrix3d& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  const Eigen::Matrix3d K = skew(w);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + K + 0.5 * K * K;
  }
  const double half = 0.5 * theta;
  const double a = std::sin(theta) / theta;
  const double b = 2.0 * std::sin(half) * std::sin(half) / (theta * theta);  // (1 - cos)/θ²
  return Eigen::Matrix3d::Identity() + a * K + b * K * K;
}

Eigen::Vector3d log_so3(const Eigen::Matrix3d& R) {
  const Eigen::Vector3d axis2 = vee(R - R.transpose());  // 2 sin(θ) n
  const double s = 0.5 * axis2.norm();
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);
  if (theta >= std::numbers::pi - kNearPiMargin) {
    throw Error(ErrorCode::AngleNearPi, "rotation angle " + std::to_string(theta) + " too close to pi");
  }
  if (theta < kSmallAngle) return 0.5 * axis2;
  return (theta / (2.0 * s)) * axis2;
}

Eigen::Matrix3d right_jacobian_so3(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  const Eigen::Matrix3d K = skew(w);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() - 0.5 * K + K * K / 6.0;
  }
  const double half = 0.5 * theta;
  const double b = 2.0 * std::sin(half) * std::sin(half) / (theta * theta);
  const double c = (theta - std::sin(theta)) / (theta * theta * theta);
  return Eigen::Matrix3d::Identity() - b * K + c * K * K;
}

Pose exp_se3(const Twist& xi) {
  const Eigen::Vector3d u = xi.head<3>();
  const Eigen::Vector3d w = xi.tail<3>();
  const double theta = w.norm();
  const Eigen::Matrix3d K = skew(w);
  Eigen::Matrix3d V;
  if (theta < kSmallAngle) {
    V = Eigen::Matrix3d::Identity() + 0.5 * K + K * K / 6.0;
  } else {
    const double half = 0.5 * theta;
    const double b = 2.0 * std::sin(half) * std::sin(half) / (theta * theta);
    const double c = (theta - std::sin(theta)) / (theta * theta * theta);
    V = Eigen::Matrix3d::Identity() + b * K + c * K * K;
  }
  return {exp_so3(w), V * u};
}

Twist log_se3(const Pose& T) {
  const Eigen::Vector3d w = log_so3(T.R);
  const double theta = w.norm();
  const Eigen::Matrix3d K = skew(w);
  // V⁻¹ = I - K/2 + c K², c = (1 - (θ/2) cot(θ/2)) / θ²
  double c;
  if (theta < 1e-4) {
    c = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    const double half = 0.5 * theta;
    c = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
  }
  const Eigen::Matrix3d Vinv = Eigen::Matrix3d::Identity() - 0.5 * K + c * K * K;
  Twist xi;
  xi.head<3>() = Vinv * T.t;
  xi.tail<3>() = w;
  return xi;
}

Matrix6d adjoint(const Pose& T) {
  Matrix6d Ad = Matrix6d::Zero();
  Ad.topLeftCorner<3, 3>() = T.R;
  Ad.topRightCorner<3, 3>() = skew(T.t) * T.R;
  Ad.bottomRightCorner<3, 3>() = T.R;
  return Ad;
}

Pose rotation_z(double angle) {
  Pose T;
  T.R = Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  return T;
}

Twist sample_twist(const Cov6& cov, std::mt19937_64& rng) {
  if (!cov.allFinite()) throw Error(ErrorCode::NotPSD, "covariance has non-finite entries");
  // Components with zero variance are exactly zero for a PSD matrix; factor the rest.
  std::array<int, 6> active{};
  int n = 0;
  for (int i = 0; i < 6; ++i) {
    if (cov(i, i) != 0.0) active[n++] = i;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector6d z;
  for (int i = 0; i < 6; ++i) z[i] = normal(rng);

  Twist xi = Twist::Zero();
  if (n == 0) return xi;
  Eigen::MatrixXd sub(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) sub(i, j) = cov(active[i], active[j]);
  sub.diagonal().array() += 1e-12;
  Eigen::LLT<Eigen::MatrixXd> llt(sub);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPSD, "Cholesky factorization failed");
  Eigen::VectorXd zs(n);
  for (int i = 0; i < n; ++i) zs[i] = z[active[i]];
  const Eigen::VectorXd x = llt.matrixL() * zs;
  for (int i = 0; i < n; ++i) xi[active[i]] = x[i];
  return xi;
}

std::array<double, 12> to_row12(const Pose& T) {
  std::array<double, 12> v{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) v[4 * r + c] = T.R(r, c);
    v[4 * r + 3] = T.t[r];
  }
  return v;
}

Pose from_row12(const std::array<double, 12>& v) {
  Pose T;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) T.R(r, c) = v[4 * r + c];
    T.t[r] = v[4 * r + 3];
  }
  return T;
}

std::array<double, 21> to_lower21(const Cov6& M) {
  std::array<double, 21> v{};
  int k = 0;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c <= r; ++c) v[k++] = M(r, c);
  return v;
}

Cov6 from_lower21(const std::array<double, 21>& v) {
  Cov6 M;
  int k = 0;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c <= r; ++c) {
      M(r, c) = v[k];
      M(c, r) = v[k];
      ++k;
    }
  return M;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2) + b * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return mix_seed(mix_seed(master, stream), index);
}

}  // namespace icpcov
