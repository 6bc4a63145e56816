#include "icpcov/registration.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "icpcov/error.hpp"

namespace icpcov {

void IcpConfig::validate() const {
  if (max_iterations <= 0 || !(translation_tol > 0) || !(rotation_tol > 0) || !(max_corr_dist > 0) ||
      min_correspondences < 6 || !(degeneracy_threshold > 0) || max_cycle < 0) {
    throw Error(ErrorCode::InvalidArgument, "invalid ICP configuration");
  }
}

NormalSolution solve_normal_equations(const Matrix6d& A, const Vector6d& b) {
  if (!A.allFinite() || !b.allFinite()) throw Error(ErrorCode::NumericalFailure, "non-finite normal equations");
  Eigen::SelfAdjointEigenSolver<Matrix6d> eig(A, Eigen::EigenvaluesOnly);
  const double max_eig = eig.eigenvalues().maxCoeff();
  const double min_eig = eig.eigenvalues().minCoeff();
  const double condition = max_eig / std::max(min_eig, 1e-300);

  const double lambda = 1e-9 * A.trace() / 6.0;
  Matrix6d reg = A;
  reg.diagonal().array() += lambda;
  const Vector6d delta = reg.ldlt().solve(b);
  if (!delta.allFinite()) throw Error(ErrorCode::NumericalFailure, "normal equation solve produced non-finite step");
  return {delta, condition};
}

RegistrationTarget::RegistrationTarget(PointCloud cloud) : cloud_(std::move(cloud)), index_(cloud_.points) {
  if (!cloud_.has_normals()) throw Error(ErrorCode::InvalidArgument, "registration target needs normals");
}

namespace {

bool within_tolerance(const Twist& step, const IcpConfig& cfg) {
  return step.head<3>().norm() < cfg.translation_tol && step.tail<3>().norm() < cfg.rotation_tol;
}

}  // namespace

IcpResult icp_point_to_plane(const PointCloud& source, const RegistrationTarget& target, const Pose& init,
                             const IcpConfig& cfg) {
  cfg.validate();
  if (source.empty()) throw Error(ErrorCode::EmptyCloud, "ICP source cloud is empty");
  const Points& tp = target.cloud().points;
  const Points& tn = target.cloud().normals;

  IcpResult result;
  result.pose = init;
  const double max_d = cfg.max_corr_dist;
  // Poses entering recent iterations, for limit-cycle detection.
  std::vector<Pose> visited;

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    Matrix6d A = Matrix6d::Zero();
    Vector6d g = Vector6d::Zero();
    double sq_sum = 0.0;
    int count = 0;
    const Eigen::Matrix3d& R = result.pose.R;
    for (const auto& p : source.points) {
      const Eigen::Vector3d x = R * p + result.pose.t;
      const Neighbor nn = target.index().nearest(x);
      if (nn.distance > max_d) continue;
      const Eigen::Vector3d& n = tn[nn.index];
      const double r = n.dot(x - tp[nn.index]);
      // d r / d(u, w) for pose * exp(δ): [Rᵀn, p x Rᵀn]
      const Eigen::Vector3d m = R.transpose() * n;
      Vector6d J;
      J.head<3>() = m;
      J.tail<3>() = p.cross(m);
      A.selfadjointView<Eigen::Lower>().rankUpdate(J);
      g += J * r;
      sq_sum += r * r;
      ++count;
    }
    if (count < cfg.min_correspondences) {
      throw Error(ErrorCode::TooFewCorrespondences,
                  std::to_string(count) + " correspondences at iteration " + std::to_string(it));
    }
    A.triangularView<Eigen::StrictlyUpper>() = A.transpose();
    result.rmse_history.push_back(std::sqrt(sq_sum / count));
    visited.push_back(result.pose);

    const NormalSolution sol = solve_normal_equations(A, -g);
    result.condition = sol.condition;
    result.pose = compose(result.pose, exp_se3(sol.delta));
    result.iterations = it;
    if (within_tolerance(sol.delta, cfg)) {
      result.converged = true;
      break;
    }
    // Correspondence switching can trap the iteration in a short cycle whose
    // steps never shrink. Returning to a pose seen 2..max_cycle iterations ago
    // counts as convergence; the cycle member with the lowest residual is kept.
    const auto n = visited.size();
    for (int period = 2; period <= cfg.max_cycle && static_cast<std::size_t>(period) <= n; ++period) {
      const Pose& earlier = visited[n - static_cast<std::size_t>(period)];
      if (!within_tolerance(log_se3(compose(inverse(earlier), result.pose)), cfg)) continue;
      std::size_t best = n - static_cast<std::size_t>(period);
      for (std::size_t j = best; j < n; ++j) {
        if (result.rmse_history[j] < result.rmse_history[best]) best = j;
      }
      result.pose = visited[best];
      result.converged = true;
      result.limit_cycle = true;
      break;
    }
    if (result.converged) break;
  }
  result.final_rmse = result.rmse_history.back();
  result.degenerate = result.condition > cfg.degeneracy_threshold;
  return result;
}

IcpResult icp_point_to_plane(const PointCloud& source, const PointCloud& target, const Pose& init,
                             const IcpConfig& cfg) {
  return icp_point_to_plane(source, RegistrationTarget(target), init, cfg);
}

}  // namespace icpcov
