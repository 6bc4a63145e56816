#pragma once

#include <vector>

#include "icpcov/cloud.hpp"
#include "icpcov/liegroup.hpp"

namespace icpcov {

struct IcpConfig {
  int max_iterations = 30;
  double translation_tol = 1e-4;  // m
  double rotation_tol = 1e-5;     // rad
  double max_corr_dist = 2.0;     // m
  int min_correspondences = 50;
  double degeneracy_threshold = 1e6;
  /// Longest iterate cycle (in iterations) accepted as convergence; 0 or 1 disables.
  int max_cycle = 10;

  void validate() const;
};

struct IcpResult {
  Pose pose;
  bool converged = false;
  int iterations = 0;
  double final_rmse = 0.0;
  bool degenerate = false;
  double condition = 1.0;
  /// Converged by revisiting an earlier iterate rather than by a small step.
  bool limit_cycle = false;
  /// Point-to-plane RMSE at the pose entering each iteration.
  std::vector<double> rmse_history;
};

struct NormalSolution {
  Twist delta;
  double condition;
};

/// Solves (A + λI) δ = b with λ = 1e-9 trace(A) / 6 and reports the condition
/// number max_eig / max(min_eig, 1e-300) of A.
NormalSolution solve_normal_equations(const Matrix6d& A, const Vector6d& b);

/// Target cloud with normals and its search index, built once and shared by
/// many registrations.
class RegistrationTarget {
 public:
  explicit RegistrationTarget(PointCloud cloud);

  const PointCloud& cloud() const { return cloud_; }
  const NnIndex& index() const { return index_; }

 private:
  PointCloud cloud_;
  NnIndex index_;
};

/// Point-to-plane ICP with right-multiplicative updates pose <- pose * exp(δ).
IcpResult icp_point_to_plane(const PointCloud& source, const RegistrationTarget& target, const Pose& init,
                             const IcpConfig& cfg = {});
IcpResult icp_point_to_plane(const PointCloud& source, const PointCloud& target, const Pose& init,
                             const IcpConfig& cfg = {});

}  // namespace icpcov
