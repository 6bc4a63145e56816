#pragma once

#include <span>
#include <string>
#include <vector>

#include "icpcov/liegroup.hpp"

namespace icpcov {

/// KL(N(0, pred) ‖ N(0, gt)) with both arguments floored by εI first.
double metric_kl(const Cov6& pred, const Cov6& gt, double epsilon = 1e-8);

enum class VarianceComponent { X = 0, Y = 1, Yaw = 5 };

/// Mean |pred(c,c) - gt(c,c)| over the pairs.
double metric_mae(std::span<const Cov6> preds, std::span<const Cov6> gts, VarianceComponent c);

constexpr std::size_t kDefaultWindow = 200;

/// Frame ranges [begin, end) of non-overlapping windows; a trailing partial
/// window is kept when it holds at least window/2 frames.
std::vector<std::pair<std::size_t, std::size_t>> evaluation_windows(std::size_t frames, std::size_t window);

/// Per-window mean position error after aligning each window's first
/// estimated pose onto the first ground-truth pose.
std::vector<double> metric_ape(std::span<const Pose> est, std::span<const Pose> gt,
                               std::size_t window = kDefaultWindow);

/// Per-window mean translational norm of log((gt_k⁻¹ gt_{k+δ})⁻¹ (est_k⁻¹ est_{k+δ})).
std::vector<double> metric_rpe(std::span<const Pose> est, std::span<const Pose> gt,
                               std::size_t window = kDefaultWindow, std::size_t delta = 1);

/// 100 (baseline - ours) / baseline; positive means ours is better.
double improvement_pct(double baseline, double ours);

double mean_of(std::span<const double> v);

struct EvalReport {
  std::vector<double> kl;
  double kl_mean = 0.0;
  double mae_x = 0.0, mae_y = 0.0, mae_yaw = 0.0;
  std::vector<double> ape;
  double ape_mean = 0.0;
  std::vector<double> rpe;
  double rpe_mean = 0.0;
  // Populated only when a baseline trajectory is supplied.
  bool has_baseline = false;
  double baseline_ape_mean = 0.0, baseline_rpe_mean = 0.0;
  double ape_improvement_pct = 0.0, rpe_improvement_pct = 0.0;
};

EvalReport evaluate_covariances(std::span<const Cov6> preds, std::span<const Cov6> gts, double epsilon = 1e-8);
EvalReport evaluate_trajectories(std::span<const Pose> est, std::span<const Pose> gt, std::size_t window,
                                 std::span<const Pose> baseline = {});

}  // namespace icpcov
