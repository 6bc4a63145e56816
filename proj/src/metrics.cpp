#include "icpcov/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "icpcov/error.hpp"
#include "icpcov/predictor.hpp"

namespace icpcov {

double metric_kl(const Cov6& pred, const Cov6& gt, double epsilon) {
  Cov6 a = pred, b = gt;
  a.diagonal().array() += epsilon;
  b.diagonal().array() += epsilon;
  return std::max(0.0, kl_divergence(a, b));  // clip round-off below zero
}

double metric_mae(std::span<const Cov6> preds, std::span<const Cov6> gts, VarianceComponent c) {
  if (preds.size() != gts.size()) throw Error(ErrorCode::LengthMismatch, "prediction and label counts differ");
  if (preds.empty()) throw Error(ErrorCode::EmptyInput, "no covariances to compare");
  const int k = static_cast<int>(c);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += std::abs(preds[i](k, k) - gts[i](k, k));
  return sum / static_cast<double>(preds.size());
}

std::vector<std::pair<std::size_t, std::size_t>> evaluation_windows(std::size_t frames, std::size_t window) {
  if (window < 2) throw Error(ErrorCode::InvalidArgument, "window must be at least 2 frames");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t b = 0; b < frames; b += window) {
    const std::size_t e = std::min(frames, b + window);
    if (e - b == window || 2 * (e - b) >= window) out.emplace_back(b, e);
  }
  return out;
}

namespace {

void check_lengths(std::span<const Pose> est, std::span<const Pose> gt) {
  if (est.size() != gt.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "trajectory lengths differ (" + std::to_string(est.size()) + " vs " + std::to_string(gt.size()) + ")");
  }
}

}  // namespace

std::vector<double> metric_ape(std::span<const Pose> est, std::span<const Pose> gt, std::size_t window) {
  check_lengths(est, gt);
  std::vector<double> out;
  for (const auto& [b, e] : evaluation_windows(est.size(), window)) {
    const Pose align = gt[b] * inverse(est[b]);
    double sum = 0.0;
    for (std::size_t k = b; k < e; ++k) sum += ((align * est[k]).t - gt[k].t).norm();
    out.push_back(sum / static_cast<double>(e - b));
  }
  return out;
}

std::vector<double> metric_rpe(std::span<const Pose> est, std::span<const Pose> gt, std::size_t window,
                               std::size_t delta) {
  check_lengths(est, gt);
  if (delta < 1) throw Error(ErrorCode::InvalidArgument, "RPE delta must be positive");
  std::vector<double> out;
  for (const auto& [b, e] : evaluation_windows(est.size(), window)) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = b; k < e && k + delta < est.size(); ++k) {
      const Pose rel_gt = inverse(gt[k]) * gt[k + delta];
      const Pose rel_est = inverse(est[k]) * est[k + delta];
      sum += log_se3(inverse(rel_gt) * rel_est).head<3>().norm();
      ++n;
    }
    if (n > 0) out.push_back(sum / static_cast<double>(n));
  }
  return out;
}

double improvement_pct(double baseline, double ours) {
  if (baseline == 0.0) return 0.0;
  return 100.0 * (baseline - ours) / baseline;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

EvalReport evaluate_covariances(std::span<const Cov6> preds, std::span<const Cov6> gts, double epsilon) {
  if (preds.size() != gts.size()) throw Error(ErrorCode::LengthMismatch, "prediction and label counts differ");
  EvalReport r;
  for (std::size_t i = 0; i < preds.size(); ++i) r.kl.push_back(metric_kl(preds[i], gts[i], epsilon));
  r.kl_mean = mean_of(r.kl);
  r.mae_x = metric_mae(preds, gts, VarianceComponent::X);
  r.mae_y = metric_mae(preds, gts, VarianceComponent::Y);
  r.mae_yaw = metric_mae(preds, gts, VarianceComponent::Yaw);
  return r;
}

EvalReport evaluate_trajectories(std::span<const Pose> est, std::span<const Pose> gt, std::size_t window,
                                 std::span<const Pose> baseline) {
  EvalReport r;
  r.ape = metric_ape(est, gt, window);
  r.rpe = metric_rpe(est, gt, window);
  r.ape_mean = mean_of(r.ape);
  r.rpe_mean = mean_of(r.rpe);
  if (!baseline.empty()) {
    r.has_baseline = true;
    r.baseline_ape_mean = mean_of(metric_ape(baseline, gt, window));
    r.baseline_rpe_mean = mean_of(metric_rpe(baseline, gt, window));
    r.ape_improvement_pct = improvement_pct(r.baseline_ape_mean, r.ape_mean);
    r.rpe_improvement_pct = improvement_pct(r.baseline_rpe_mean, r.rpe_mean);
  }
  return r;
}

}  // namespace icpcov
