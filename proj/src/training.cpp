#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "icpcov/error.hpp"
#include "icpcov/predictor.hpp"

namespace icpcov {

std::pair<PointCloud, Cov6> augment_rotation_z(const PointCloud& scan, const Cov6& label, double angle) {
  const Pose Rz = rotation_z(angle);
  const Matrix6d Ad = adjoint(Rz);
  Cov6 rotated = Ad * label * Ad.transpose();
  rotated = 0.5 * (rotated + rotated.transpose()).eval();
  return {transform_cloud(scan, Rz), rotated};
}

std::vector<double> sampling_weights(std::span<const Cov6> labels, double floor_fraction) {
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "no samples to weight");
  std::vector<double> w(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) w[i] = labels[i].cwiseAbs().maxCoeff();
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  const double floor = floor_fraction * mean;
  double total = 0.0;
  for (auto& x : w) {
    x += floor;
    total += x;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    return w;
  }
  for (auto& x : w) x /= total;
  return w;
}

std::size_t sample_index(std::span<const double> cumulative, double u) {
  const double target = u * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

namespace {

struct Adam {
  Eigen::VectorXd m, v;
  long step = 0;

  void apply(Eigen::VectorXd& theta, const Eigen::VectorXd& g, const TrainConfig& cfg) {
    if (m.size() == 0) {
      m = Eigen::VectorXd::Zero(theta.size());
      v = Eigen::VectorXd::Zero(theta.size());
    }
    ++step;
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
    theta.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + 1e-8);
  }
};

}  // namespace

ModelParams train(const std::vector<TrainingExample>& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw Error(ErrorCode::EmptyInput, "training set is empty");
  const FeatureConfig fcfg;

  // Normals once per scan so rotated copies only need the descriptor pass.
  std::vector<PointCloud> scans;
  std::vector<Cov6> labels;
  std::vector<Eigen::VectorXd> feats;
  scans.reserve(dataset.size());
  for (const auto& ex : dataset) {
    PointCloud s = ex.scan;
    if (!s.has_normals() && s.size() >= static_cast<std::size_t>(fcfg.normal_neighbors)) {
      s = estimate_normals(s, fcfg.normal_neighbors);
    }
    feats.push_back(extract_features(s, fcfg));
    scans.push_back(std::move(s));
    labels.push_back(ex.label);
  }

  const int dim = fcfg.dimension();
  std::uint64_t seed_state = cfg.seed;
  ModelParams params = init_params(dim, cfg.hidden, mix_seed(seed_state, 1), cfg.epsilon);
  params.features = fcfg;

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim), var = Eigen::VectorXd::Zero(dim);
  for (const auto& f : feats) mean += f;
  mean /= static_cast<double>(feats.size());
  for (const auto& f : feats) var += (f - mean).cwiseAbs2();
  var /= static_cast<double>(feats.size());
  params.feature_mean = mean;
  params.feature_std = var.cwiseSqrt().unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });

  if (cfg.init_output_from_mean) {
    Cov6 mean_label = Cov6::Zero();
    for (const auto& y : labels) mean_label += y;
    mean_label /= static_cast<double>(labels.size());
    mean_label.diagonal().array() += cfg.epsilon;
    Eigen::LLT<Matrix6d> llt(mean_label);
    if (llt.info() == Eigen::Success) {
      params.layers.back().b = raw_from_cholesky(llt.matrixL());
      params.layers.back().W *= 0.1;
    }
  }

  std::vector<double> cumulative;
  if (cfg.weighted_sampling) {
    const auto p = sampling_weights(labels, cfg.weight_floor_fraction);
    cumulative.resize(p.size());
    std::partial_sum(p.begin(), p.end(), cumulative.begin());
  }

  std::mt19937_64 rng(mix_seed(seed_state, 2));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Adam adam;
  Eigen::VectorXd theta = flatten(params.layers);
  const std::size_t n = dataset.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
  const std::size_t steps = (n + batch - 1) / batch;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (!cfg.weighted_sampling) std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t s = 0; s < steps; ++s) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
      std::size_t count = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        std::size_t idx;
        if (cfg.weighted_sampling) {
          idx = sample_index(cumulative, unit(rng));
        } else {
          const std::size_t pos = s * batch + b;
          if (pos >= n) break;
          idx = order[pos];
        }
        LossTerms terms;
        std::vector<DenseLayer> grads;
        if (cfg.augment) {
          const double angle = (2.0 * unit(rng) - 1.0) * std::numbers::pi;
          const auto [rot_scan, rot_label] = augment_rotation_z(scans[idx], labels[idx], angle);
          grads = gradient(params, extract_features(rot_scan, fcfg), rot_label, cfg, &terms);
        } else {
          grads = gradient(params, feats[idx], labels[idx], cfg, &terms);
        }
        if (!std::isfinite(terms.total)) {
          throw Error(ErrorCode::TrainingDiverged, "non-finite loss at epoch " + std::to_string(epoch + 1));
        }
        g += flatten(grads);
        epoch_loss += terms.total;
        ++count;
      }
      if (count == 0) continue;
      epoch_count += count;
      g /= static_cast<double>(count);
      adam.apply(theta, g, cfg);
      if (!theta.allFinite()) throw Error(ErrorCode::TrainingDiverged, "non-finite parameters");
      unflatten(theta, params.layers);
    }
    params.loss_history.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(epoch_count, 1)));
  }
  return params;
}

Cov6 predict(const ModelParams& params, const PointCloud& scan) {
  return forward(params, extract_features(scan, params.features)).Yhat;
}

}  // namespace icpcov
