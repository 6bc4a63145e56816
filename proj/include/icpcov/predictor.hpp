#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "icpcov/cloud.hpp"
#include "icpcov/liegroup.hpp"

namespace icpcov {

using Vector21d = Eigen::Matrix<double, 21, 1>;

// ---------------------------------------------------------------------------
// Per-scan geometric descriptor
// ---------------------------------------------------------------------------

struct FeatureConfig {
  int sectors = 16;
  int normal_neighbors = kDefaultNormalNeighbors;

  static constexpr int kGlobal = 9;
  static constexpr int kPerSector = 7;
  int dimension() const { return kGlobal + kPerSector * sectors; }
};

/// Layout (121 values by default):
///   [0] point count, [1..3] global scatter eigenvalues λ1 ≥ λ2 ≥ λ3, [4] mean range,
///   [5..7] global linearity / planarity / sphericity, [8] height spread (std of z),
///   then per azimuth sector j = floor(S (atan2(y, x) + π) / 2π):
///   log(1 + count), mean range, linearity, planarity, sphericity, mean normal z,
///   height spread. Empty sectors are all zeros; eigen-features are zero below 3 points.
/// Normals are estimated when the scan has none and enough points.
Eigen::VectorXd extract_features(const PointCloud& scan, const FeatureConfig& cfg = {});

/// Sector index of a point, clamped to [0, sectors - 1].
int azimuth_sector(const Eigen::Vector3d& p, int sectors);

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct DenseLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

struct ModelParams {
  FeatureConfig features;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_std;
  /// Hidden layers use tanh; the last layer is linear with 21 outputs.
  std::vector<DenseLayer> layers;
  double epsilon = 1e-8;
  std::vector<double> loss_history;  // mean training loss per epoch

  int input_dim() const { return static_cast<int>(feature_mean.size()); }
  std::size_t parameter_count() const;
};

/// Random (Glorot-uniform) parameters with identity standardization.
ModelParams init_params(int input_dim, const std::vector<int>& hidden, std::uint64_t seed, double epsilon = 1e-8);

double softplus(double x);
double inverse_softplus(double y);

/// Lower-triangular factor from raw21 (row-major lower triangle), softplus on the diagonal.
Matrix6d assemble_cholesky(const Vector21d& raw);
/// raw21 whose assembled factor is L (the inverse of assemble_cholesky for L with positive diagonal).
Vector21d raw_from_cholesky(const Matrix6d& L);

struct ForwardResult {
  Vector21d raw;
  Matrix6d L;
  Cov6 Yhat;
};

/// Ŷ = L Lᵀ + ε I from a raw 21-vector.
Cov6 covariance_from_raw(const Vector21d& raw, double epsilon);
ForwardResult forward(const ModelParams& params, const Eigen::VectorXd& features);

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

struct TrainConfig {
  double alpha = 0.01;  // KL weight
  double beta = 1.0;    // Huber weight
  double huber_delta = 0.1;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
  bool augment = true;
  bool weighted_sampling = true;
  double weight_floor_fraction = 0.05;
  std::vector<int> hidden = {128, 64};
  /// Start the output bias at the Cholesky factor of the mean training label.
  bool init_output_from_mean = true;

  void validate() const;
};

/// ½[tr(B⁻¹A) − 6 + ln det B − ln det A] for zero-mean Gaussians N(0,A) ‖ N(0,B).
double kl_divergence(const Cov6& A, const Cov6& B);

double huber(double delta, double delta0);

struct LossTerms {
  double kl = 0.0;
  double huber = 0.0;
  double total = 0.0;
};

/// α KL(N(0,Ŷ) ‖ N(0,Ȳ + εI)) + β Σ_{i≤j} Huber(Ŷ − Ȳ).
LossTerms loss(const Cov6& Yhat, const Cov6& Ybar, const TrainConfig& cfg);

/// ∂loss/∂Ŷ with every entry treated as an independent variable (Huber only
/// touches the upper triangle, so the result is not symmetric).
Matrix6d loss_gradient_wrt_yhat(const Cov6& Yhat, const Cov6& Ybar, const TrainConfig& cfg);

/// Analytic gradient of the loss for one example with respect to every layer parameter.
std::vector<DenseLayer> gradient(const ModelParams& params, const Eigen::VectorXd& features, const Cov6& Ybar,
                                 const TrainConfig& cfg, LossTerms* terms = nullptr);

Eigen::VectorXd flatten(const std::vector<DenseLayer>& layers);
void unflatten(const Eigen::VectorXd& flat, std::vector<DenseLayer>& layers);

// ---------------------------------------------------------------------------
// Data handling and training
// ---------------------------------------------------------------------------

struct TrainingExample {
  PointCloud scan;
  Cov6 label;
};

/// Scan rotated by Rz(angle) and label conjugated with the matching adjoint.
std::pair<PointCloud, Cov6> augment_rotation_z(const PointCloud& scan, const Cov6& label, double angle);

/// pᵢ ∝ max|Yᵢ| + floor, floor = floor_fraction · mean(max|Y|). Uniform when all weights vanish.
std::vector<double> sampling_weights(std::span<const Cov6> labels, double floor_fraction = 0.05);

/// Index with probability proportional to `probabilities` given u ∈ [0, 1).
std::size_t sample_index(std::span<const double> cumulative, double u);

ModelParams train(const std::vector<TrainingExample>& dataset, const TrainConfig& cfg);

Cov6 predict(const ModelParams& params, const PointCloud& scan);

void save_model(std::ostream& os, const ModelParams& params);
void save_model(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_model(std::istream& is);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace icpcov
