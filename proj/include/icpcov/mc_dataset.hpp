#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "icpcov/cloud.hpp"
#include "icpcov/liegroup.hpp"
#include "icpcov/registration.hpp"
#include "icpcov/sequence.hpp"

namespace icpcov {

enum class Scenario { Prebuilt, Slam };

Scenario parse_scenario(const std::string& name);
std::string to_string(Scenario s);

struct MapConfig {
  int x_prev = 10;
  int y_next = 20;
  double map_voxel = 1.0;   // m
  double scan_voxel = 0.1;  // m
  int normal_neighbors = kDefaultNormalNeighbors;

  /// Pre-built map: 10 preceding and 20 subsequent scans.
  static MapConfig prebuilt() { return {10, 20}; }
  /// SLAM: 10 preceding scans only.
  static MapConfig slam() { return {10, 0}; }
  static MapConfig for_scenario(Scenario s) { return s == Scenario::Prebuilt ? prebuilt() : slam(); }

  void validate() const;
};

struct PerturbConfig {
  /// Standard deviations (σx, σy, σz in m; σφ, σθ, σψ in rad).
  Vector6d sigma = default_sigma();
  int n_samples = 64;

  /// 1.0, 1.0, 0.2 m and 5°, 5°, 10°.
  static Vector6d default_sigma();
  Cov6 covariance() const;
  void validate() const;
};

struct ScanSample {
  std::int64_t scan_id = 0;
  Pose gt_pose;
  Cov6 label = Cov6::Zero();
  int n_samples = 0;
  int n_converged = 0;
  Scenario scenario = Scenario::Prebuilt;
  std::string scan_path;
};

/// Indices in [k - x_prev, k + y_next] ∩ [0, n) excluding k.
std::vector<std::size_t> map_neighbor_indices(std::size_t n, std::size_t k, const MapConfig& cfg);

/// Neighbouring scans moved into the world frame and concatenated, before any
/// downsampling. Throws NoMapScans when no neighbour exists.
PointCloud gather_map_points(const ScanSequence& seq, std::size_t k, const MapConfig& cfg);

/// gather_map_points, voxel-downsampled at map_voxel, with normals.
PointCloud build_reference_map(const ScanSequence& seq, std::size_t k, const MapConfig& cfg);

/// Registration errors ξ_i = log(gt⁻¹ T̂_i) from N perturbed starts T_i = gt · exp(ξ_o).
struct McRuns {
  std::vector<Twist> errors;  // converged runs, in run order
  int n_failed = 0;
};

McRuns mc_registration_errors(const PointCloud& scan, const RegistrationTarget& map, const Pose& gt,
                              const PerturbConfig& pcfg, const IcpConfig& icfg, std::uint64_t seed,
                              std::int64_t scan_id = 0);

/// Y = Σ ξ ξᵀ / (n - 1) about zero. Throws InsufficientConvergence when n < 2.
Cov6 second_moment_covariance(const std::vector<Twist>& errors);

/// Monte Carlo label for one scan (already downsampled at scan_voxel) against
/// a map with normals.
ScanSample mc_covariance(const PointCloud& scan, const RegistrationTarget& map, const Pose& gt,
                         const PerturbConfig& pcfg, const IcpConfig& icfg, std::uint64_t seed,
                         std::int64_t scan_id = 0);
ScanSample mc_covariance(const PointCloud& scan, const PointCloud& map, const Pose& gt, const PerturbConfig& pcfg,
                         const IcpConfig& icfg, std::uint64_t seed, std::int64_t scan_id = 0);

struct DatasetFailure {
  std::int64_t scan_id;
  std::string reason;
};

struct DatasetResult {
  std::vector<ScanSample> samples;
  std::vector<DatasetFailure> failures;
};

constexpr std::size_t kDefaultStride = 50;

/// Every stride-th scan: build its map, then label it. Per-scan failures are
/// recorded and skipped.
DatasetResult generate_dataset(const ScanSequence& seq, std::size_t stride, const MapConfig& map_cfg,
                               const PerturbConfig& pcfg, const IcpConfig& icfg, std::uint64_t seed,
                               Scenario scenario = Scenario::Prebuilt);

template <class T>
struct Split {
  std::vector<T> train, test, eval;
};

/// Three consecutive segments; boundaries at round(n·r_train) and round(n·(r_train + r_test)).
template <class T>
Split<T> split_dataset(const std::vector<T>& items, double r_train = 0.7, double r_test = 0.2, double r_eval = 0.1);

/// Number of worker threads used for Monte Carlo runs (defaults to hardware concurrency).
void set_worker_threads(unsigned n);
unsigned worker_threads();

}  // namespace icpcov

#include "icpcov/detail/split_impl.hpp"
