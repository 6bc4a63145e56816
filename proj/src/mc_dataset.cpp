#include "icpcov/mc_dataset.hpp"

#include <atomic>
#include <numbers>
#include <optional>
#include <thread>

#include "icpcov/error.hpp"

namespace icpcov {

namespace {

std::atomic<unsigned> g_worker_threads{0};

// Runs fn(i) for i in [0, n) on the worker pool; fn writes to its own slot.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const unsigned workers = std::min<std::size_t>(worker_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace

void set_worker_threads(unsigned n) { g_worker_threads = n; }

unsigned worker_threads() {
  const unsigned n = g_worker_threads.load();
  if (n > 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

Scenario parse_scenario(const std::string& name) {
  if (name == "prebuilt") return Scenario::Prebuilt;
  if (name == "slam") return Scenario::Slam;
  throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + name + "' (expected prebuilt|slam)");
}

std::string to_string(Scenario s) { return s == Scenario::Prebuilt ? "prebuilt" : "slam"; }

void MapConfig::validate() const {
  if (x_prev < 0 || y_next < 0 || x_prev + y_next < 1 || !(map_voxel > 0) || !(scan_voxel > 0)) {
    throw Error(ErrorCode::InvalidArgument, "invalid map configuration");
  }
}

Vector6d PerturbConfig::default_sigma() {
  constexpr double deg = std::numbers::pi / 180.0;
  Vector6d s;
  s << 1.0, 1.0, 0.2, 5.0 * deg, 5.0 * deg, 10.0 * deg;
  return s;
}

Cov6 PerturbConfig::covariance() const { return sigma.array().square().matrix().asDiagonal(); }

void PerturbConfig::validate() const {
  if ((sigma.array() < 0.0).any() || !sigma.allFinite() || n_samples < 2) {
    throw Error(ErrorCode::InvalidArgument, "perturbation sigmas must be >= 0 and n_samples >= 2");
  }
}

std::vector<std::size_t> map_neighbor_indices(std::size_t n, std::size_t k, const MapConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> out;
  const auto lo = static_cast<std::int64_t>(k) - cfg.x_prev;
  const auto hi = static_cast<std::int64_t>(k) + cfg.y_next;
  for (std::int64_t j = std::max<std::int64_t>(lo, 0); j <= hi && j < static_cast<std::int64_t>(n); ++j) {
    if (j != static_cast<std::int64_t>(k)) out.push_back(static_cast<std::size_t>(j));
  }
  return out;
}

PointCloud gather_map_points(const ScanSequence& seq, std::size_t k, const MapConfig& cfg) {
  const auto nbrs = map_neighbor_indices(seq.size(), k, cfg);
  if (nbrs.empty()) throw Error(ErrorCode::NoMapScans, "no map scans around index " + std::to_string(k));
  PointCloud map;
  for (std::size_t j : nbrs) {
    const PointCloud world = transform_cloud(seq.scan(j), seq.pose(j));
    map.points.insert(map.points.end(), world.points.begin(), world.points.end());
  }
  return map;
}

PointCloud build_reference_map(const ScanSequence& seq, std::size_t k, const MapConfig& cfg) {
  const PointCloud raw = gather_map_points(seq, k, cfg);
  return estimate_normals(voxel_downsample(raw, cfg.map_voxel), cfg.normal_neighbors);
}

McRuns mc_registration_errors(const PointCloud& scan, const RegistrationTarget& map, const Pose& gt,
                              const PerturbConfig& pcfg, const IcpConfig& icfg, std::uint64_t seed,
                              std::int64_t scan_id) {
  pcfg.validate();
  icfg.validate();
  const Cov6 perturb = pcfg.covariance();
  const auto n = static_cast<std::size_t>(pcfg.n_samples);
  std::vector<std::optional<Twist>> slots(n);

  parallel_for(n, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(scan_id), i));
    const Twist xi_o = sample_twist(perturb, rng);
    const Pose init = compose(gt, exp_se3(xi_o));
    try {
      const IcpResult r = icp_point_to_plane(scan, map, init, icfg);
      if (!r.converged) return;
      const Twist err = log_se3(compose(inverse(gt), r.pose));
      if (err.allFinite()) slots[i] = err;
    } catch (const Error&) {
      // counted as non-converged
    }
  });

  McRuns runs;
  for (auto& s : slots) {
    if (s) {
      runs.errors.push_back(*s);
    } else {
      ++runs.n_failed;
    }
  }
  return runs;
}

Cov6 second_moment_covariance(const std::vector<Twist>& errors) {
  if (errors.size() < 2) {
    throw Error(ErrorCode::InsufficientConvergence, std::to_string(errors.size()) + " converged runs, need >= 2");
  }
  Cov6 Y = Cov6::Zero();
  for (const auto& xi : errors) Y.noalias() += xi * xi.transpose();
  Y /= static_cast<double>(errors.size() - 1);
  return 0.5 * (Y + Y.transpose());
}

ScanSample mc_covariance(const PointCloud& scan, const RegistrationTarget& map, const Pose& gt,
                         const PerturbConfig& pcfg, const IcpConfig& icfg, std::uint64_t seed, std::int64_t scan_id) {
  const McRuns runs = mc_registration_errors(scan, map, gt, pcfg, icfg, seed, scan_id);
  ScanSample s;
  s.scan_id = scan_id;
  s.gt_pose = gt;
  s.n_samples = pcfg.n_samples;
  s.n_converged = static_cast<int>(runs.errors.size());
  s.label = second_moment_covariance(runs.errors);
  return s;
}

ScanSample mc_covariance(const PointCloud& scan, const PointCloud& map, const Pose& gt, const PerturbConfig& pcfg,
                         const IcpConfig& icfg, std::uint64_t seed, std::int64_t scan_id) {
  return mc_covariance(scan, RegistrationTarget(map), gt, pcfg, icfg, seed, scan_id);
}

DatasetResult generate_dataset(const ScanSequence& seq, std::size_t stride, const MapConfig& map_cfg,
                               const PerturbConfig& pcfg, const IcpConfig& icfg, std::uint64_t seed,
                               Scenario scenario) {
  if (stride == 0) throw Error(ErrorCode::InvalidArgument, "stride must be positive");
  map_cfg.validate();
  DatasetResult out;
  for (std::size_t k = 0; k < seq.size(); k += stride) {
    const auto id = static_cast<std::int64_t>(k);
    try {
      const RegistrationTarget map(build_reference_map(seq, k, map_cfg));
      const PointCloud scan = voxel_downsample(seq.scan(k), map_cfg.scan_voxel);
      ScanSample s = mc_covariance(scan, map, seq.pose(k), pcfg, icfg, seed, id);
      s.scenario = scenario;
      s.scan_path = seq.scan_path(k);
      out.samples.push_back(std::move(s));
    } catch (const Error& e) {
      out.failures.push_back({id, e.what()});
    }
  }
  return out;
}

}  // namespace icpcov
