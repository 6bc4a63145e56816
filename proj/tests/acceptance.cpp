// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance                 run every criterion
//   acceptance --criterion N   run criterion N only

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "icpcov/cli.hpp"
#include "icpcov/dataio.hpp"
#include "icpcov/fusion.hpp"
#include "icpcov/mc_dataset.hpp"
#include "icpcov/metrics.hpp"
#include "icpcov/predictor.hpp"
#include "icpcov/registration.hpp"
#include "test_util.hpp"

using namespace icpcov;
using namespace icpcov::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

PointCloud room_scan(std::uint64_t seed, double voxel, double density = 20.0) {
  SceneSpec spec;
  spec.kind = SceneKind::Room;
  spec.seed = seed;
  spec.point_density = density;
  return voxel_downsample(synth_scene(spec).cloud, voxel);
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  double worst_rt = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Twist xi = random_twist(rng, std::numbers::pi - 0.01);
    worst_rt = std::max(worst_rt, (log_se3(exp_se3(xi)) - xi).cwiseAbs().maxCoeff());
  }
  double worst_ad = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Pose T = random_pose(rng);
    const Twist xi = random_twist(rng, 1.0, 1.0);
    worst_ad = std::max(worst_ad, (log_se3(T * exp_se3(xi) * inverse(T)) - adjoint(T) * xi).cwiseAbs().maxCoeff());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst_rt < 1e-9 && worst_ad < 1e-8 && secs < 1.0,
          fmt("max roundtrip err %.2e (< 1e-9), max adjoint err %.2e (< 1e-8), %.3f s (< 1 s)", worst_rt, worst_ad,
              secs)};
}

Outcome criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  const PointCloud source = room_scan(21, 0.1);
  const RegistrationTarget target(estimate_normals(room_scan(22, 0.1)));
  const Cov6 perturb = PerturbConfig::default_sigma().cwiseAbs2().asDiagonal();
  std::mt19937_64 rng(2);
  int good = 0, converged = 0;
  double worst_t = 0.0, worst_r = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Pose init = exp_se3(sample_twist(perturb, rng));
    try {
      const auto r = icp_point_to_plane(source, target, init);
      if (!r.converged) continue;
      ++converged;
      const double te = r.pose.t.norm(), re = log_so3(r.pose.R).norm();
      worst_t = std::max(worst_t, te);
      worst_r = std::max(worst_r, re);
      if (te < 1e-2 && re < deg(0.1)) ++good;
    } catch (const Error&) {
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {good >= 95 && secs < 60.0,
          fmt("%d/100 converged within 1 cm and 0.1 deg (>= 95), %d converged, %.1f s (< 60 s)", good, converged,
              secs)};
}

Outcome criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  PerturbConfig p;
  p.n_samples = 64;

  SceneSpec tunnel;
  tunnel.kind = SceneKind::Tunnel;
  tunnel.length = 60.0;
  tunnel.seed = 31;
  const PointCloud tmap = estimate_normals(voxel_downsample(synth_scene(tunnel).cloud, 0.2));
  tunnel.seed = 32;
  PointCloud tscan = voxel_downsample(synth_scene(tunnel).cloud, 0.1);
  // Only the middle of the tunnel is seen, so neither end can pin the axis.
  std::erase_if(tscan.points, [](const Eigen::Vector3d& q) { return std::abs(q.x()) > 15.0; });
  const auto tl = mc_covariance(tscan, tmap, Pose::identity(), p, IcpConfig{}, 33);
  const double ratio = tl.label(0, 0) / tl.label(1, 1);

  const PointCloud rmap = estimate_normals(room_scan(34, 0.2));
  const PointCloud rscan = room_scan(35, 0.1);
  const auto rl = mc_covariance(rscan, rmap, Pose::identity(), p, IcpConfig{}, 36);
  const double max_t = rl.label.diagonal().head<3>().maxCoeff();
  const double max_r = rl.label.diagonal().tail<3>().maxCoeff();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = ratio >= 10.0 && max_t < 0.05 * 0.05 && max_r < deg(0.5) * deg(0.5) && secs < 300.0;
  return {pass, fmt("tunnel var_x/var_y = %.3g (>= 10, %d/64 converged); room max var_t %.2e (< 2.5e-3), "
                    "max var_r %.2e (< %.2e, %d/64 converged); %.1f s (< 300 s)",
                    ratio, tl.n_converged, max_t, max_r, deg(0.5) * deg(0.5), rl.n_converged, secs)};
}

// Per-entry standard error of the (n-1)-normalised second moment of `xs`.
Cov6 second_moment_stderr(const std::vector<Twist>& xs) {
  const double n = static_cast<double>(xs.size());
  Cov6 mean = Cov6::Zero(), sq = Cov6::Zero();
  for (const auto& x : xs) {
    const Cov6 o = x * x.transpose();
    mean += o;
    sq += o.cwiseAbs2();
  }
  mean /= n;
  sq /= n;
  const Cov6 var = (sq - mean.cwiseAbs2()).cwiseMax(0.0);
  return (var / n).cwiseSqrt() * (n / (n - 1));
}

Outcome criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  PerturbConfig p;
  p.n_samples = 256;
  const PointCloud map = estimate_normals(room_scan(41, 0.2, 10.0));
  const PointCloud scan = room_scan(42, 0.2, 10.0);
  const Pose Rz = rotation_z(0.7);
  const Matrix6d Ad = adjoint(Rz);

  const RegistrationTarget t_plain(map), t_rot(transform_cloud(map, Rz));
  const auto a = mc_registration_errors(scan, t_plain, Pose::identity(), p, IcpConfig{}, 43);
  const auto b = mc_registration_errors(transform_cloud(scan, Rz), t_rot, Pose::identity(), p, IcpConfig{}, 44);
  if (a.errors.size() < 2 || b.errors.size() < 2) return {false, "too few converged runs"};
  std::vector<Twist> a_rot;
  for (const auto& x : a.errors) a_rot.push_back(Ad * x);
  const Cov6 conj = second_moment_covariance(a_rot);
  const Cov6 direct = second_moment_covariance(b.errors);
  const Cov6 noise = (second_moment_stderr(a_rot).cwiseAbs2() + second_moment_stderr(b.errors).cwiseAbs2()).cwiseSqrt();
  double worst = 0.0;
  int wr = 0, wc = 0;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c <= r; ++c) {
      const double z = std::abs(direct(r, c) - conj(r, c)) / std::max(noise(r, c), 1e-300);
      if (z > worst) worst = z, wr = r, wc = c;
    }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 3.0, fmt("max |direct - Ad*Y*Ad^T| / noise = %.2f at (%d,%d) (<= 3), converged %zu and %zu of 256, "
                            "%.1f s",
                            worst, wr, wc, a.errors.size(), b.errors.size(), secs)};
}

Outcome criterion5() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  int configs = 0, huber_lin = 0, huber_quad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 24; ++trial) {
    const int dim = 4 + trial % 5;
    ModelParams params = init_params(dim, {6, 5}, rng());
    for (int i = 0; i < dim; ++i) params.feature_std[i] = 0.5 + std::abs(n(rng));
    for (auto& l : params.layers) l.b = l.b.unaryExpr([&](double) { return 0.3 * n(rng); });
    Eigen::VectorXd f(dim);
    for (int i = 0; i < dim; ++i) f[i] = n(rng);
    const Cov6 Y = random_spd(rng, 0.2 + 0.2 * (trial % 3));
    TrainConfig cfg;
    cfg.alpha = trial % 2 ? 0.01 : 0.5;
    cfg.huber_delta = 0.05 + 0.05 * (trial % 4);

    const Cov6 Yhat = forward(params, f).Yhat;
    int lin = 0, quad = 0;
    for (int r = 0; r < 6; ++r)
      for (int c = r; c < 6; ++c) (std::abs(Yhat(r, c) - Y(r, c)) > cfg.huber_delta ? lin : quad)++;
    huber_lin += lin > 0;
    huber_quad += quad > 0;
    const double kl = loss(Yhat, Y, cfg).kl;
    if (!(kl > 0.0)) return {false, "KL term inactive"};

    const Eigen::VectorXd g = flatten(gradient(params, f, Y, cfg));
    const Eigen::VectorXd theta = flatten(params.layers);
    const double h = 1e-6;
    Eigen::VectorXd fd(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      ModelParams q = params;
      Eigen::VectorXd t = theta;
      t[i] += h;
      unflatten(t, q.layers);
      const double up = loss(forward(q, f).Yhat, Y, cfg).total;
      t[i] -= 2 * h;
      unflatten(t, q.layers);
      const double down = loss(forward(q, f).Yhat, Y, cfg).total;
      fd[i] = (up - down) / (2 * h);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-12));
    ++configs;
  }
  return {configs >= 20 && worst < 1e-4 && huber_lin > 0 && huber_quad > 0,
          fmt("%d configurations, max relative gradient error %.2e (< 1e-4); linear Huber branch hit in %d, "
              "quadratic in %d",
              configs, worst, huber_lin, huber_quad)};
}

Outcome criterion6() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  const double eps = 1e-8;
  int asym = 0, below = 0;
  double lowest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10000; ++i) {
    if (i % 100 == 0) rng.seed(6 + i);
    ModelParams params = init_params(12, {16, 8}, rng(), eps);
    // Log-uniform rescaling around the initialisation scale.
    const double scale = std::exp(std::uniform_real_distribution<double>(std::log(0.5), std::log(2.0))(rng));
    for (auto& l : params.layers) {
      l.W *= scale;
      l.b *= scale;
    }
    Eigen::VectorXd f(12);
    for (int k = 0; k < 12; ++k) f[k] = 3.0 * n(rng);
    const Cov6 Y = forward(params, f).Yhat;
    if (Y != Y.transpose()) ++asym;
    // Long-double eigensolve so the check is not limited by double round-off.
    const Eigen::Matrix<long double, 6, 6> Yl = Y.cast<long double>();
    const long double m = Eigen::SelfAdjointEigenSolver<Eigen::Matrix<long double, 6, 6>>(Yl).eigenvalues().minCoeff();
    lowest = std::min(lowest, static_cast<double>(m));
    if (m < static_cast<long double>(eps)) ++below;
  }
  return {asym == 0 && below == 0,
          fmt("10000 evaluations: %d not exactly symmetric, %d with min eigenvalue < 1e-8 (lowest %.10e)", asym, below,
              lowest)};
}

// Two-class corpus: rooms (well constrained) and open tunnels (axis unconstrained).
struct CorpusItem {
  PointCloud scan;
  Cov6 label;
  bool tunnel;
};

std::vector<CorpusItem> two_class_corpus(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PerturbConfig p;
  p.n_samples = 12;
  std::vector<CorpusItem> out;
  for (int i = 0; i < count; ++i) {
    const bool tunnel = i % 2 == 1;
    SceneSpec spec;
    spec.kind = tunnel ? SceneKind::Tunnel : SceneKind::Room;
    spec.length = tunnel ? 40.0 + 20.0 * u(rng) : 12.0 + 10.0 * u(rng);
    spec.width = tunnel ? 5.0 + 5.0 * u(rng) : 8.0 + 6.0 * u(rng);
    spec.height = 3.0 + 2.0 * u(rng);
    spec.point_density = 3.0 + 3.0 * u(rng);
    spec.seed = rng();
    const PointCloud map = estimate_normals(voxel_downsample(synth_scene(spec).cloud, 0.5));
    spec.seed = rng();
    PointCloud scan = voxel_downsample(synth_scene(spec).cloud, 0.25);
    if (tunnel) std::erase_if(scan.points, [](const Eigen::Vector3d& q) { return std::abs(q.x()) > 15.0; });
    try {
      const auto s = mc_covariance(scan, map, Pose::identity(), p, IcpConfig{}, rng(), i);
      out.push_back({std::move(scan), s.label, tunnel});
    } catch (const Error&) {
      // Unlabelled scans are dropped, as in dataset generation.
    }
  }
  return out;
}

Outcome criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  auto corpus = two_class_corpus(400, 7);
  // Interleave classes before the sequential split so each part holds both.
  const auto parts = split_dataset(corpus);
  std::vector<TrainingExample> train_set;
  for (const auto& c : parts.train) train_set.push_back({c.scan, c.label});
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 7;
  cfg.learning_rate = 3e-3;
  const ModelParams model = train(train_set, cfg);

  Cov6 mean = Cov6::Zero();
  for (const auto& e : train_set) mean += e.label;
  mean /= static_cast<double>(train_set.size());
  std::vector<double> kl_model, kl_base;
  for (const auto& c : parts.eval) {
    kl_model.push_back(metric_kl(predict(model, c.scan), c.label));
    kl_base.push_back(metric_kl(mean, c.label));
  }
  const double m = mean_of(kl_model), b = mean_of(kl_base);
  const double gain = improvement_pct(b, m);
  const bool loss_down = model.loss_history.back() < model.loss_history.front();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {m < b && gain >= 30.0 && loss_down && secs < 600.0,
          fmt("%zu labelled, eval %zu: model KL %.4g vs mean-covariance KL %.4g (%.1f%% lower, >= 30%%); "
              "loss %.4g -> %.4g; %.0f s (< 600 s)",
              corpus.size(), parts.eval.size(), m, b, gain, model.loss_history.front(), model.loss_history.back(),
              secs)};
}

Outcome criterion8() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t frames = 600;
  const double dt = 1.0 / kLidarRateHz;
  int wins = 0;
  std::vector<double> ape_gain, rpe_gain;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto gt = synth_trajectory(frames, dt, mix_seed(seed, 1));
    const auto covs = heteroscedastic_covariances(frames, NoiseRegimes::defaults(), mix_seed(seed, 2));
    const auto meas = simulate_icp_measurements(gt, covs, mix_seed(seed, 3));
    Cov6 mean = Cov6::Zero();
    for (const auto& c : covs) mean += c;
    mean /= static_cast<double>(frames);
    std::vector<TimedMeasurement> weighted, fixed;
    for (std::size_t k = 0; k < frames; ++k) {
      weighted.push_back({k * dt, meas[k].pose, covs[k]});
      fixed.push_back({k * dt, meas[k].pose, mean});
    }
    const FilterInit init = make_initial_state(meas.front().pose, 0.0);
    const auto rep = evaluate_trajectories(run_filter(weighted, init), gt, kDefaultWindow, run_filter(fixed, init));
    wins += rep.ape_mean < rep.baseline_ape_mean;
    ape_gain.push_back(rep.ape_improvement_pct);
    rpe_gain.push_back(rep.rpe_improvement_pct);
  }
  const double ape = mean_of(ape_gain), rpe = mean_of(rpe_gain);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {wins >= 18 && ape > 0.0 && rpe >= 0.0 && secs < 120.0,
          fmt("weighted beats fixed on APE in %d/20 (>= 18); mean APE improvement %.1f%% (> 0), mean RPE "
              "improvement %.1f%% (>= 0); %.1f s (< 120 s)",
              wins, ape, rpe, secs)};
}

Outcome criterion9() {
  Cov6 A = Cov6::Identity();
  A(0, 0) = 2.0;
  const double kl = kl_divergence(A, Cov6::Identity());
  const double h = huber(2.0, 1.0);
  std::vector<Cov6> labels(2, Cov6::Zero());
  labels[0](0, 0) = 1.0;
  labels[1](0, 0) = 3.0;
  const auto w = sampling_weights(labels, 0.0);
  const bool pass = std::abs(kl - 0.15343) <= 1e-5 && h == 1.5 && w.size() == 2 && std::abs(w[0] - 0.25) < 1e-15 &&
                    std::abs(w[1] - 0.75) < 1e-15;
  return {pass, fmt("KL %.6f (0.15343 +- 1e-5), Huber(2, 1) = %.17g (1.5), sampling (%.17g, %.17g) (0.25, 0.75)", kl, h,
                    w[0], w[1])};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "icpcov");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

Outcome criterion10() {
  const fs::path dir = fs::temp_directory_path() / "icpcov_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto p = [&](const std::string& name) { return (dir / name).string(); };
  if (cli({"synth", "--kind", "kitti", "--frames", "31", "--seed", "10", "--out", p("kitti")}) != 0 ||
      cli({"synth", "--kind", "trajectory", "--frames", "450", "--seed", "10", "--out", p("traj")}) != 0) {
    return {false, "could not create inputs"};
  }
  std::vector<std::string> same, differ;
  for (const char* run : {"1", "2"}) {
    const std::string r(run);
    int rc = 0;
    rc |= cli({"dataset", "--input", p("kitti"), "--seq", "00", "--scenario", "prebuilt", "--stride", "10", "--samples",
               "8", "--seed", "3", "--out", p("ds" + r + ".jsonl")});
    rc |= cli({"train", "--input", p("ds1.jsonl"), "--split", "all", "--epochs", "5", "--scan-voxel", "0.5", "--seed",
               "3", "--out", p("model" + r + ".bin")});
    rc |= cli({"fuse", "--input", p("traj/meas.txt"), "--cov", p("traj/cov.jsonl"), "--times", p("traj/times.txt"),
               "--out", p("fused" + r + ".txt")});
    rc |= cli({"eval", "--metric", "ape", "--input", p("fused1.txt"), "--gt", p("traj/gt.txt"), "--baseline",
               p("traj/meas.txt"), "--out", p("ape" + r + ".csv")});
    rc |= cli({"eval", "--metric", "rpe", "--input", p("fused1.txt"), "--gt", p("traj/gt.txt"), "--out",
               p("rpe" + r + ".csv")});
    if (rc != 0) return {false, "a command failed"};
  }
  for (const char* stem : {"ds%s.jsonl", "model%s.bin", "fused%s.txt", "ape%s.csv", "rpe%s.csv"}) {
    const std::string a = fmt(stem, "1"), b = fmt(stem, "2");
    (slurp(dir / a) == slurp(dir / b) && !slurp(dir / a).empty() ? same : differ).push_back(a);
  }
  fs::remove_all(dir);
  std::string detail = fmt("%zu/5 outputs byte-identical across two runs", same.size());
  for (const auto& d : differ) detail += " [differs: " + d + "]";
  return {differ.empty(), detail};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> list{
      {"Lie-group exp/log roundtrip and adjoint identity", criterion1},
      {"ICP recovers default perturbations on the room scene", criterion2},
      {"Tunnel axis degeneracy and tight room labels", criterion3},
      {"z-rotation label equals adjoint-conjugated label", criterion4},
      {"Analytic loss gradients match finite differences", criterion5},
      {"Cholesky head yields symmetric covariances above epsilon", criterion6},
      {"Trained predictor beats the mean-covariance baseline", criterion7},
      {"Covariance-weighted fusion beats fixed covariance", criterion8},
      {"Closed-form spot values", criterion9},
      {"CLI outputs are deterministic", criterion10},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      which.push_back(std::atoi(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--criterion N]\n";
      return 1;
    }
  }
  if (which.empty())
    for (int i = 1; i <= static_cast<int>(criteria().size()); ++i) which.push_back(i);

  bool all = true;
  for (int n : which) {
    if (n < 1 || n > static_cast<int>(criteria().size())) {
      std::cerr << "no criterion " << n << '\n';
      return 1;
    }
    const auto& [name, fn] = criteria()[static_cast<std::size_t>(n - 1)];
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " - " << name << ": " << o.detail
              << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
