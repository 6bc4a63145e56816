#include <CLI11.hpp>
#include <Eigen/Core>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "icpcov/cli.hpp"
#include "icpcov/dataio.hpp"
#include "icpcov/error.hpp"
#include "icpcov/fusion.hpp"
#include "icpcov/mc_dataset.hpp"
#include "icpcov/metrics.hpp"
#include "icpcov/predictor.hpp"
#include "icpcov/records.hpp"
#include "icpcov/version.hpp"

namespace icpcov::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

ordered_json versions() {
  ordered_json v;
  v["icpcov"] = ICPCOV_VERSION;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  v["cli11"] = CLI11_VERSION;
  v["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_PATCH);
#if defined(__clang__)
  v["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  v["compiler"] = std::string("gcc ") + __VERSION__;
#endif
  return v;
}

int exit_code_for(const Error& e) {
  if (is_numerical(e.code())) return kNumericalFailure;
  if (e.code() == ErrorCode::InvalidArgument) return kUsage;
  return kDataError;
}

/// One command invocation: its config echo, outcome details and manifest path.
struct Run {
  std::string command;
  ordered_json config = ordered_json::object();
  ordered_json outcome = ordered_json::object();
  fs::path manifest;
  std::string started_at;
};

void write_manifest(const Run& r, int code, const std::string& message) {
  if (r.manifest.empty()) return;
  ordered_json m;
  m["command"] = r.command;
  m["config"] = r.config;
  m["versions"] = versions();
  ordered_json outcome;
  outcome["status"] = code == kOk ? "ok" : "error";
  outcome["exit_code"] = code;
  if (!message.empty()) outcome["message"] = message;
  for (const auto& [k, v] : r.outcome.items()) outcome[k] = v;
  m["outcome"] = outcome;
  m["started_at"] = r.started_at;
  m["finished_at"] = utc_now();
  std::error_code ec;
  if (r.manifest.has_parent_path()) fs::create_directories(r.manifest.parent_path(), ec);
  std::ofstream os(r.manifest);
  if (os) os << m.dump(2) << '\n';
}

fs::path default_manifest(const std::string& out) { return out.empty() ? fs::path{} : fs::path(out + ".manifest.json"); }

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fs::path resolve_scan_path(const fs::path& dataset_file, const std::string& scan_path) {
  if (scan_path.empty()) throw Error(ErrorCode::MalformedFile, "record has no scan_path");
  const fs::path p(scan_path);
  if (p.is_absolute() || fs::exists(p)) return p;
  const fs::path alt = dataset_file.parent_path() / p;
  if (fs::exists(alt)) return alt;
  throw Error(ErrorCode::IoError, "scan not found: " + scan_path);
}

PointCloud load_scan(const fs::path& dataset_file, const std::string& scan_path, double scan_voxel) {
  const auto scan = read_velodyne_bin(resolve_scan_path(dataset_file, scan_path));
  return scan_voxel > 0 ? voxel_downsample(scan.cloud, scan_voxel) : scan.cloud;
}

template <class T>
std::vector<T> select_split(const std::vector<T>& items, const std::string& split) {
  if (split == "all") return items;
  auto s = split_dataset(items);
  if (split == "train") return s.train;
  if (split == "test") return s.test;
  return s.eval;
}

/// Covariance for every frame: the record with that id, else the most recent
/// earlier record, else the first record.
std::vector<Cov6> per_frame_covariances(const std::vector<CovRecord>& records, std::size_t frames) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "covariance file has no records");
  std::map<std::int64_t, Cov6> by_id;
  for (const auto& r : records) by_id[r.scan_id] = r.cov;
  std::vector<Cov6> out;
  out.reserve(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    auto it = by_id.upper_bound(static_cast<std::int64_t>(k));
    out.push_back(it == by_id.begin() ? it->second : std::prev(it)->second);
  }
  return out;
}

Cov6 mean_covariance(const std::vector<Cov6>& covs) {
  Cov6 m = Cov6::Zero();
  for (const auto& c : covs) m += c;
  return m / static_cast<double>(covs.size());
}

std::vector<double> frame_times(const std::string& times_path, std::size_t frames) {
  if (!times_path.empty()) {
    auto t = read_times(times_path);
    if (t.size() != frames) throw Error(ErrorCode::LengthMismatch, "times file length differs from trajectory");
    return t;
  }
  std::vector<double> t(frames);
  for (std::size_t k = 0; k < frames; ++k) t[k] = static_cast<double>(k) / kLidarRateHz;
  return t;
}

std::ofstream open_csv(const fs::path& path) {
  ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  os << std::setprecision(17);
  return os;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct SynthOpts {
  std::string out, seq = "00", kind = "kitti", scene = "room";
  std::size_t frames = 300;
  std::uint64_t seed = 0;
};

void cmd_synth(const SynthOpts& o, Run& run, std::ostream& out) {
  const fs::path dir(o.out);
  fs::create_directories(dir);
  if (o.kind == "kitti") {
    SequenceSpec spec;
    spec.frames = o.frames;
    spec.seed = o.seed;
    const auto seq = synth_sequence(spec);
    write_kitti_sequence(dir, o.seq, seq);
    run.outcome["frames"] = seq.size();
    out << "wrote " << seq.size() << " scans to " << (dir / "sequences" / o.seq).string() << '\n';
  } else if (o.kind == "trajectory") {
    const double dt = 1.0 / kLidarRateHz;
    const auto gt = synth_trajectory(o.frames, dt, mix_seed(o.seed, 1));
    const auto covs = heteroscedastic_covariances(o.frames, NoiseRegimes::defaults(), mix_seed(o.seed, 2));
    const auto meas = simulate_icp_measurements(gt, covs, mix_seed(o.seed, 3));
    std::vector<Pose> meas_poses;
    std::vector<CovRecord> recs;
    for (std::size_t k = 0; k < meas.size(); ++k) {
      meas_poses.push_back(meas[k].pose);
      recs.push_back({static_cast<std::int64_t>(k), covs[k], {}});
    }
    write_trajectory((dir / "gt.txt").string(), gt);
    write_trajectory((dir / "meas.txt").string(), meas_poses);
    write_cov_records(dir / "cov.jsonl", recs);
    std::ofstream times(dir / "times.txt");
    times << std::setprecision(17);
    for (std::size_t k = 0; k < o.frames; ++k) times << static_cast<double>(k) * dt << '\n';
    run.outcome["frames"] = o.frames;
    out << "wrote gt.txt, meas.txt, cov.jsonl, times.txt to " << dir.string() << '\n';
  } else {
    SceneSpec spec;
    spec.kind = parse_scene_kind(o.scene);
    spec.seed = o.seed;
    const auto scene = synth_scene(spec);
    const fs::path file = dir / (o.scene + ".xyz");
    write_xyz(file, scene.cloud);
    run.outcome["points"] = scene.cloud.size();
    run.outcome["description"] = scene.description;
    out << scene.description << '\n';
  }
}

struct DatasetOpts {
  std::string input, seq = "00", scenario = "prebuilt", out;
  std::size_t stride = kDefaultStride;
  int samples = 64;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

void cmd_dataset(const DatasetOpts& o, Run& run, std::ostream& out) {
  if (o.threads > 0) set_worker_threads(o.threads);
  const KittiSequence seq(open_kitti_sequence(o.input, o.seq));
  const Scenario scenario = parse_scenario(o.scenario);
  PerturbConfig pcfg;
  pcfg.n_samples = o.samples;
  pcfg.validate();
  const auto result =
      generate_dataset(seq, o.stride, MapConfig::for_scenario(scenario), pcfg, IcpConfig{}, o.seed, scenario);
  ensure_parent(o.out);
  write_dataset(fs::path(o.out), result.samples);
  ordered_json failures = ordered_json::array();
  for (const auto& f : result.failures) failures.push_back({{"scan_id", f.scan_id}, {"reason", f.reason}});
  run.outcome["samples"] = result.samples.size();
  run.outcome["failures"] = failures;
  out << "labelled " << result.samples.size() << " scans (" << result.failures.size() << " skipped) -> " << o.out
      << '\n';
  if (result.samples.empty()) throw Error(ErrorCode::EmptyInput, "no scan could be labelled");
}

struct TrainOpts {
  std::string input, out, split = "train";
  int epochs = 100;
  std::uint64_t seed = 0;
  double scan_voxel = 0.1;
  bool no_augment = false;
};

void cmd_train(const TrainOpts& o, Run& run, std::ostream& out) {
  const fs::path data(o.input);
  const auto samples = select_split(read_dataset(data), o.split);
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "the selected split is empty");
  std::vector<TrainingExample> examples;
  for (const auto& s : samples) examples.push_back({load_scan(data, s.scan_path, o.scan_voxel), s.label});
  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.seed = o.seed;
  cfg.augment = !o.no_augment;
  const ModelParams model = train(examples, cfg);
  ensure_parent(o.out);
  save_model(fs::path(o.out), model);
  run.outcome["examples"] = examples.size();
  run.outcome["final_loss"] = model.loss_history.back();
  out << "trained on " << examples.size() << " scans, final loss " << model.loss_history.back() << " -> " << o.out
      << '\n';
}

struct PredictOpts {
  std::string model, input, out, split = "all";
  double scan_voxel = 0.1;
  std::uint64_t seed = 0;
};

void cmd_predict(const PredictOpts& o, Run& run, std::ostream& out) {
  const ModelParams model = load_model(fs::path(o.model));
  const fs::path data(o.input);
  const auto samples = select_split(read_dataset(data), o.split);
  std::vector<CovRecord> preds;
  for (const auto& s : samples) {
    preds.push_back({s.scan_id, predict(model, load_scan(data, s.scan_path, o.scan_voxel)), s.scan_path});
  }
  ensure_parent(o.out);
  write_cov_records(o.out, preds);
  run.outcome["predictions"] = preds.size();
  out << "predicted " << preds.size() << " covariances -> " << o.out << '\n';
}

struct FuseOpts {
  std::string input, cov, out, mode = "weighted", times;
  std::uint64_t seed = 0;
};

void cmd_fuse(const FuseOpts& o, Run& run, std::ostream& out) {
  const auto meas = read_pose_file(o.input);
  if (meas.empty()) throw Error(ErrorCode::EmptyInput, "no measurements");
  auto covs = per_frame_covariances(read_cov_records(o.cov), meas.size());
  if (o.mode == "fixed") std::fill(covs.begin(), covs.end(), mean_covariance(covs));
  const auto t = frame_times(o.times, meas.size());
  std::vector<TimedMeasurement> tm;
  for (std::size_t k = 0; k < meas.size(); ++k) tm.push_back({t[k], meas[k], covs[k]});
  const auto traj = run_filter(tm, make_initial_state(meas.front(), t.front()));
  ensure_parent(o.out);
  write_trajectory(o.out, traj);
  run.outcome["frames"] = traj.size();
  out << "fused " << traj.size() << " poses (" << o.mode << ") -> " << o.out << '\n';
}

struct EvalOpts {
  std::string metric = "ape", input, gt, baseline, out;
  std::size_t window = kDefaultWindow;
  std::uint64_t seed = 0;
};

void cmd_eval(const EvalOpts& o, Run& run, std::ostream& out) {
  auto csv = open_csv(o.out);
  if (o.metric == "kl" || o.metric == "mae") {
    const auto preds = read_cov_records(o.input);
    std::map<std::int64_t, Cov6> gt_by_id;
    for (const auto& r : read_cov_records(o.gt)) gt_by_id[r.scan_id] = r.cov;
    std::vector<Cov6> p, g;
    std::vector<std::int64_t> ids;
    for (const auto& r : preds) {
      const auto it = gt_by_id.find(r.scan_id);
      if (it == gt_by_id.end()) throw Error(ErrorCode::MalformedFile, "no label for scan " + std::to_string(r.scan_id));
      p.push_back(r.cov);
      g.push_back(it->second);
      ids.push_back(r.scan_id);
    }
    const auto rep = evaluate_covariances(p, g);
    if (o.metric == "kl") {
      csv << "scan_id,kl\n";
      for (std::size_t i = 0; i < ids.size(); ++i) csv << ids[i] << ',' << rep.kl[i] << '\n';
      csv << "mean," << rep.kl_mean << '\n';
      run.outcome["kl_mean"] = rep.kl_mean;
      out << "KL mean " << rep.kl_mean << " over " << ids.size() << " scans\n";
    } else {
      csv << "component,mae\n" << "x," << rep.mae_x << "\ny," << rep.mae_y << "\nyaw," << rep.mae_yaw << '\n';
      run.outcome["mae"] = {{"x", rep.mae_x}, {"y", rep.mae_y}, {"yaw", rep.mae_yaw}};
      out << "MAE x " << rep.mae_x << ", y " << rep.mae_y << ", yaw " << rep.mae_yaw << '\n';
    }
    return;
  }
  const auto est = read_pose_file(o.input);
  const auto gt = read_pose_file(o.gt);
  std::vector<Pose> base;
  if (!o.baseline.empty()) base = read_pose_file(o.baseline);
  const auto rep = evaluate_trajectories(est, gt, o.window, base);
  const bool ape = o.metric == "ape";
  const auto& values = ape ? rep.ape : rep.rpe;
  const auto windows = evaluation_windows(est.size(), o.window);
  std::vector<double> base_values;
  if (rep.has_baseline) base_values = ape ? metric_ape(base, gt, o.window) : metric_rpe(base, gt, o.window);
  csv << "window,start,end," << o.metric << (rep.has_baseline ? ",baseline\n" : "\n");
  for (std::size_t i = 0; i < values.size(); ++i) {
    csv << i << ',' << windows[i].first << ',' << windows[i].second << ',' << values[i];
    if (rep.has_baseline) csv << ',' << base_values[i];
    csv << '\n';
  }
  const double mean = ape ? rep.ape_mean : rep.rpe_mean;
  csv << "mean,,," << mean;
  if (rep.has_baseline) csv << ',' << (ape ? rep.baseline_ape_mean : rep.baseline_rpe_mean);
  csv << '\n';
  run.outcome[o.metric + "_mean"] = mean;
  out << o.metric << " mean " << mean;
  if (rep.has_baseline) {
    const double imp = ape ? rep.ape_improvement_pct : rep.rpe_improvement_pct;
    csv << "improvement_pct,,," << imp << '\n';
    run.outcome["improvement_pct"] = imp;
    out << ", improvement vs baseline " << imp << " %";
  }
  out << '\n';
}

struct PlotOpts {
  std::string input, cov, out;
  std::uint64_t seed = 0;
};

void cmd_plot(const PlotOpts& o, Run& run, std::ostream& out) {
  const auto traj = read_pose_file(o.input);
  const auto covs = per_frame_covariances(read_cov_records(o.cov), traj.size());
  auto csv = open_csv(o.out);
  csv << "frame,x,y,trace_xy\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    csv << k << ',' << traj[k].t.x() << ',' << traj[k].t.y() << ',' << covs[k](0, 0) + covs[k](1, 1) << '\n';
  }
  run.outcome["frames"] = traj.size();
  out << "wrote " << traj.size() << " rows -> " << o.out << '\n';
}

// ---------------------------------------------------------------------------
// Wiring
// ---------------------------------------------------------------------------

template <class T>
void echo(ordered_json& cfg, const std::string& key, const T& value) {
  cfg[key] = value;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monte Carlo ICP covariance labels, covariance prediction and covariance-weighted pose fusion",
               "icpcov"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ICPCOV_VERSION);

  std::string manifest;
  Run run;
  std::function<void()> action;

  const auto common = [&](CLI::App* sub, std::uint64_t& seed) {
    sub->add_option("--seed", seed, "Random seed")->capture_default_str();
    sub->add_option("--manifest", manifest, "Run manifest path (default: <out>.manifest.json)");
  };
  const std::vector<std::string> scene_kinds{"room", "tunnel", "corridor", "plane"};

  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus, trajectory or scene");
  synth->add_option("--out", so.out, "Output directory")->required();
  synth->add_option("--kind", so.kind)->check(CLI::IsMember({"kitti", "trajectory", "scene"}))->capture_default_str();
  synth->add_option("--seq", so.seq, "Sequence name for the KITTI layout")->capture_default_str();
  synth->add_option("--frames", so.frames)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--scene", so.scene)->check(CLI::IsMember(scene_kinds))->capture_default_str();
  common(synth, so.seed);

  DatasetOpts dso;
  auto* dataset = app.add_subcommand("dataset", "Monte Carlo covariance labels for a KITTI-layout sequence");
  dataset->add_option("--input", dso.input, "KITTI odometry root")->required();
  dataset->add_option("--seq", dso.seq)->capture_default_str();
  dataset->add_option("--scenario", dso.scenario)->check(CLI::IsMember({"prebuilt", "slam"}))->capture_default_str();
  dataset->add_option("--stride", dso.stride)->check(CLI::PositiveNumber)->capture_default_str();
  dataset->add_option("--samples", dso.samples)->check(CLI::Range(2, 1 << 20))->capture_default_str();
  dataset->add_option("--out", dso.out, "Dataset JSON Lines file")->required();
  dataset->add_option("--threads", dso.threads, "Worker threads (0 = hardware)")->capture_default_str();
  common(dataset, dso.seed);

  TrainOpts to;
  auto* trn = app.add_subcommand("train", "Train the covariance predictor");
  trn->add_option("--input", to.input, "Dataset JSON Lines file")->required();
  trn->add_option("--out", to.out, "Model file")->required();
  trn->add_option("--epochs", to.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  trn->add_option("--split", to.split)->check(CLI::IsMember({"train", "test", "eval", "all"}))->capture_default_str();
  trn->add_option("--scan-voxel", to.scan_voxel)->capture_default_str();
  trn->add_flag("--no-augment", to.no_augment, "Disable yaw augmentation");
  common(trn, to.seed);

  PredictOpts po;
  auto* pred = app.add_subcommand("predict", "Predict covariances for dataset scans");
  pred->add_option("--model", po.model)->required();
  pred->add_option("--input", po.input, "Dataset JSON Lines file")->required();
  pred->add_option("--out", po.out, "Prediction JSON Lines file")->required();
  pred->add_option("--split", po.split)->check(CLI::IsMember({"train", "test", "eval", "all"}))->capture_default_str();
  pred->add_option("--scan-voxel", po.scan_voxel)->capture_default_str();
  common(pred, po.seed);

  FuseOpts fo;
  auto* fuse = app.add_subcommand("fuse", "Fuse ICP poses with per-frame covariances");
  fuse->add_option("--input", fo.input, "Measured poses (KITTI format)")->required();
  fuse->add_option("--cov", fo.cov, "Covariance JSON Lines keyed by frame")->required();
  fuse->add_option("--out", fo.out, "Fused trajectory")->required();
  fuse->add_option("--mode", fo.mode)->check(CLI::IsMember({"weighted", "fixed"}))->capture_default_str();
  fuse->add_option("--times", fo.times, "Timestamps file (default 10 Hz)");
  common(fuse, fo.seed);

  EvalOpts eo;
  auto* eval = app.add_subcommand("eval", "Covariance or trajectory metrics");
  eval->add_option("--metric", eo.metric)->check(CLI::IsMember({"kl", "mae", "ape", "rpe"}))->capture_default_str();
  eval->add_option("--input", eo.input, "Predictions (kl, mae) or estimated trajectory (ape, rpe)")->required();
  eval->add_option("--gt", eo.gt, "Labels or ground-truth trajectory")->required();
  eval->add_option("--baseline", eo.baseline, "Baseline trajectory for improvement percentages");
  eval->add_option("--window", eo.window)->check(CLI::Range(std::size_t{2}, std::size_t{1} << 30))->capture_default_str();
  eval->add_option("--out", eo.out, "Report CSV")->required();
  common(eval, eo.seed);

  PlotOpts plo;
  auto* plot = app.add_subcommand("plot-data", "Per-frame x, y and trace of the xy covariance block");
  plot->add_option("--input", plo.input, "Trajectory (KITTI format)")->required();
  plot->add_option("--cov", plo.cov, "Covariance JSON Lines keyed by frame")->required();
  plot->add_option("--out", plo.out, "CSV table")->required();
  common(plot, plo.seed);

  synth->callback([&] {
    run.command = "synth";
    auto& c = run.config;
    echo(c, "out", so.out), echo(c, "kind", so.kind), echo(c, "seq", so.seq), echo(c, "frames", so.frames);
    echo(c, "scene", so.scene), echo(c, "seed", so.seed);
    run.manifest = manifest.empty() ? fs::path(so.out) / "manifest.json" : fs::path(manifest);
    action = [&] { cmd_synth(so, run, out); };
  });
  dataset->callback([&] {
    run.command = "dataset";
    auto& c = run.config;
    echo(c, "input", dso.input), echo(c, "seq", dso.seq), echo(c, "scenario", dso.scenario);
    echo(c, "stride", dso.stride), echo(c, "samples", dso.samples), echo(c, "out", dso.out);
    echo(c, "seed", dso.seed);
    run.manifest = manifest.empty() ? default_manifest(dso.out) : fs::path(manifest);
    action = [&] { cmd_dataset(dso, run, out); };
  });
  trn->callback([&] {
    run.command = "train";
    auto& c = run.config;
    echo(c, "input", to.input), echo(c, "out", to.out), echo(c, "epochs", to.epochs), echo(c, "split", to.split);
    echo(c, "scan_voxel", to.scan_voxel), echo(c, "augment", !to.no_augment), echo(c, "seed", to.seed);
    run.manifest = manifest.empty() ? default_manifest(to.out) : fs::path(manifest);
    action = [&] { cmd_train(to, run, out); };
  });
  pred->callback([&] {
    run.command = "predict";
    auto& c = run.config;
    echo(c, "model", po.model), echo(c, "input", po.input), echo(c, "out", po.out), echo(c, "split", po.split);
    echo(c, "scan_voxel", po.scan_voxel), echo(c, "seed", po.seed);
    run.manifest = manifest.empty() ? default_manifest(po.out) : fs::path(manifest);
    action = [&] { cmd_predict(po, run, out); };
  });
  fuse->callback([&] {
    run.command = "fuse";
    auto& c = run.config;
    echo(c, "input", fo.input), echo(c, "cov", fo.cov), echo(c, "out", fo.out), echo(c, "mode", fo.mode);
    echo(c, "times", fo.times), echo(c, "seed", fo.seed);
    run.manifest = manifest.empty() ? default_manifest(fo.out) : fs::path(manifest);
    action = [&] { cmd_fuse(fo, run, out); };
  });
  eval->callback([&] {
    run.command = "eval";
    auto& c = run.config;
    echo(c, "metric", eo.metric), echo(c, "input", eo.input), echo(c, "gt", eo.gt), echo(c, "baseline", eo.baseline);
    echo(c, "window", eo.window), echo(c, "out", eo.out), echo(c, "seed", eo.seed);
    run.manifest = manifest.empty() ? default_manifest(eo.out) : fs::path(manifest);
    action = [&] { cmd_eval(eo, run, out); };
  });
  plot->callback([&] {
    run.command = "plot-data";
    auto& c = run.config;
    echo(c, "input", plo.input), echo(c, "cov", plo.cov), echo(c, "out", plo.out), echo(c, "seed", plo.seed);
    run.manifest = manifest.empty() ? default_manifest(plo.out) : fs::path(manifest);
    action = [&] { cmd_plot(plo, run, out); };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  run.started_at = utc_now();
  int code = kOk;
  std::string message;
  try {
    action();
  } catch (const Error& e) {
    code = exit_code_for(e);
    message = e.what();
  } catch (const fs::filesystem_error& e) {
    code = kDataError;
    message = e.what();
  } catch (const std::exception& e) {
    code = kDataError;
    message = e.what();
  }
  if (code != kOk) err << "icpcov " << run.command << ": " << message << '\n';
  try {
    write_manifest(run, code, message);
  } catch (const std::exception& e) {
    err << "icpcov: could not write manifest: " << e.what() << '\n';
  }
  return code;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace icpcov::cli
