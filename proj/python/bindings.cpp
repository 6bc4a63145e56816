#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <iostream>

#include "icpcov/cli.hpp"
#include "icpcov/dataio.hpp"
#include "icpcov/error.hpp"
#include "icpcov/fusion.hpp"
#include "icpcov/mc_dataset.hpp"
#include "icpcov/metrics.hpp"
#include "icpcov/predictor.hpp"
#include "icpcov/registration.hpp"
#include "icpcov/version.hpp"

namespace py = pybind11;
using namespace icpcov;

using PointsArray = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

namespace {

Points to_points(const PointsArray& a) {
  Points out(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) out[static_cast<std::size_t>(i)] = a.row(i).transpose();
  return out;
}

PointsArray to_array(const Points& p) {
  PointsArray out(static_cast<Eigen::Index>(p.size()), 3);
  for (std::size_t i = 0; i < p.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = p[i].transpose();
  return out;
}

PointCloud to_cloud(const PointsArray& a) { return {to_points(a), {}}; }

Pose to_pose(const Eigen::Matrix4d& M) {
  Pose T;
  T.R = M.topLeftCorner<3, 3>();
  T.t = M.topRightCorner<3, 1>();
  if (!T.is_valid(1e-6)) throw Error(ErrorCode::InvalidArgument, "pose rotation block is not a rotation");
  return T;
}

std::vector<Pose> to_poses(const std::vector<Eigen::Matrix4d>& ms) {
  std::vector<Pose> out;
  out.reserve(ms.size());
  for (const auto& m : ms) out.push_back(to_pose(m));
  return out;
}

std::vector<Eigen::Matrix4d> to_matrices(const std::vector<Pose>& ps) {
  std::vector<Eigen::Matrix4d> out;
  out.reserve(ps.size());
  for (const auto& p : ps) out.push_back(p.matrix());
  return out;
}

}  // namespace

PYBIND11_MODULE(_icpcov, m) {
  m.doc() = "ICP covariance labelling, prediction and fusion";
  m.attr("__version__") = ICPCOV_VERSION;

  static py::exception<Error> error(m, "IcpcovError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetObject(error.ptr(), py::make_tuple(e.what(), std::string(to_string(e.code()))).ptr());
    }
  });

  // Lie group
  m.def("exp_se3", [](const Vector6d& xi) { return exp_se3(xi).matrix(); }, py::arg("xi"),
        "4x4 transform for a twist (u, w).");
  m.def("log_se3", [](const Eigen::Matrix4d& T) { return Vector6d(log_se3(to_pose(T))); }, py::arg("T"));
  m.def("adjoint", [](const Eigen::Matrix4d& T) { return Matrix6d(adjoint(to_pose(T))); }, py::arg("T"));

  // Point clouds
  m.def("voxel_downsample", [](const PointsArray& p, double voxel) {
    return to_array(voxel_downsample(to_cloud(p), voxel).points);
  }, py::arg("points"), py::arg("voxel"));
  m.def("estimate_normals", [](const PointsArray& p, int k) {
    return to_array(estimate_normals(to_cloud(p), k).normals);
  }, py::arg("points"), py::arg("k") = kDefaultNormalNeighbors);

  m.def("synth_scene", [](const std::string& kind, std::uint64_t seed, double length, double width, double height,
                          double point_density) {
    SceneSpec s;
    s.kind = parse_scene_kind(kind);
    s.seed = seed;
    s.length = length;
    s.width = width;
    s.height = height;
    s.point_density = point_density;
    return to_array(synth_scene(s).cloud.points);
  }, py::arg("kind"), py::arg("seed") = 0, py::arg("length") = 20.0, py::arg("width") = 12.0, py::arg("height") = 4.0,
        py::arg("point_density") = 20.0, "Points of a synthetic tunnel, room, corridor or plane.");

  // Registration
  m.def("icp", [](const PointsArray& source, const PointsArray& target, const Eigen::Matrix4d& init,
                  int max_iterations, double max_corr_dist) {
    IcpConfig cfg;
    cfg.max_iterations = max_iterations;
    cfg.max_corr_dist = max_corr_dist;
    const auto r = icp_point_to_plane(to_cloud(source), estimate_normals(to_cloud(target)), to_pose(init), cfg);
    py::dict d;
    d["pose"] = r.pose.matrix();
    d["converged"] = r.converged;
    d["iterations"] = r.iterations;
    d["rmse"] = r.final_rmse;
    d["degenerate"] = r.degenerate;
    return d;
  }, py::arg("source"), py::arg("target"), py::arg("init") = Eigen::Matrix4d::Identity().eval(),
        py::arg("max_iterations") = 30, py::arg("max_corr_dist") = 2.0, "Point-to-plane ICP; target normals are estimated.");

  m.def("mc_covariance", [](const PointsArray& scan, const PointsArray& map, const Eigen::Matrix4d& gt, int n_samples,
                            std::uint64_t seed) {
    PerturbConfig p;
    p.n_samples = n_samples;
    const auto s = mc_covariance(to_cloud(scan), estimate_normals(to_cloud(map)), to_pose(gt), p, IcpConfig{}, seed);
    py::dict d;
    d["label"] = Matrix6d(s.label);
    d["n_samples"] = s.n_samples;
    d["n_converged"] = s.n_converged;
    return d;
  }, py::arg("scan"), py::arg("map"), py::arg("gt") = Eigen::Matrix4d::Identity().eval(), py::arg("n_samples") = 64,
        py::arg("seed") = 0, "Monte Carlo registration covariance of a scan against a map.");

  // Predictor
  m.def("kl_divergence", [](const Matrix6d& a, const Matrix6d& b) { return kl_divergence(a, b); });
  m.def("huber", &huber, py::arg("delta"), py::arg("delta0"));
  m.def("sampling_weights", [](const std::vector<Matrix6d>& labels, double floor_fraction) {
    const std::vector<Cov6> l(labels.begin(), labels.end());
    return sampling_weights(l, floor_fraction);
  }, py::arg("labels"), py::arg("floor_fraction") = 0.05);
  m.def("extract_features", [](const PointsArray& p) { return extract_features(to_cloud(p)); }, py::arg("points"));

  py::class_<ModelParams>(m, "Model")
      .def_static("load", [](const std::string& path) { return load_model(std::filesystem::path(path)); })
      .def("save", [](const ModelParams& mp, const std::string& path) { save_model(std::filesystem::path(path), mp); })
      .def("predict", [](const ModelParams& mp, const PointsArray& p) { return Matrix6d(predict(mp, to_cloud(p))); })
      .def_readonly("epsilon", &ModelParams::epsilon)
      .def_readonly("loss_history", &ModelParams::loss_history);

  // Fusion and metrics
  m.def("run_filter", [](const std::vector<double>& times, const std::vector<Eigen::Matrix4d>& poses,
                         const std::vector<Matrix6d>& covs) {
    if (times.size() != poses.size() || covs.size() != poses.size())
      throw Error(ErrorCode::LengthMismatch, "times, poses and covs must have equal length");
    if (poses.empty()) return std::vector<Eigen::Matrix4d>{};
    std::vector<TimedMeasurement> ms;
    for (std::size_t i = 0; i < poses.size(); ++i) ms.push_back({times[i], to_pose(poses[i]), covs[i]});
    return to_matrices(run_filter(ms, make_initial_state(ms.front().pose, times.front())));
  }, py::arg("times"), py::arg("poses"), py::arg("covs"), "Error-state EKF over pose measurements.");
  m.def("metric_kl", [](const Matrix6d& p, const Matrix6d& g) { return metric_kl(p, g); });
  m.def("metric_ape", [](const std::vector<Eigen::Matrix4d>& est, const std::vector<Eigen::Matrix4d>& gt,
                         std::size_t window) { return metric_ape(to_poses(est), to_poses(gt), window); },
        py::arg("est"), py::arg("gt"), py::arg("window") = kDefaultWindow);
  m.def("metric_rpe", [](const std::vector<Eigen::Matrix4d>& est, const std::vector<Eigen::Matrix4d>& gt,
                         std::size_t window) { return metric_rpe(to_poses(est), to_poses(gt), window); },
        py::arg("est"), py::arg("gt"), py::arg("window") = kDefaultWindow);

  m.def("cli", [](const std::vector<std::string>& args) {
    std::vector<std::string> argv{"icpcov"};
    argv.insert(argv.end(), args.begin(), args.end());
    py::gil_scoped_release release;
    return cli::run(argv, std::cout, std::cerr);
  }, py::arg("args"), "Runs a CLI subcommand and returns its exit code.");
}
