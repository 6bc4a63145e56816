#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "icpcov/error.hpp"
#include "icpcov/predictor.hpp"

namespace icpcov {

namespace {

struct EigenFeatures {
  Eigen::Vector3d lambda = Eigen::Vector3d::Zero();  // descending
  double linearity = 0.0, planarity = 0.0, sphericity = 0.0;
};

EigenFeatures eigen_features(const Points& pts, const std::vector<std::uint32_t>& idx) {
  EigenFeatures f;
  if (idx.size() < 3) return f;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (auto i : idx) mean += pts[i];
  mean /= static_cast<double>(idx.size());
  Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
  for (auto i : idx) {
    const Eigen::Vector3d d = pts[i] - mean;
    S += d * d.transpose();
  }
  S /= static_cast<double>(idx.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(S, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d ev = eig.eigenvalues().cwiseMax(0.0);  // ascending
  f.lambda = Eigen::Vector3d(ev[2], ev[1], ev[0]);
  if (f.lambda[0] > 0.0) {
    f.linearity = (f.lambda[0] - f.lambda[1]) / f.lambda[0];
    f.planarity = (f.lambda[1] - f.lambda[2]) / f.lambda[0];
    f.sphericity = f.lambda[2] / f.lambda[0];
  }
  return f;
}

double height_spread(const Points& pts, const std::vector<std::uint32_t>& idx) {
  if (idx.size() < 2) return 0.0;
  double mean = 0.0;
  for (auto i : idx) mean += pts[i].z();
  mean /= static_cast<double>(idx.size());
  double var = 0.0;
  for (auto i : idx) var += (pts[i].z() - mean) * (pts[i].z() - mean);
  return std::sqrt(var / static_cast<double>(idx.size()));
}

}  // namespace

int azimuth_sector(const Eigen::Vector3d& p, int sectors) {
  const double a = std::atan2(p.y(), p.x());
  const int j = static_cast<int>(std::floor(sectors * (a + std::numbers::pi) / (2.0 * std::numbers::pi)));
  return std::clamp(j, 0, sectors - 1);
}

Eigen::VectorXd extract_features(const PointCloud& scan, const FeatureConfig& cfg) {
  if (scan.empty()) throw Error(ErrorCode::EmptyCloud, "cannot describe an empty scan");
  if (cfg.sectors < 1) throw Error(ErrorCode::InvalidArgument, "need at least one sector");

  const Points& pts = scan.points;
  Points estimated;
  const Points* normals = nullptr;
  if (scan.has_normals()) {
    normals = &scan.normals;
  } else if (scan.size() >= static_cast<std::size_t>(std::max(cfg.normal_neighbors, 3))) {
    estimated = estimate_normals(scan, cfg.normal_neighbors).normals;
    normals = &estimated;
  }

  Eigen::VectorXd f = Eigen::VectorXd::Zero(cfg.dimension());
  std::vector<std::uint32_t> all(pts.size());
  std::vector<std::vector<std::uint32_t>> by_sector(static_cast<std::size_t>(cfg.sectors));
  for (std::uint32_t i = 0; i < pts.size(); ++i) {
    all[i] = i;
    by_sector[static_cast<std::size_t>(azimuth_sector(pts[i], cfg.sectors))].push_back(i);
  }

  const EigenFeatures g = eigen_features(pts, all);
  double range_sum = 0.0;
  for (const auto& p : pts) range_sum += p.norm();
  f[0] = static_cast<double>(pts.size());
  f.segment<3>(1) = g.lambda;
  f[4] = range_sum / static_cast<double>(pts.size());
  f[5] = g.linearity;
  f[6] = g.planarity;
  f[7] = g.sphericity;
  f[8] = height_spread(pts, all);

  for (int j = 0; j < cfg.sectors; ++j) {
    const auto& idx = by_sector[static_cast<std::size_t>(j)];
    if (idx.empty()) continue;
    const int o = FeatureConfig::kGlobal + FeatureConfig::kPerSector * j;
    double rsum = 0.0, nz = 0.0;
    for (auto i : idx) {
      rsum += pts[i].norm();
      if (normals) nz += (*normals)[i].z();
    }
    const auto count = static_cast<double>(idx.size());
    const EigenFeatures e = eigen_features(pts, idx);
    f[o + 0] = std::log1p(count);
    f[o + 1] = rsum / count;
    f[o + 2] = e.linearity;
    f[o + 3] = e.planarity;
    f[o + 4] = e.sphericity;
    f[o + 5] = normals ? nz / count : 0.0;
    f[o + 6] = height_spread(pts, idx);
  }
  return f;
}

}  // namespace icpcov
