#include "icpcov/cloud.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <queue>

#include "icpcov/error.hpp"

namespace icpcov {

namespace {

constexpr std::uint32_t kLeafSize = 8;

struct VoxelAccum {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal_sum = Eigen::Vector3d::Zero();
  std::size_t count = 0;
};

// Lexicographic (distance², id) ordering used for tie breaking.
inline bool closer(double d2a, std::uint32_t ia, double d2b, std::uint32_t ib) {
  return d2a < d2b || (d2a == d2b && ia < ib);
}

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) throw Error(ErrorCode::InvalidArgument, "voxel size must be positive");
  const bool normals = cloud.has_normals();
  std::map<std::array<std::int64_t, 3>, VoxelAccum> grid;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d& p = cloud.points[i];
    const std::array<std::int64_t, 3> key{static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                                          static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                                          static_cast<std::int64_t>(std::floor(p.z() / voxel))};
    VoxelAccum& acc = grid[key];
    acc.sum += p;
    if (normals) acc.normal_sum += cloud.normals[i];
    ++acc.count;
  }
  PointCloud out;
  out.points.reserve(grid.size());
  if (normals) out.normals.reserve(grid.size());
  for (const auto& [key, acc] : grid) {
    out.points.push_back(acc.sum / static_cast<double>(acc.count));
    if (normals) {
      const double n = acc.normal_sum.norm();
      out.normals.push_back(n > 0.0 ? Eigen::Vector3d(acc.normal_sum / n) : Eigen::Vector3d::UnitZ());
    }
  }
  return out;
}

PointCloud transform_cloud(const PointCloud& cloud, const Pose& T) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(T.R * p + T.t);
  out.normals.reserve(cloud.normals.size());
  for (const auto& n : cloud.normals) out.normals.push_back(T.R * n);
  return out;
}

NnIndex::NnIndex(const Points& points) : points_(points) {
  if (points_.empty()) throw Error(ErrorCode::EmptyCloud, "cannot index an empty cloud");
  order_.resize(points_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(order_.size()));
}

std::int32_t NnIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Eigen::Vector3d lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

template <class Visitor>
void NnIndex::search(std::int32_t node_id, const Eigen::Vector3d& q, Visitor& visit) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t pid = order_[i];
      visit.offer((points_[pid] - q).squaredNorm(), pid);
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::int32_t near = diff <= 0.0 ? node.left : node.right;
  const std::int32_t far = diff <= 0.0 ? node.right : node.left;
  search(near, q, visit);
  if (diff * diff <= visit.bound()) search(far, q, visit);
}

Neighbor NnIndex::nearest(const Eigen::Vector3d& q) const {
  struct Best {
    double d2 = std::numeric_limits<double>::infinity();
    std::uint32_t id = 0;
    void offer(double d, std::uint32_t i) {
      if (closer(d, i, d2, id)) {
        d2 = d;
        id = i;
      }
    }
    double bound() const { return d2; }
  } best;
  search(0, q, best);
  return {best.id, std::sqrt(best.d2)};
}

std::vector<Neighbor> NnIndex::knn(const Eigen::Vector3d& q, std::size_t k) const {
  k = std::min(k, points_.size());
  if (k == 0) return {};
  struct Entry {
    double d2;
    std::uint32_t id;
    bool operator<(const Entry& o) const { return closer(d2, id, o.d2, o.id); }
  };
  struct Heap {
    std::size_t k;
    std::priority_queue<Entry> heap;  // worst on top
    void offer(double d, std::uint32_t i) {
      if (heap.size() < k) {
        heap.push({d, i});
      } else if (closer(d, i, heap.top().d2, heap.top().id)) {
        heap.pop();
        heap.push({d, i});
      }
    }
    double bound() const {
      return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.top().d2;
    }
  } visit{k, {}};
  search(0, q, visit);
  std::vector<Neighbor> out(visit.heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = {visit.heap.top().id, std::sqrt(visit.heap.top().d2)};
    visit.heap.pop();
  }
  return out;
}

NnIndex build_index(const PointCloud& cloud) { return NnIndex(cloud.points); }

PointCloud estimate_normals(const PointCloud& cloud, int k) {
  if (k < 3 || cloud.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::TooFewPoints, "normal estimation needs at least k >= 3 points, got " +
                                             std::to_string(cloud.size()) + " with k=" + std::to_string(k));
  }
  const NnIndex index(cloud.points);
  PointCloud out;
  out.points = cloud.points;
  out.normals.resize(cloud.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = index.knn(cloud.points[i], static_cast<std::size_t>(k));
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& n : nbrs) mean += cloud.points[n.index];
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (const auto& n : nbrs) {
      const Eigen::Vector3d d = cloud.points[n.index] - mean;
      scatter += d * d.transpose();
    }
    solver.compute(scatter);
    Eigen::Vector3d normal = solver.eigenvectors().col(0).normalized();
    if (normal.dot(-cloud.points[i]) < 0.0) normal = -normal;
    out.normals[i] = normal;
  }
  return out;
}

void validate(const PointCloud& cloud) {
  for (const auto& p : cloud.points) {
    if (!p.allFinite()) throw Error(ErrorCode::InvalidArgument, "point cloud has non-finite coordinates");
  }
  if (!cloud.normals.empty()) {
    if (cloud.normals.size() != cloud.points.size())
      throw Error(ErrorCode::InvalidArgument, "normals and points differ in length");
    for (const auto& n : cloud.normals) {
      if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-6)
        throw Error(ErrorCode::InvalidArgument, "normal is not unit length");
    }
  }
}

}  // namespace icpcov
