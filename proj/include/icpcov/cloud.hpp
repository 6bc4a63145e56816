#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "icpcov/liegroup.hpp"

namespace icpcov {

using Points = std::vector<Eigen::Vector3d>;

/// Points in meters, optionally with unit normals (same length when present).
struct PointCloud {
  Points points;
  Points normals;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty() && normals.size() == points.size(); }
};

/// Centroid per occupied voxel (voxel id = floor(coord / voxel)), ordered by
/// voxel id. Normals, when present, are averaged and renormalized.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

PointCloud transform_cloud(const PointCloud& cloud, const Pose& T);

struct Neighbor {
  std::uint32_t index = 0;
  double distance = 0.0;
};

/// Exact kd-tree over a fixed point set. Ties are broken by lowest point id.
class NnIndex {
 public:
  explicit NnIndex(const Points& points);
  explicit NnIndex(const PointCloud& cloud) : NnIndex(cloud.points) {}

  Neighbor nearest(const Eigen::Vector3d& q) const;
  /// The k nearest points sorted by (distance, id); fewer if the index is smaller.
  std::vector<Neighbor> knn(const Eigen::Vector3d& q, std::size_t k) const;

  std::size_t size() const { return points_.size(); }
  const Points& points() const { return points_; }

 private:
  struct Node {
    std::uint32_t begin, end;  // range into order_
    std::int32_t left = -1, right = -1;
    int axis = -1;             // -1 for leaves
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  template <class Visitor>
  void search(std::int32_t node, const Eigen::Vector3d& q, Visitor& visit) const;

  Points points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

NnIndex build_index(const PointCloud& cloud);

constexpr int kDefaultNormalNeighbors = 10;

/// PCA normals from k nearest neighbours (the point itself included), oriented
/// towards the sensor origin (0,0,0). Throws TooFewPoints when size < k or k < 3.
PointCloud estimate_normals(const PointCloud& cloud, int k = kDefaultNormalNeighbors);

/// Throws if any coordinate is non-finite or a normal is not unit length.
void validate(const PointCloud& cloud);

}  // namespace icpcov
