#pragma once

#include <string>
#include <vector>

#include "icpcov/cloud.hpp"
#include "icpcov/liegroup.hpp"

namespace icpcov {

/// Ordered scans with ground-truth sensor poses (world <- sensor).
class ScanSequence {
 public:
  virtual ~ScanSequence() = default;

  virtual std::size_t size() const = 0;
  virtual PointCloud scan(std::size_t i) const = 0;
  virtual const Pose& pose(std::size_t i) const = 0;
  virtual double timestamp(std::size_t i) const = 0;
  /// Where the scan lives on disk; empty for in-memory sequences.
  virtual std::string scan_path(std::size_t /*i*/) const { return {}; }
};

class InMemorySequence final : public ScanSequence {
 public:
  InMemorySequence() = default;
  InMemorySequence(std::vector<PointCloud> scans, std::vector<Pose> poses, std::vector<double> times = {});

  std::size_t size() const override { return scans_.size(); }
  PointCloud scan(std::size_t i) const override { return scans_.at(i); }
  const Pose& pose(std::size_t i) const override { return poses_.at(i); }
  double timestamp(std::size_t i) const override { return times_.at(i); }

  const std::vector<PointCloud>& scans() const { return scans_; }
  const std::vector<Pose>& poses() const { return poses_; }

 private:
  std::vector<PointCloud> scans_;
  std::vector<Pose> poses_;
  std::vector<double> times_;
};

}  // namespace icpcov
