#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "icpcov/cloud.hpp"
#include "icpcov/fusion.hpp"
#include "icpcov/liegroup.hpp"
#include "icpcov/sequence.hpp"

namespace icpcov {

// ---------------------------------------------------------------------------
// KITTI odometry ingestion
// ---------------------------------------------------------------------------

struct VelodyneScan {
  PointCloud cloud;
  std::size_t dropped = 0;  // non-finite points removed
};

/// Little-endian float32 quadruples (x, y, z, reflectance); reflectance is discarded.
VelodyneScan read_velodyne_bin(const std::filesystem::path& path);
void write_velodyne_bin(const std::filesystem::path& path, const PointCloud& cloud);

/// One row-major 3x4 pose per line.
std::vector<Pose> read_pose_file(const std::filesystem::path& path);
/// The `Tr:` (velodyne -> camera) line of a KITTI calib.txt.
Pose read_calib_tr(const std::filesystem::path& path);
/// Camera-frame poses converted to the sensor frame: T_w_velo = T_w_cam · Tr.
std::vector<Pose> read_poses(const std::filesystem::path& poses_path, const std::filesystem::path& calib_path);
std::vector<double> read_times(const std::filesystem::path& path);

constexpr double kLidarRateHz = 10.0;

struct SequenceHandle {
  std::vector<std::string> scan_paths;
  std::vector<Pose> poses;
  std::vector<double> timestamps;
};

/// Opens `<root>/sequences/<seq>/velodyne/*.bin` with `<root>/poses/<seq>.txt`
/// and `<root>/sequences/<seq>/calib.txt`. Timestamps default to 10 Hz when
/// times.txt is absent.
SequenceHandle open_kitti_sequence(const std::filesystem::path& root, const std::string& seq);

class KittiSequence final : public ScanSequence {
 public:
  explicit KittiSequence(SequenceHandle handle);

  std::size_t size() const override { return handle_.scan_paths.size(); }
  PointCloud scan(std::size_t i) const override;
  const Pose& pose(std::size_t i) const override { return handle_.poses.at(i); }
  double timestamp(std::size_t i) const override { return handle_.timestamps.at(i); }
  std::string scan_path(std::size_t i) const override { return handle_.scan_paths.at(i); }

  const SequenceHandle& handle() const { return handle_; }

 private:
  SequenceHandle handle_;
};

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

enum class SceneKind { Tunnel, Room, Corridor, Plane };

SceneKind parse_scene_kind(const std::string& name);
std::string to_string(SceneKind kind);

struct SceneSpec {
  SceneKind kind = SceneKind::Room;
  double length = 20.0;  // along x
  double width = 12.0;   // along y
  double height = 4.0;   // floor to top of walls
  double sensor_height = 1.5;
  double point_density = 20.0;  // points per m²
  double sensor_noise_sigma = 0.01;
  double pillar_spacing = 4.0;  // corridor only
  std::uint64_t seed = 0;

  void validate() const;
};

/// Planar patch origin + s·edge_a + t·edge_b, (s, t) ∈ [0,1]².
struct Rect {
  Eigen::Vector3d origin;
  Eigen::Vector3d edge_a;
  Eigen::Vector3d edge_b;

  double area() const { return edge_a.cross(edge_b).norm(); }
};

/// Surfaces of a scene, sensor at the origin. The plane kind lies at z = 0;
/// enclosed kinds put the floor at z = -sensor_height.
std::vector<Rect> scene_surfaces(const SceneSpec& spec);

/// Samples `rects` at `density` points/m² and applies Gaussian range noise
/// along the ray from `sensor`.
Points sample_surfaces(const std::vector<Rect>& rects, double density, double noise_sigma,
                       const Eigen::Vector3d& sensor, std::uint64_t seed);

struct SyntheticScene {
  PointCloud cloud;
  std::string description;
};

SyntheticScene synth_scene(const SceneSpec& spec);

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud);

/// A straight drive along +x through a pillared corridor that turns into a
/// featureless stretch, scanned at 10 Hz.
struct SequenceSpec {
  std::size_t frames = 300;
  double speed = 5.0;               // m/s
  double lateral_amplitude = 0.5;   // m, sinusoidal weave
  double corridor_width = 10.0;
  double wall_height = 4.0;
  double sensor_height = 1.5;
  double scan_range = 25.0;
  double point_density = 6.0;
  double sensor_noise_sigma = 0.02;
  double featureless_fraction = 0.15;  // share of the route without pillars
  std::uint64_t seed = 0;
};

InMemorySequence synth_sequence(const SequenceSpec& spec);

/// Writes a sequence in the KITTI layout with an identity calibration.
void write_kitti_sequence(const std::filesystem::path& root, const std::string& seq, const InMemorySequence& sequence);

// ---------------------------------------------------------------------------
// Trajectory simulation for filter experiments
// ---------------------------------------------------------------------------

/// Smooth planar-ish trajectory with varying speed and yaw rate, `dt` apart.
std::vector<Pose> synth_trajectory(std::size_t frames, double dt, std::uint64_t seed);

/// Two noise regimes alternating in blocks of random length.
struct NoiseRegimes {
  Cov6 low;
  Cov6 high;
  std::size_t min_block = 10;
  std::size_t max_block = 30;

  /// Low: 2 cm / 0.1°. High: 0.6 m along x, 0.15 m across, 0.5° tilt, 2° yaw.
  static NoiseRegimes defaults();
};

/// Per-frame covariances switching between the two regimes; frame 0 starts low.
std::vector<Cov6> heteroscedastic_covariances(std::size_t frames, const NoiseRegimes& regimes, std::uint64_t seed);

/// measurement_k = gt_k · exp(ξ_k), ξ_k ~ N(0, per_frame_cov_k) (sensor frame).
std::vector<Measurement> simulate_icp_measurements(std::span<const Pose> trajectory,
                                                   std::span<const Cov6> per_frame_cov, std::uint64_t seed);

}  // namespace icpcov
