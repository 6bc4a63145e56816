#include "icpcov/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "icpcov/error.hpp"

namespace fs = std::filesystem;

namespace icpcov {

namespace {

float decode_le_float(const unsigned char* bytes) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | bytes[i];
  return std::bit_cast<float>(bits);
}

void encode_le_float(float value, unsigned char* bytes) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) {
    bytes[i] = static_cast<unsigned char>(bits & 0xffu);
    bits >>= 8;
  }
}

// Parses exactly `count` whitespace separated doubles; false on any mismatch.
bool parse_numbers(const std::string& text, std::size_t count, std::vector<double>& out) {
  out.clear();
  const char* p = text.c_str();
  char* end = nullptr;
  while (true) {
    while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
    if (*p == '\0') break;
    const double v = std::strtod(p, &end);
    if (end == p) return false;
    out.push_back(v);
    p = end;
  }
  return out.size() == count;
}

std::ifstream open_text(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return is;
}

}  // namespace

VelodyneScan read_velodyne_bin(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() % 16 != 0) {
    throw Error(ErrorCode::MalformedFile,
                path.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of 16");
  }
  VelodyneScan scan;
  const std::size_t n = bytes.size() / 16;
  scan.cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec = bytes.data() + 16 * i;
    const Eigen::Vector3d p(decode_le_float(rec), decode_le_float(rec + 4), decode_le_float(rec + 8));
    if (!p.allFinite()) {
      ++scan.dropped;
      continue;
    }
    scan.cloud.points.push_back(p);
  }
  return scan;
}

void write_velodyne_bin(const fs::path& path, const PointCloud& cloud) {
  std::vector<unsigned char> bytes(16 * cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    unsigned char* rec = bytes.data() + 16 * i;
    for (int k = 0; k < 3; ++k) encode_le_float(static_cast<float>(cloud.points[i][k]), rec + 4 * k);
    encode_le_float(0.0f, rec + 12);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<Pose> read_pose_file(const fs::path& path) {
  std::ifstream is = open_text(path);
  std::vector<Pose> poses;
  std::string line;
  std::vector<double> values;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!parse_numbers(line, 12, values)) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": expected 12 numbers");
    }
    std::array<double, 12> row{};
    std::copy(values.begin(), values.end(), row.begin());
    poses.push_back(from_row12(row));
  }
  return poses;
}

Pose read_calib_tr(const fs::path& path) {
  std::ifstream is = open_text(path);
  std::string line;
  std::vector<double> values;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = line.substr(0, colon);
    if (key != "Tr" && key != "Tr_velo_to_cam") continue;
    if (!parse_numbers(line.substr(colon + 1), 12, values)) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": malformed Tr line");
    }
    std::array<double, 12> row{};
    std::copy(values.begin(), values.end(), row.begin());
    return from_row12(row);
  }
  throw Error(ErrorCode::ParseError, path.string() + ": no Tr line");
}

std::vector<Pose> read_poses(const fs::path& poses_path, const fs::path& calib_path) {
  const Pose Tr = read_calib_tr(calib_path);
  std::vector<Pose> poses = read_pose_file(poses_path);
  for (auto& T : poses) T = compose(T, Tr);
  return poses;
}

std::vector<double> read_times(const fs::path& path) {
  std::ifstream is = open_text(path);
  std::vector<double> times;
  std::string line;
  std::vector<double> values;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!parse_numbers(line, 1, values)) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": expected a timestamp");
    }
    times.push_back(values[0]);
  }
  return times;
}

SequenceHandle open_kitti_sequence(const fs::path& root, const std::string& seq) {
  const fs::path seq_dir = root / "sequences" / seq;
  const fs::path velo_dir = seq_dir / "velodyne";
  if (!fs::is_directory(velo_dir)) throw Error(ErrorCode::IoError, "missing directory " + velo_dir.string());

  SequenceHandle h;
  for (const auto& entry : fs::directory_iterator(velo_dir)) {
    if (entry.path().extension() == ".bin") h.scan_paths.push_back(entry.path().string());
  }
  std::sort(h.scan_paths.begin(), h.scan_paths.end());
  h.poses = read_poses(root / "poses" / (seq + ".txt"), seq_dir / "calib.txt");
  if (h.poses.size() != h.scan_paths.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(h.scan_paths.size()) + " scans but " +
                                               std::to_string(h.poses.size()) + " poses");
  }
  if (fs::exists(seq_dir / "times.txt")) {
    h.timestamps = read_times(seq_dir / "times.txt");
    if (h.timestamps.size() != h.poses.size()) throw Error(ErrorCode::LengthMismatch, "times.txt length mismatch");
  } else {
    h.timestamps.resize(h.poses.size());
    for (std::size_t i = 0; i < h.timestamps.size(); ++i) h.timestamps[i] = static_cast<double>(i) / kLidarRateHz;
  }
  for (std::size_t i = 1; i < h.timestamps.size(); ++i) {
    if (!(h.timestamps[i] > h.timestamps[i - 1])) throw Error(ErrorCode::BadTimestamps, "times.txt is not increasing");
  }
  return h;
}

KittiSequence::KittiSequence(SequenceHandle handle) : handle_(std::move(handle)) {}

PointCloud KittiSequence::scan(std::size_t i) const { return read_velodyne_bin(handle_.scan_paths.at(i)).cloud; }

InMemorySequence::InMemorySequence(std::vector<PointCloud> scans, std::vector<Pose> poses, std::vector<double> times)
    : scans_(std::move(scans)), poses_(std::move(poses)), times_(std::move(times)) {
  if (scans_.size() != poses_.size()) throw Error(ErrorCode::LengthMismatch, "scans and poses differ in length");
  if (times_.empty()) {
    times_.resize(poses_.size());
    for (std::size_t i = 0; i < times_.size(); ++i) times_[i] = static_cast<double>(i) / kLidarRateHz;
  }
  if (times_.size() != poses_.size()) throw Error(ErrorCode::LengthMismatch, "timestamps and poses differ in length");
}

// ---------------------------------------------------------------------------

SceneKind parse_scene_kind(const std::string& name) {
  if (name == "tunnel") return SceneKind::Tunnel;
  if (name == "room") return SceneKind::Room;
  if (name == "corridor") return SceneKind::Corridor;
  if (name == "plane") return SceneKind::Plane;
  throw Error(ErrorCode::InvalidArgument, "unknown scene kind '" + name + "'");
}

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::Tunnel: return "tunnel";
    case SceneKind::Room: return "room";
    case SceneKind::Corridor: return "corridor";
    case SceneKind::Plane: return "plane";
  }
  return "unknown";
}

void SceneSpec::validate() const {
  if (!(length > 0) || !(width > 0) || !(height > 0) || !(point_density > 0) || sensor_noise_sigma < 0 ||
      sensor_height < 0 || !(pillar_spacing > 0)) {
    throw Error(ErrorCode::InvalidArgument, "scene dimensions and density must be positive");
  }
}

namespace {

Rect rect(const Eigen::Vector3d& o, const Eigen::Vector3d& a, const Eigen::Vector3d& b) { return {o, a, b}; }

// Four vertical faces and the top of an axis-aligned box standing on z = z0.
void add_box(std::vector<Rect>& out, const Eigen::Vector3d& center_xy, const Eigen::Vector3d& size, double z0) {
  const double hx = 0.5 * size.x(), hy = 0.5 * size.y();
  const Eigen::Vector3d up(0, 0, size.z());
  const Eigen::Vector3d c(center_xy.x(), center_xy.y(), z0);
  out.push_back(rect(c + Eigen::Vector3d(-hx, -hy, 0), Eigen::Vector3d(size.x(), 0, 0), up));
  out.push_back(rect(c + Eigen::Vector3d(-hx, hy, 0), Eigen::Vector3d(size.x(), 0, 0), up));
  out.push_back(rect(c + Eigen::Vector3d(-hx, -hy, 0), Eigen::Vector3d(0, size.y(), 0), up));
  out.push_back(rect(c + Eigen::Vector3d(hx, -hy, 0), Eigen::Vector3d(0, size.y(), 0), up));
  out.push_back(rect(c + Eigen::Vector3d(-hx, -hy, size.z()), Eigen::Vector3d(size.x(), 0, 0),
                     Eigen::Vector3d(0, size.y(), 0)));
}

// Two walls at y = ±w/2 and a floor, spanning x ∈ [x0, x1].
void add_tunnel(std::vector<Rect>& out, double x0, double x1, double w, double h, double floor_z) {
  const Eigen::Vector3d along(x1 - x0, 0, 0), up(0, 0, h);
  out.push_back(rect({x0, -0.5 * w, floor_z}, along, up));
  out.push_back(rect({x0, 0.5 * w, floor_z}, along, up));
  out.push_back(rect({x0, -0.5 * w, floor_z}, along, Eigen::Vector3d(0, w, 0)));
}

}  // namespace

std::vector<Rect> scene_surfaces(const SceneSpec& spec) {
  spec.validate();
  std::vector<Rect> out;
  const double L = spec.length, W = spec.width, H = spec.height, z0 = -spec.sensor_height;
  switch (spec.kind) {
    case SceneKind::Plane:
      out.push_back(rect({-0.5 * L, -0.5 * W, 0.0}, {L, 0, 0}, {0, W, 0}));
      break;
    case SceneKind::Tunnel:
      add_tunnel(out, -0.5 * L, 0.5 * L, W, H, z0);
      break;
    case SceneKind::Corridor: {
      add_tunnel(out, -0.5 * L, 0.5 * L, W, H, z0);
      const double pillar = 0.4;
      int k = 0;
      for (double x = -0.5 * L + 0.5 * spec.pillar_spacing; x < 0.5 * L - pillar; x += spec.pillar_spacing, ++k) {
        // pillars alternate sides and stand against the wall
        const double y = (k % 2 == 0 ? 1.0 : -1.0) * (0.5 * W - 0.5 * pillar);
        add_box(out, {x, y, 0}, {pillar, pillar, H}, z0);
      }
      break;
    }
    case SceneKind::Room: {
      const Eigen::Vector3d up(0, 0, H);
      out.push_back(rect({-0.5 * L, -0.5 * W, z0}, {L, 0, 0}, up));
      out.push_back(rect({-0.5 * L, 0.5 * W, z0}, {L, 0, 0}, up));
      out.push_back(rect({-0.5 * L, -0.5 * W, z0}, {0, W, 0}, up));
      out.push_back(rect({0.5 * L, -0.5 * W, z0}, {0, W, 0}, up));
      out.push_back(rect({-0.5 * L, -0.5 * W, z0}, {L, 0, 0}, {0, W, 0}));
      add_box(out, {0.25 * L, 0.2 * W, 0}, {1.5, 1.0, std::min(1.2, H)}, z0);
      add_box(out, {-0.2 * L, -0.25 * W, 0}, {1.0, 2.0, std::min(0.8, H)}, z0);
      break;
    }
  }
  return out;
}

Points sample_surfaces(const std::vector<Rect>& rects, double density, double noise_sigma,
                       const Eigen::Vector3d& sensor, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  Points points;
  for (const auto& r : rects) {
    const auto n = static_cast<std::size_t>(std::llround(r.area() * density));
    for (std::size_t i = 0; i < n; ++i) {
      const double s = unit(rng), t = unit(rng);
      Eigen::Vector3d p = r.origin + s * r.edge_a + t * r.edge_b;
      const double e = noise(rng);
      if (noise_sigma > 0.0) {
        const Eigen::Vector3d ray = p - sensor;
        const double range = ray.norm();
        if (range > 0.0) p += (noise_sigma * e / range) * ray;
      }
      points.push_back(p);
    }
  }
  return points;
}

SyntheticScene synth_scene(const SceneSpec& spec) {
  SyntheticScene scene;
  scene.cloud.points =
      sample_surfaces(scene_surfaces(spec), spec.point_density, spec.sensor_noise_sigma, Eigen::Vector3d::Zero(), spec.seed);
  std::ostringstream desc;
  desc << to_string(spec.kind) << " " << spec.length << "x" << spec.width << "x" << spec.height << " m, "
       << spec.point_density << " pts/m^2, noise " << spec.sensor_noise_sigma << " m, seed " << spec.seed << ", "
       << scene.cloud.size() << " points";
  scene.description = desc.str();
  return scene;
}

void write_xyz(const fs::path& path, const PointCloud& cloud) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  os << std::setprecision(9);
  for (const auto& p : cloud.points) os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

InMemorySequence synth_sequence(const SequenceSpec& spec) {
  const double dt = 1.0 / kLidarRateHz;
  const double route = spec.speed * dt * static_cast<double>(spec.frames);
  const double margin = spec.scan_range + 5.0;
  const double featureless_start = route * (1.0 - spec.featureless_fraction);

  std::vector<Rect> world;
  add_tunnel(world, -margin, route + margin, spec.corridor_width, spec.wall_height, 0.0);
  // Pillars a metre or more across survive the 1 m map voxels; uneven spacing
  // avoids a periodic (and therefore ambiguous) layout.
  std::mt19937_64 layout(derive_seed(spec.seed, 0, 0));
  std::uniform_real_distribution<double> gap(4.0, 7.0), size(1.0, 1.6);
  int k = 0;
  for (double x = -margin; x < featureless_start - spec.scan_range; x += gap(layout), ++k) {
    const double w = size(layout);
    const double y = (k % 2 == 0 ? 1.0 : -1.0) * (0.5 * spec.corridor_width - 0.5 * w);
    add_box(world, {x, y, 0}, {w, w, spec.wall_height}, 0.0);
  }

  std::vector<PointCloud> scans;
  std::vector<Pose> poses;
  std::vector<double> times;
  const double weave = 2.0 * std::numbers::pi / 60.0;
  for (std::size_t i = 0; i < spec.frames; ++i) {
    const double x = spec.speed * dt * static_cast<double>(i);
    const double y = spec.lateral_amplitude * std::sin(weave * x);
    const double yaw = std::atan(spec.lateral_amplitude * weave * std::cos(weave * x));
    Pose T = rotation_z(yaw);
    T.t = Eigen::Vector3d(x, y, spec.sensor_height);

    const Points world_pts =
        sample_surfaces(world, spec.point_density, spec.sensor_noise_sigma, T.t, derive_seed(spec.seed, 1, i));
    const Pose Tinv = inverse(T);
    PointCloud scan;
    for (const auto& p : world_pts) {
      if ((p - T.t).norm() <= spec.scan_range) scan.points.push_back(Tinv * p);
    }
    scans.push_back(std::move(scan));
    poses.push_back(T);
    times.push_back(dt * static_cast<double>(i));
  }
  return InMemorySequence(std::move(scans), std::move(poses), std::move(times));
}

void write_kitti_sequence(const fs::path& root, const std::string& seq, const InMemorySequence& sequence) {
  const fs::path seq_dir = root / "sequences" / seq;
  fs::create_directories(seq_dir / "velodyne");
  fs::create_directories(root / "poses");
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    std::ostringstream name;
    name << std::setw(6) << std::setfill('0') << i << ".bin";
    write_velodyne_bin(seq_dir / "velodyne" / name.str(), sequence.scans()[i]);
  }
  write_trajectory((root / "poses" / (seq + ".txt")).string(), sequence.poses());
  {
    std::ofstream calib(seq_dir / "calib.txt");
    calib << "Tr: 1 0 0 0 0 1 0 0 0 0 1 0\n";
  }
  std::ofstream times(seq_dir / "times.txt");
  times << std::setprecision(17);
  for (std::size_t i = 0; i < sequence.size(); ++i) times << sequence.timestamp(i) << '\n';
}

std::vector<Pose> synth_trajectory(std::size_t frames, double dt, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double v0 = 4.0 + 4.0 * u(rng), dv = 1.5 * u(rng), fv = 0.05 + 0.1 * u(rng), pv = 2 * std::numbers::pi * u(rng);
  const double r0 = 0.15 * (u(rng) - 0.5), dr = 0.1 + 0.15 * u(rng), fr = 0.02 + 0.06 * u(rng),
               pr = 2 * std::numbers::pi * u(rng);
  const double dz = 0.3 * u(rng), fz = 0.03 + 0.05 * u(rng);

  constexpr int kSub = 10;
  const double h = dt / kSub;
  std::vector<Pose> out;
  out.reserve(frames);
  double x = 0, y = 0, yaw = 0, t = 0;
  for (std::size_t i = 0; i < frames; ++i) {
    const double pitch = 0.02 * std::sin(2 * std::numbers::pi * fz * t);
    const double roll = 0.01 * std::sin(2 * std::numbers::pi * 1.3 * fz * t + 0.5);
    Pose T;
    T.R = (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
           Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
              .toRotationMatrix();
    T.t = Eigen::Vector3d(x, y, dz * std::sin(2 * std::numbers::pi * fz * t));
    out.push_back(T);
    for (int s = 0; s < kSub; ++s) {
      const double speed = v0 + dv * std::sin(2 * std::numbers::pi * fv * t + pv);
      const double rate = r0 + dr * std::sin(2 * std::numbers::pi * fr * t + pr);
      x += speed * std::cos(yaw) * h;
      y += speed * std::sin(yaw) * h;
      yaw += rate * h;
      t += h;
    }
  }
  return out;
}

std::vector<Measurement> simulate_icp_measurements(std::span<const Pose> trajectory, std::span<const Cov6> per_frame_cov,
                                                   std::uint64_t seed) {
  if (trajectory.size() != per_frame_cov.size()) {
    throw Error(ErrorCode::LengthMismatch, "trajectory and covariance lists differ in length");
  }
  std::mt19937_64 rng(seed);
  std::vector<Measurement> out;
  out.reserve(trajectory.size());
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const Twist xi = sample_twist(per_frame_cov[k], rng);
    out.push_back({compose(trajectory[k], exp_se3(xi)), per_frame_cov[k]});
  }
  return out;
}

NoiseRegimes NoiseRegimes::defaults() {
  constexpr double deg = std::numbers::pi / 180.0;
  Vector6d low, high;
  low << 0.02, 0.02, 0.02, 0.1 * deg, 0.1 * deg, 0.1 * deg;
  high << 0.6, 0.15, 0.05, 0.5 * deg, 0.5 * deg, 2.0 * deg;
  NoiseRegimes r;
  r.low = low.cwiseAbs2().asDiagonal();
  r.high = high.cwiseAbs2().asDiagonal();
  return r;
}

std::vector<Cov6> heteroscedastic_covariances(std::size_t frames, const NoiseRegimes& regimes, std::uint64_t seed) {
  if (regimes.min_block == 0 || regimes.max_block < regimes.min_block) {
    throw Error(ErrorCode::InvalidArgument, "invalid regime block lengths");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(regimes.min_block, regimes.max_block);
  std::vector<Cov6> out;
  out.reserve(frames);
  bool high = false;
  while (out.size() < frames) {
    const std::size_t n = std::min(len(rng), frames - out.size());
    out.insert(out.end(), n, high ? regimes.high : regimes.low);
    high = !high;
  }
  return out;
}

}  // namespace icpcov
