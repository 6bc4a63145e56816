#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <tuple>

#include "icpcov/dataio.hpp"
#include "icpcov/error.hpp"
#include "icpcov/mc_dataset.hpp"
#include "test_util.hpp"

using namespace icpcov;
using namespace icpcov::testing;

namespace {

SequenceSpec small_sequence(std::size_t frames, std::uint64_t seed = 1) {
  SequenceSpec s;
  s.frames = frames;
  s.seed = seed;
  s.scan_range = 15.0;
  s.point_density = 8.0;
  return s;
}

struct ThreadGuard {
  unsigned saved = worker_threads();
  ~ThreadGuard() { set_worker_threads(saved); }
};

}  // namespace

TEST(MapConfig, ScenarioPresets) {
  EXPECT_EQ(MapConfig::prebuilt().x_prev, 10);
  EXPECT_EQ(MapConfig::prebuilt().y_next, 20);
  EXPECT_EQ(MapConfig::slam().x_prev, 10);
  EXPECT_EQ(MapConfig::slam().y_next, 0);
  EXPECT_DOUBLE_EQ(MapConfig{}.map_voxel, 1.0);
  EXPECT_DOUBLE_EQ(MapConfig{}.scan_voxel, 0.1);
  MapConfig bad{0, 0};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(PerturbConfig, DefaultSigmaValues) {
  const Vector6d s = PerturbConfig::default_sigma();
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_DOUBLE_EQ(s[1], 1.0);
  EXPECT_DOUBLE_EQ(s[2], 0.2);
  EXPECT_NEAR(s[3], deg(5), 1e-15);
  EXPECT_NEAR(s[4], deg(5), 1e-15);
  EXPECT_NEAR(s[5], deg(10), 1e-15);
  EXPECT_EQ(PerturbConfig{}.n_samples, 64);
  PerturbConfig p;
  p.n_samples = 1;
  EXPECT_THROW(p.validate(), Error);
}

TEST(MapNeighbours, WindowIsClippedAndExcludesQuery) {
  const MapConfig c{2, 1};
  EXPECT_EQ(map_neighbor_indices(10, 5, c), (std::vector<std::size_t>{3, 4, 6}));
  EXPECT_EQ(map_neighbor_indices(10, 0, c), (std::vector<std::size_t>{1}));
  EXPECT_EQ(map_neighbor_indices(10, 9, c), (std::vector<std::size_t>{7, 8}));
}

TEST(BuildReferenceMap, TwoIdenticalScansGiveDownsampledScan) {
  SceneSpec spec;
  spec.seed = 3;
  const PointCloud scan = synth_scene(spec).cloud;
  const InMemorySequence seq({scan, scan}, {Pose::identity(), Pose::identity()});
  const MapConfig cfg{1, 0};
  const PointCloud map = build_reference_map(seq, 1, cfg);
  const PointCloud expect = voxel_downsample(scan, cfg.map_voxel);
  ASSERT_EQ(map.size(), expect.size());
  for (std::size_t i = 0; i < map.size(); ++i) EXPECT_EQ(map.points[i], expect.points[i]);
  EXPECT_TRUE(map.has_normals());
}

TEST(BuildReferenceMap, NoNeighboursThrows) {
  const InMemorySequence seq({PointCloud{}}, {Pose::identity()});
  try {
    build_reference_map(seq, 0, MapConfig::slam());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoMapScans);
  }
}

TEST(BuildReferenceMap, SlamMapIsSubsetOfPrebuiltMap) {
  const auto seq = synth_sequence(small_sequence(40));
  const std::size_t k = 20;
  const PointCloud slam = gather_map_points(seq, k, MapConfig::slam());
  const PointCloud pre = gather_map_points(seq, k, MapConfig::prebuilt());
  using Key = std::tuple<double, double, double>;
  std::set<Key> all;
  for (const auto& p : pre.points) all.insert({p.x(), p.y(), p.z()});
  for (const auto& p : slam.points) EXPECT_TRUE(all.count({p.x(), p.y(), p.z()}));
  EXPECT_LT(slam.size(), pre.size());
}

TEST(SecondMoment, MatchesLoopOracleAndIsSymmetric) {
  std::mt19937_64 rng(4);
  std::vector<Twist> xs;
  for (int i = 0; i < 17; ++i) xs.push_back(random_twist(rng, 0.2, 0.1));
  const Cov6 Y = second_moment_covariance(xs);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) {
      double s = 0;
      for (const auto& x : xs) s += x[r] * x[c];
      EXPECT_NEAR(Y(r, c), s / 16.0, 1e-15);
    }
  EXPECT_EQ((Y - Y.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GE(min_eig(Y), -1e-10);
}

TEST(SecondMoment, NeedsTwoRuns) {
  try {
    second_moment_covariance({Twist::Zero()});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientConvergence);
  }
}

TEST(McCovariance, ZeroPerturbationGivesZeroLabel) {
  SceneSpec spec;
  spec.seed = 5;
  spec.point_density = 8;
  const PointCloud map = estimate_normals(voxel_downsample(synth_scene(spec).cloud, 0.2));
  PointCloud scan;
  scan.points = map.points;
  PerturbConfig p;
  p.sigma.setZero();
  p.n_samples = 8;
  const auto s = mc_covariance(scan, map, Pose::identity(), p, IcpConfig{}, 1);
  EXPECT_EQ(s.n_converged, 8);
  EXPECT_LT(s.label.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(McCovariance, ZeroPerturbationAtNonIdentityGroundTruth) {
  SceneSpec spec;
  spec.seed = 6;
  spec.point_density = 8;
  const PointCloud local = voxel_downsample(synth_scene(spec).cloud, 0.2);
  std::mt19937_64 rng(7);
  const Pose gt = random_pose(rng, 0.5, 3.0);
  const PointCloud map = estimate_normals(transform_cloud(local, gt));
  PerturbConfig p;
  p.sigma.setZero();
  p.n_samples = 4;
  const auto s = mc_covariance(local, map, gt, p, IcpConfig{}, 1);
  EXPECT_LT(s.label.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(McCovariance, AccountingAndLabelProperties) {
  SceneSpec spec;
  spec.seed = 8;
  spec.point_density = 8;
  const PointCloud map = estimate_normals(voxel_downsample(synth_scene(spec).cloud, 1.0));
  spec.seed = 9;
  const PointCloud scan = voxel_downsample(synth_scene(spec).cloud, 0.1);
  PerturbConfig p;
  p.n_samples = 12;
  const RegistrationTarget target(map);
  const auto runs = mc_registration_errors(scan, target, Pose::identity(), p, IcpConfig{}, 2);
  EXPECT_EQ(static_cast<int>(runs.errors.size()) + runs.n_failed, p.n_samples);
  const auto s = mc_covariance(scan, target, Pose::identity(), p, IcpConfig{}, 2);
  EXPECT_EQ(s.n_converged, static_cast<int>(runs.errors.size()));
  EXPECT_LE(s.n_converged, s.n_samples);
  EXPECT_LT((s.label - s.label.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_GE(min_eig(s.label), -1e-10);
}

TEST(McCovariance, ThreadCountDoesNotChangeLabels) {
  ThreadGuard guard;
  SceneSpec spec;
  spec.kind = SceneKind::Tunnel;
  spec.seed = 10;
  spec.point_density = 20;
  const PointCloud map = estimate_normals(voxel_downsample(synth_scene(spec).cloud, 1.0));
  spec.seed = 11;
  const PointCloud scan = voxel_downsample(synth_scene(spec).cloud, 0.1);
  PerturbConfig p;
  p.n_samples = 10;
  set_worker_threads(1);
  const auto a = mc_covariance(scan, map, Pose::identity(), p, IcpConfig{}, 5, 3);
  set_worker_threads(3);
  const auto b = mc_covariance(scan, map, Pose::identity(), p, IcpConfig{}, 5, 3);
  EXPECT_EQ(a.label, b.label);
  EXPECT_EQ(a.n_converged, b.n_converged);
}

TEST(GenerateDataset, ThreeScansSlamWindowSkipsFirst) {
  const auto seq = synth_sequence(small_sequence(3));
  MapConfig cfg{1, 0};
  PerturbConfig p;
  p.n_samples = 4;
  const auto res = generate_dataset(seq, 1, cfg, p, IcpConfig{}, 1, Scenario::Slam);
  ASSERT_EQ(res.samples.size(), 2u);
  EXPECT_EQ(res.samples[0].scan_id, 1);
  EXPECT_EQ(res.samples[1].scan_id, 2);
  ASSERT_EQ(res.failures.size(), 1u);
  EXPECT_EQ(res.failures[0].scan_id, 0);
  EXPECT_EQ(res.samples[0].scenario, Scenario::Slam);
  EXPECT_EQ(res.samples[1].gt_pose.t, seq.pose(2).t);
}

TEST(GenerateDataset, DeterministicAndStrided) {
  const auto seq = synth_sequence(small_sequence(9, 2));
  MapConfig cfg{2, 2};
  PerturbConfig p;
  p.n_samples = 4;
  const auto a = generate_dataset(seq, 4, cfg, p, IcpConfig{}, 7);
  const auto b = generate_dataset(seq, 4, cfg, p, IcpConfig{}, 7);
  ASSERT_EQ(a.samples.size() + a.failures.size(), 3u);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].scan_id % 4, 0);
    EXPECT_EQ(a.samples[i].scan_id, b.samples[i].scan_id);
    EXPECT_EQ(a.samples[i].label, b.samples[i].label);
  }
  for (const auto& f : a.failures) EXPECT_EQ(f.scan_id % 4, 0);
  EXPECT_THROW(generate_dataset(seq, 0, cfg, p, IcpConfig{}, 7), Error);
}

TEST(SplitDataset, SeventyTwentyTen) {
  std::vector<int> ten(10);
  std::iota(ten.begin(), ten.end(), 0);
  const auto s = split_dataset(ten);
  EXPECT_EQ(s.train, (std::vector<int>{0, 1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(s.test, (std::vector<int>{7, 8}));
  EXPECT_EQ(s.eval, (std::vector<int>{9}));

  std::vector<int> hundred(100);
  std::iota(hundred.begin(), hundred.end(), 0);
  const auto h = split_dataset(hundred);
  ASSERT_EQ(h.train.size(), 70u);
  ASSERT_EQ(h.test.size(), 20u);
  ASSERT_EQ(h.eval.size(), 10u);
  EXPECT_EQ(h.train.back(), 69);
  EXPECT_EQ(h.test.front(), 70);
  EXPECT_EQ(h.eval.front(), 90);
}

TEST(SplitDataset, EdgeCases) {
  const std::vector<int> v{1, 2, 3};
  const auto all = split_dataset(v, 1, 0, 0);
  EXPECT_EQ(all.train, v);
  EXPECT_TRUE(all.test.empty() && all.eval.empty());
  const auto empty = split_dataset(std::vector<int>{});
  EXPECT_TRUE(empty.train.empty() && empty.test.empty() && empty.eval.empty());
  EXPECT_THROW(split_dataset(v, 0.5, 0.2, 0.2), Error);
}

TEST(Scenario, ParseAndPrint) {
  EXPECT_EQ(parse_scenario("slam"), Scenario::Slam);
  EXPECT_EQ(to_string(Scenario::Prebuilt), "prebuilt");
  EXPECT_THROW(parse_scenario("loam"), Error);
}
