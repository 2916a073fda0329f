// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include "gsavatar/runtime.hpp"
#include "gsavatar/synthetic.hpp"

using namespace gsavatar;

namespace {

struct Fixture {
  SkinnedRig rig;
  SplatCloud cloud;
  AvatarBundle bundle;
  std::vector<std::uint32_t> source;  // bundle splat -> cloud index
};

Fixture make_fixture(std::size_t n, const Similarity& placement, const LimbAngles& limbs, std::uint64_t seed = 1)
{
  Fixture f;
  f.rig = build_template_humanoid(1.0);
  SyntheticOptions opts;
  opts.splat_count = n;
  opts.placement = placement;
  opts.limbs = limbs;
  opts.seed = seed;
  f.cloud = make_synthetic_subject(opts);
  FitResult fit;
  fit.yaw = placement.yaw;
  fit.translation = placement.translation;
  fit.uniform_scale = placement.scale;
  fit.limb_pose = apply_limb_angles(f.rig, Pose::bind_pose(f.rig), limbs);
  BindingSet set = compute_bindings(f.cloud, f.rig, BundleFit::from(fit));
  GroupTable groups = assign_groups(set, f.rig);
  f.source = set.source_index;
  f.bundle = make_bundle(f.rig, BundleFit::from(fit), std::move(set), std::move(groups));
  return f;
}

CameraState camera_at(const Vec3f& position, const Vec3f& forward)
{
  CameraState c;
  c.position = position;
  c.forward = forward.normalized();
  return c;
}

bool same_packet(const FramePacket& a, const FramePacket& b)
{
  return a.order == b.order && a.positions.size() == b.positions.size() &&
         std::memcmp(a.positions.data(), b.positions.data(), a.positions.size() * sizeof(Vec3f)) == 0 &&
         std::memcmp(a.rotations.data(), b.rotations.data(), a.rotations.size() * sizeof(Quatf)) == 0;
}

// O(N^2) pair count of pairs drawn in opposite orders.
double pair_oracle(const DrawOrder& a, const DrawOrder& b)
{
  std::vector<std::size_t> ra(a.size()), rb(b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    ra[a[k]] = k;
    rb[b[k]] = k;
  }
  std::uint64_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      count += (ra[i] < ra[j]) != (rb[i] < rb[j]);
    }
  }
  return static_cast<double>(count) / (0.5 * static_cast<double>(a.size()) * static_cast<double>(a.size() - 1));
}

}  // namespace

TEST(ExtractRotation, Identity)
{
  EXPECT_EQ(extract_rotation(Mat3d::Identity()).coeffs(), Quatd::Identity().coeffs());
}

TEST(ExtractRotation, PureRotation)
{
  const Quatd r(Eigen::AngleAxisd(deg_to_rad(37.0), Vec3d::UnitY()));
  EXPECT_LT(quat_distance(extract_rotation(r.toRotationMatrix()), r), 1e-6);
}

TEST(ExtractRotation, StretchedRotationMatchesSvd)
{
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Quatd r = random_rotation(rng);
    const Mat3d m = r.toRotationMatrix() * Eigen::Vector3d(2.0, 0.5, 1.0).asDiagonal();
    Eigen::JacobiSVD<Mat3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Quatd oracle(Mat3d(svd.matrixU() * svd.matrixV().transpose()));
    const Quatd got = extract_rotation(m);
    ASSERT_LT(quat_distance(got, oracle), 1e-5);
    ASSERT_LT(quat_distance(got, r), 1e-5);
    ASSERT_GE(got.w(), 0.0);
  }
}

TEST(ExtractRotation, SingularAndReflection)
{
  EXPECT_THROW(extract_rotation(Eigen::Vector3d(1, 1, 0).asDiagonal().toDenseMatrix()), OrientationError);
  EXPECT_THROW(extract_rotation(Eigen::Vector3d(1, 1, -1).asDiagonal().toDenseMatrix()), OrientationError);
}

TEST(Camera, ValidateAndOrbit)
{
  CameraState c;
  EXPECT_NO_THROW(c.validate());
  c.forward = Vec3f(0, 0, 2);
  EXPECT_THROW(c.validate(), InvalidArgument);
  const CameraState o = orbit_camera(Vec3f(1, 0.5f, 0), 3.0, 0.0, 0.3);
  EXPECT_NO_THROW(o.validate());
  EXPECT_NEAR(o.position.z(), 3.0, 1e-6);
  EXPECT_GT(o.depth(Vec3f(1, 0.5f, 0)), 0.0);
}

TEST(SortMode, Names)
{
  EXPECT_EQ(parse_sort_mode("group"), SortMode::kGroup);
  EXPECT_EQ(parse_sort_mode("full"), SortMode::kFull);
  EXPECT_STREQ(sort_mode_name(SortMode::kFull), "full");
  EXPECT_THROW(parse_sort_mode("fast"), InvalidArgument);
}

TEST(FullSort, Examples)
{
  const CameraState cam = camera_at(Vec3f::Zero(), Vec3f::UnitZ());
  const std::vector<Vec3f> pts = {Vec3f(0, 0, 1), Vec3f(0, 0, 5), Vec3f(0, 0, 3)};
  EXPECT_EQ(full_sort(pts, cam), (DrawOrder{1, 2, 0}));
  const std::vector<Vec3f> ties = {Vec3f(1, 0, 2), Vec3f(-1, 0, 2), Vec3f(0, 3, 2), Vec3f(0, 0, 4)};
  EXPECT_EQ(full_sort(ties, cam), (DrawOrder{3, 0, 1, 2}));
}

TEST(FullSort, MatchesStableSortOracle)
{
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(-5, 5);
  std::vector<Vec3f> pts(10000);
  for (auto& p : pts) {
    p = Vec3f(u(rng), u(rng), std::round(u(rng) * 4) / 4);  // many ties in z
  }
  const CameraState cam = camera_at(Vec3f(0, 0, -10), Vec3f::UnitZ());
  const auto depths = splat_depths(pts, cam);
  DrawOrder oracle(pts.size());
  std::iota(oracle.begin(), oracle.end(), 0u);
  std::stable_sort(oracle.begin(), oracle.end(), [&](auto a, auto b) { return depths[a] > depths[b]; });
  EXPECT_EQ(full_sort(pts, cam), oracle);
}

TEST(GroupSort, SingletonGroupsEqualFullSort)
{
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(-3, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 500;
    std::vector<Vec3f> pts(n);
    for (auto& p : pts) {
      p = Vec3f(u(rng), u(rng), u(rng));
    }
    GroupTable groups;
    for (std::uint32_t i = 0; i < n; ++i) {
      groups.groups.push_back(GroupRange{0, i, i + 1});
    }
    const CameraState cam = camera_at(Vec3f(u(rng), u(rng), u(rng)), Vec3f(u(rng), u(rng), u(rng)));
    ASSERT_EQ(group_sort(pts, groups, cam), full_sort(pts, cam));
  }
}

TEST(GroupSort, SingleGroupKeepsBundleOrder)
{
  std::vector<Vec3f> pts = {Vec3f(0, 0, 3), Vec3f(0, 0, 9), Vec3f(0, 0, 1)};
  GroupTable groups;
  groups.groups.push_back(GroupRange{0, 0, 3});
  for (const Vec3f& f : {Vec3f(0, 0, 1), Vec3f(0, 0, -1)}) {
    EXPECT_EQ(group_sort(pts, groups, camera_at(Vec3f::Zero(), f)), (DrawOrder{0, 1, 2}));
  }
}

TEST(GroupSort, FarClusterFirst)
{
  std::vector<Vec3f> pts;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  for (int i = 0; i < 50; ++i) pts.emplace_back(u(rng), u(rng), 2 + u(rng));   // near
  for (int i = 0; i < 50; ++i) pts.emplace_back(u(rng), u(rng), 10 + u(rng));  // far
  GroupTable groups;
  groups.groups = {GroupRange{0, 0, 50}, GroupRange{1, 50, 100}};
  const DrawOrder order = group_sort(pts, groups, camera_at(Vec3f::Zero(), Vec3f::UnitZ()));
  for (int k = 0; k < 50; ++k) {
    EXPECT_GE(order[k], 50u);
    EXPECT_LT(order[50 + k], 50u);
  }
}

TEST(OrderDivergence, Examples)
{
  const DrawOrder id = {0, 1, 2, 3};
  const DrawOrder rev = {3, 2, 1, 0};
  const std::vector<double> depths = {4, 3, 2, 1};
  const auto same = order_divergence(id, id, depths);
  EXPECT_EQ(same.inversion_fraction, 0.0);
  EXPECT_EQ(same.max_depth_error, 0.0);
  const auto flipped = order_divergence(id, rev, depths);
  EXPECT_EQ(flipped.inversion_fraction, 1.0);
  EXPECT_EQ(flipped.max_depth_error, 1.0);
  EXPECT_THROW(order_divergence(id, DrawOrder{0, 1, 2}, std::vector<double>{1, 2, 3}), InvalidArgument);
  EXPECT_THROW(order_divergence(id, DrawOrder{0, 1, 1, 3}, depths), InvalidArgument);
}

TEST(OrderDivergence, MatchesQuadraticOracleOnAvatar)
{
  const Fixture f = make_fixture(2000, Similarity{0.4, Vec3d::Zero(), 1.0}, LimbAngles{});
  AvatarRuntime runtime(f.bundle, f.rig);
  const SplatFrame frame = runtime.update(Pose::bind_pose(f.rig));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
  for (int trial = 0; trial < 5; ++trial) {
    const CameraState cam = orbit_camera(Vec3f(0, 0.5f, 0), 3.0, u(rng), 0.5);
    const DrawOrder full = full_sort(frame.positions, cam);
    const DrawOrder group = group_sort(frame.positions, f.bundle.groups, cam);
    const auto depths = splat_depths(frame.positions, cam);
    const auto d = order_divergence(full, group, depths);
    EXPECT_NEAR(d.inversion_fraction, pair_oracle(full, group), 1e-12);

    // Largest depth gap over neighbours in `full` that `group` reverses.
    std::vector<std::size_t> rank(group.size());
    for (std::size_t k = 0; k < group.size(); ++k) rank[group[k]] = k;
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < full.size(); ++k) {
      if (rank[full[k]] > rank[full[k + 1]]) {
        worst = std::max(worst, std::abs(depths[full[k]] - depths[full[k + 1]]));
      }
    }
    EXPECT_EQ(d.max_depth_error, worst);
    EXPECT_EQ(order_divergence(full, full, depths).inversion_fraction, 0.0);
  }
}

TEST(Runtime, FitPoseReconstructsBindPositions)
{
  const Similarity placement{0.9, Vec3d(0.3, 0.0, -0.2), 1.1};
  const Fixture f = make_fixture(10000, placement, LimbAngles{60, 35, 10, 4});
  const AnimationClip clip = make_static_clip(f.bundle.fit.limb_pose());
  const FramePacket packet =
      run_frame(f.bundle, f.rig, clip, 0.0, orbit_camera(Vec3f(0, 0.5f, 0), 3, 0), SortMode::kGroup);
  const auto scales = splat_scales(f.bundle, Pose::bind_pose(f.rig));
  for (std::size_t i = 0; i < packet.positions.size(); ++i) {
    const Splat& s = f.cloud.splats[f.source[i]];
    ASSERT_LT((packet.positions[i] - s.position).norm(), 1e-5) << i;
    ASSERT_LT(quat_distance(packet.rotations[i], s.rotation), 1e-4) << i;
    ASSERT_LT((scales[i] - s.scale).norm(), 1e-6);
  }
}

TEST(Runtime, RootTranslationShiftsRigidly)
{
  const double yaw = 0.7, scale = 1.3;
  const Fixture f = make_fixture(5000, Similarity{yaw, Vec3d(0.1, 0, 0.2), scale}, LimbAngles{});
  AvatarRuntime runtime(f.bundle, f.rig);
  Pose pose = f.bundle.fit.limb_pose();
  const SplatFrame base = runtime.update(pose);
  pose.root_translation = Vec3d(0.25, -0.5, 1.5);
  const SplatFrame moved = runtime.update(pose);
  // Root motion is expressed in the rig's frame; the fit placement maps it to
  // the world by its yaw and scale.
  const Vec3d shift = f.bundle.fit.similarity().matrix().block<3, 3>(0, 0) * pose.root_translation;
  for (std::size_t i = 0; i < base.positions.size(); ++i) {
    ASSERT_LT((moved.positions[i].cast<double>() - base.positions[i].cast<double>() - shift).norm(), 1e-5);
    ASSERT_LT(quat_distance(moved.rotations[i], base.rotations[i]), 1e-6);
  }
}

TEST(Runtime, ElbowBendMatchesForwardKinematics)
{
  const Fixture f = make_fixture(20000, Similarity{0.5, Vec3d(0.2, 0, 0), 1.2}, LimbAngles{});
  AvatarRuntime runtime(f.bundle, f.rig);
  const Pose rest = f.bundle.fit.limb_pose();
  Pose bent = rest;
  const std::size_t lower = kLeftLowerArm;
  const Vec3d local_axis = Vec3d::UnitZ();
  bent.rotations[lower] = rest.rotations[lower] * Quatd(Eigen::AngleAxisd(kPi / 2, local_axis));

  // Elbow frame at the rest pose, placed in the world.
  const Mat4d world = f.bundle.fit.similarity().matrix() * compute_global_transforms(f.rig, rest)[lower];
  const Vec3d elbow = world.block<3, 1>(0, 3);
  const Vec3d axis = (world.block<3, 3>(0, 0) * local_axis).normalized();
  const Eigen::AngleAxisd turn(kPi / 2, axis);

  const SplatFrame before = runtime.update(rest);
  const SplatFrame after = runtime.update(bent);
  int checked = 0;
  for (std::size_t i = 0; i < f.bundle.splat_count(); ++i) {
    const auto& skin = f.rig.skin()[f.bundle.bindings[i].vertex];
    if (skin[0].joint != lower || skin[0].weight != 1.0f) {
      continue;
    }
    const Vec3d expected = elbow + turn * (before.positions[i].cast<double>() - elbow);
    ASSERT_LT((after.positions[i].cast<double>() - expected).norm(), 1e-4) << i;
    const Quatd q = Quatd(turn) * before.rotations[i].cast<double>();
    ASSERT_LT(quat_distance(after.rotations[i].cast<double>(), q), 1e-4);
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(Runtime, DeterministicAcrossThreads)
{
  const Fixture f = make_fixture(30000, Similarity{-0.3, Vec3d::Zero(), 1.0}, LimbAngles{});
  const AnimationClip clip = make_demo_clip(f.rig, 2.0);
  const CameraState cam = orbit_camera(Vec3f(0, 0.5f, 0), 3.0, 1.0, 0.3);
  for (SortMode mode : {SortMode::kGroup, SortMode::kFull}) {
    const FramePacket ref = run_frame(f.bundle, f.rig, clip, 0.37, cam, mode);
    for (std::size_t threads : {1u, 2u, 8u}) {
      ThreadPool pool(threads);
      ASSERT_TRUE(same_packet(ref, run_frame(f.bundle, f.rig, clip, 0.37, cam, mode, &pool))) << threads;
    }
  }
}

TEST(Runtime, ModesDifferOnlyInOrder)
{
  const Fixture f = make_fixture(5000, Similarity{}, LimbAngles{});
  const AnimationClip clip = make_demo_clip(f.rig, 2.0);
  const CameraState cam = orbit_camera(Vec3f(0, 0.5f, 0), 3.0, 2.0, 0.3);
  const FramePacket g = run_frame(f.bundle, f.rig, clip, 1.1, cam, SortMode::kGroup);
  const FramePacket full = run_frame(f.bundle, f.rig, clip, 1.1, cam, SortMode::kFull);
  EXPECT_TRUE(std::memcmp(g.positions.data(), full.positions.data(), g.positions.size() * sizeof(Vec3f)) == 0);
  DrawOrder a = g.order, b = full.order;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
  const auto depths = splat_depths(full.positions, cam);
  for (std::size_t k = 1; k < full.order.size(); ++k) {
    ASSERT_GE(depths[full.order[k - 1]], depths[full.order[k]]);
  }
}

TEST(Runtime, FrameIdsIncrease)
{
  const Fixture f = make_fixture(500, Similarity{}, LimbAngles{});
  AvatarRuntime runtime(f.bundle, f.rig);
  const AnimationClip clip = make_demo_clip(f.rig);
  const CameraState cam = orbit_camera(Vec3f::Zero(), 3, 0);
  EXPECT_EQ(runtime.frame(clip, 0, cam, SortMode::kGroup).frame_id, 0u);
  EXPECT_EQ(runtime.frame(clip, 0, cam, SortMode::kGroup).frame_id, 1u);
  EXPECT_THROW(runtime.frame(clip, -1.0, cam, SortMode::kGroup), InvalidArgument);
  EXPECT_LE(runtime.used_vertices().size(), f.rig.vertex_count());
}

TEST(Runtime, RigMismatchIsCompatibilityError)
{
  const Fixture f = make_fixture(500, Similarity{}, LimbAngles{});
  const SkinnedRig other = build_template_humanoid(1.05);
  EXPECT_THROW(AvatarRuntime(f.bundle, other), CompatibilityError);
  EXPECT_THROW(update_splats(f.bundle, other, Pose::bind_pose(other)), CompatibilityError);
}
