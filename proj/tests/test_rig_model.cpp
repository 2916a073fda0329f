// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gsavatar/error.hpp"
#include "gsavatar/rig_model.hpp"
#include "gsavatar/synthetic.hpp"
#include "gsavatar/template_humanoid.hpp"

using namespace gsavatar;

namespace {

VertexSkin single(std::uint32_t joint)
{
  VertexSkin skin{};
  skin[0] = SkinInfluence{joint, 1.0f};
  return skin;
}

// Root at (0.1, 0.2, 0.3), two children stacked 1 m apart, with non-trivial
// bind rotations; one vertex per joint.
SkinnedRig chain_rig()
{
  std::vector<Joint> joints(3);
  joints[0] = Joint{"root", -1, Quatd(Eigen::AngleAxisd(0.3, Vec3d(1, 2, 3).normalized())), Vec3d(0.1, 0.2, 0.3)};
  joints[1] = Joint{"mid", 0, Quatd(Eigen::AngleAxisd(-0.7, Vec3d::UnitZ())), Vec3d(0.0, 1.0, 0.0)};
  joints[2] = Joint{"tip", 1, Quatd(Eigen::AngleAxisd(0.4, Vec3d::UnitX())), Vec3d(0.0, 1.0, 0.2)};
  std::vector<Vec3f> vertices = {Vec3f(0.1f, 0.3f, 0.2f), Vec3f(0.5f, 1.2f, 0.1f), Vec3f(-0.2f, 2.1f, 0.4f)};
  std::vector<VertexSkin> skin = {single(0), single(1), single(2)};
  return SkinnedRig::create(vertices, {{0, 1, 2}}, joints, skin);
}

// Textbook forward kinematics with Eigen's affine types, independent of the
// library's matrix helpers.
std::vector<Eigen::Affine3d> fk_oracle(const SkinnedRig& rig, const Pose& pose)
{
  std::vector<Eigen::Affine3d> global(rig.joint_count());
  for (std::size_t j = 0; j < rig.joint_count(); ++j) {
    const Joint& joint = rig.joints()[j];
    Eigen::Affine3d local = Eigen::Translation3d(joint.bind_local_translation) * pose.rotations[j];
    if (joint.parent < 0) {
      global[j] = Eigen::Translation3d(pose.root_translation) * Eigen::Scaling(pose.root_uniform_scale) * local;
    } else {
      global[j] = global[joint.parent] * local;
    }
  }
  return global;
}

std::vector<Mat4d> skin_oracle(const SkinnedRig& rig, const Pose& pose)
{
  const auto bind = fk_oracle(rig, Pose::bind_pose(rig));
  const auto posed = fk_oracle(rig, pose);
  std::vector<Mat4d> out;
  for (std::size_t j = 0; j < rig.joint_count(); ++j) {
    out.push_back((posed[j] * bind[j].inverse()).matrix());
  }
  return out;
}

Pose random_pose(const SkinnedRig& rig, std::mt19937_64& rng)
{
  Pose pose;
  for (std::size_t j = 0; j < rig.joint_count(); ++j) {
    pose.rotations.push_back(random_rotation(rng));
  }
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  pose.root_translation = Vec3d(u(rng), u(rng), u(rng));
  pose.root_uniform_scale = 1.0 + 0.5 * u(rng);
  return pose;
}

double angle_of(const Quatd& q) { return 2.0 * std::acos(std::min(1.0, std::abs(q.w()))); }

}  // namespace

TEST(Skinning, BindPoseGivesIdentity)
{
  for (const SkinnedRig& rig : {chain_rig(), build_template_humanoid(1.0)}) {
    for (const Mat4d& s : compute_skin_matrices(rig, Pose::bind_pose(rig))) {
      EXPECT_LT((s - Mat4d::Identity()).cwiseAbs().maxCoeff(), 1e-6);
    }
    const auto skinned = skin_vertices(rig, Pose::bind_pose(rig));
    for (std::size_t v = 0; v < rig.vertex_count(); ++v) {
      ASSERT_LT((skinned[v] - rig.vertices()[v]).norm(), 1e-6);
    }
  }
}

TEST(Skinning, RootTranslationIsPureTranslation)
{
  const SkinnedRig rig = build_template_humanoid(1.0);
  Pose pose = Pose::bind_pose(rig);
  pose.root_translation = Vec3d(0.3, -1.2, 2.5);
  for (const Mat4d& s : compute_skin_matrices(rig, pose)) {
    EXPECT_LT((s - translation_matrix(pose.root_translation)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Skinning, MatchesForwardKinematicsOracle)
{
  const SkinnedRig rig = chain_rig();
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const Pose pose = random_pose(rig, rng);
    const auto got = compute_skin_matrices(rig, pose);
    const auto want = skin_oracle(rig, pose);
    for (std::size_t j = 0; j < 3; ++j) {
      ASSERT_LT((got[j] - want[j]).cwiseAbs().maxCoeff(), 1e-6) << "joint " << j;
    }
  }
}

TEST(Skinning, TemplateMatchesOracle)
{
  const SkinnedRig rig = build_template_humanoid(1.3);
  std::mt19937_64 rng(37);
  const Pose pose = random_pose(rig, rng);
  const auto got = compute_skin_matrices(rig, pose);
  const auto want = skin_oracle(rig, pose);
  for (std::size_t j = 0; j < rig.joint_count(); ++j) {
    ASSERT_LT((got[j] - want[j]).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Blend, SingleInfluenceIsJointMatrix)
{
  const SkinnedRig rig = chain_rig();
  std::mt19937_64 rng(2);
  const auto skin = compute_skin_matrices(rig, random_pose(rig, rng));
  for (std::size_t v = 0; v < 3; ++v) {
    EXPECT_EQ(blend_vertex_matrix(rig, skin, v), skin[v]);
  }
}

TEST(Blend, HalfHalfTranslations)
{
  std::vector<Joint> joints = {Joint{"a", -1, Quatd::Identity(), Vec3d::Zero()},
                               Joint{"b", 0, Quatd::Identity(), Vec3d(0, 1, 0)}};
  VertexSkin mixed{};
  mixed[0] = SkinInfluence{0, 0.5f};
  mixed[1] = SkinInfluence{1, 0.5f};
  const SkinnedRig rig = SkinnedRig::create({Vec3f::Zero()}, {}, joints, {mixed});
  const Vec3d t1(1, 2, 3), t2(-3, 0, 5);
  const Mat4d m = blend_vertex_matrix(rig, {translation_matrix(t1), translation_matrix(t2)}, 0);
  EXPECT_LT((m.block<3, 1>(0, 3) - 0.5 * (t1 + t2)).norm(), 1e-12);
  EXPECT_LT((m.block<3, 3>(0, 0) - Mat3d::Identity()).norm(), 1e-12);
}

TEST(Blend, FourInfluencesMatchWeightedSum)
{
  std::vector<Joint> joints;
  for (int j = 0; j < 4; ++j) {
    joints.push_back(Joint{"j" + std::to_string(j), j - 1, Quatd::Identity(), Vec3d(0, 0.5, 0)});
  }
  const float w[4] = {0.1f, 0.2f, 0.3f, 0.4f};
  VertexSkin skin{};
  for (std::uint32_t j = 0; j < 4; ++j) {
    skin[j] = SkinInfluence{3 - j, w[j]};
  }
  const SkinnedRig rig = SkinnedRig::create({Vec3f(0.1f, 0.7f, 0.0f)}, {}, joints, {skin});
  std::mt19937_64 rng(4);
  const auto mats = compute_skin_matrices(rig, random_pose(rig, rng));
  Mat4d expected = Mat4d::Zero();
  for (std::uint32_t k = 0; k < 4; ++k) {
    expected += static_cast<double>(w[k]) * mats[3 - k];
  }
  EXPECT_LT((blend_vertex_matrix(rig, mats, 0) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Skinning, RigidRootMotionPreservesDistances)
{
  const SkinnedRig rig = build_template_humanoid(1.0);
  std::mt19937_64 rng(8);
  Pose base = apply_limb_angles(rig, Pose::bind_pose(rig), LimbAngles{60, 30, 10, 3});
  const auto a = skin_vertices(rig, base);
  for (int trial = 0; trial < 5; ++trial) {
    // Rotate about the origin by Q: root rotation Q q and root translation
    // Q b - b keep the composition rigid.
    const Quatd q = random_rotation(rng);
    const Vec3d shift(0.5 * trial, -0.2, 1.0);
    const Vec3d b = rig.joints()[0].bind_local_translation;
    Pose moved = base;
    moved.rotations[0] = q * base.rotations[0];
    moved.root_translation = shift + q * b - b;
    const auto c = skin_vertices(rig, moved);
    for (std::size_t v = 0; v < rig.vertex_count(); v += 7) {
      const Vec3d expected = q * a[v].cast<double>() + shift;
      ASSERT_LT((c[v].cast<double>() - expected).norm(), 1e-5);
    }
    for (std::size_t i = 0; i < rig.vertex_count(); i += 211) {
      for (std::size_t j = i + 1; j < rig.vertex_count(); j += 307) {
        const double da = (a[i] - a[j]).norm();
        const double dc = (c[i] - c[j]).norm();
        ASSERT_NEAR(dc / da, 1.0, 1e-5);
      }
    }
  }
}

TEST(Skinning, PlacePoseFoldsSimilarity)
{
  const SkinnedRig rig = build_template_humanoid(1.0);
  std::mt19937_64 rng(12);
  Pose pose = random_pose(rig, rng);
  const Similarity f{0.8, Vec3d(0.2, 0.1, -0.4), 1.3};
  const auto placed = compute_skin_matrices(rig, place_pose(rig, pose, f));
  const auto plain = compute_skin_matrices(rig, pose);
  for (std::size_t j = 0; j < rig.joint_count(); ++j) {
    ASSERT_LT((placed[j] - f.matrix() * plain[j]).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Skinning, ElbowBendRotatesForearmAboutElbow)
{
  const SkinnedRig rig = build_template_humanoid(1.0);
  const std::size_t lower = kLeftLowerArm;
  const Vec3d local_axis = Vec3d::UnitZ();
  Pose pose = Pose::bind_pose(rig);
  pose.rotations[lower] = rig.joints()[lower].bind_local_rotation * Quatd(Eigen::AngleAxisd(kPi / 2, local_axis));

  // Hand computation: the elbow sits at the lower arm's bind origin; the bend
  // axis in world space is the bind global rotation applied to the local axis.
  const Mat4d elbow_frame = rig.global_bind()[lower];
  const Vec3d elbow = elbow_frame.block<3, 1>(0, 3);
  const Vec3d world_axis = elbow_frame.block<3, 3>(0, 0) * local_axis;
  const Eigen::AngleAxisd bend(kPi / 2, world_axis.normalized());

  const auto skinned = skin_vertices(rig, pose);
  int checked = 0;
  for (std::size_t v = 0; v < rig.vertex_count() && checked < 5; v += 3) {
    const auto& skin = rig.skin()[v];
    if (skin[0].joint != lower || skin[0].weight != 1.0f) {
      continue;
    }
    const Vec3d p = rig.vertices()[v].cast<double>();
    const Vec3d expected = elbow + bend * (p - elbow);
    EXPECT_LT((skinned[v].cast<double>() - expected).norm(), 1e-5) << "vertex " << v;
    ++checked;
  }
  EXPECT_EQ(checked, 5);
}

TEST(Slerp, Endpoints)
{
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Quatd a = random_rotation(rng), b = random_rotation(rng);
    EXPECT_EQ(slerp_shortest(a, b, 0.0).coeffs(), a.coeffs());
    EXPECT_EQ(slerp_shortest(a, b, 1.0).coeffs(), b.coeffs());
  }
}

TEST(Slerp, MidpointOfQuarterTurn)
{
  const Quatd b(Eigen::AngleAxisd(kPi / 2, Vec3d::UnitX()));
  const Quatd mid = slerp_shortest(Quatd::Identity(), b, 0.5);
  const Quatd expected(Eigen::AngleAxisd(kPi / 4, Vec3d::UnitX()));
  EXPECT_LT(quat_distance(mid, expected), 1e-5);
}

TEST(Slerp, TakesShortArc)
{
  const Quatd b(Eigen::AngleAxisd(kPi / 2, Vec3d::UnitY()));
  const Quatd neg(-b.w(), -b.x(), -b.y(), -b.z());
  EXPECT_LT(quat_distance(slerp_shortest(Quatd::Identity(), neg, 0.5),
                          Quatd(Eigen::AngleAxisd(kPi / 4, Vec3d::UnitY()))),
            1e-9);
}

TEST(Slerp, UnitNormAndMonotoneAngle)
{
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int pair = 0; pair < 20; ++pair) {
    const Quatd a = random_rotation(rng), b = random_rotation(rng);
    std::vector<double> ts(100);
    for (auto& t : ts) {
      t = u(rng);
    }
    std::sort(ts.begin(), ts.end());
    double last = -1.0;
    for (double t : ts) {
      const Quatd q = slerp_shortest(a, b, t);
      ASSERT_NEAR(q.norm(), 1.0, 1e-5);
      const double angle = angle_of(a.conjugate() * q);
      ASSERT_GE(angle, last - 1e-9);
      last = angle;
    }
  }
}

TEST(Animation, SamplingRules)
{
  const SkinnedRig rig = chain_rig();
  AnimationClip clip;
  clip.duration = 2.0;
  clip.tracks.resize(3);
  const Quatd q0 = Quatd::Identity();
  const Quatd q1(Eigen::AngleAxisd(kPi / 2, Vec3d::UnitX()));
  const Quatd q2(Eigen::AngleAxisd(0.3, Vec3d::UnitY()));
  clip.tracks[1] = {RotationKey{0.5, q0}, RotationKey{1.0, q1}, RotationKey{1.5, q2}};
  clip.root_translation = {TranslationKey{0.0, Vec3d::Zero()}, TranslationKey{2.0, Vec3d(2, 0, 0)}};
  clip.validate(rig);

  // Exact at keys, clamped outside, empty tracks hold the bind rotation.
  EXPECT_EQ(sample_animation(clip, rig, 1.0).rotations[1].coeffs(), q1.coeffs());
  EXPECT_EQ(sample_animation(clip, rig, 0.0).rotations[1].coeffs(), q0.coeffs());
  EXPECT_EQ(sample_animation(clip, rig, 1.9).rotations[1].coeffs(), q2.coeffs());
  EXPECT_EQ(sample_animation(clip, rig, 0.7).rotations[0].coeffs(), rig.joints()[0].bind_local_rotation.coeffs());
  EXPECT_LT(quat_distance(sample_animation(clip, rig, 0.75).rotations[1],
                          Quatd(Eigen::AngleAxisd(kPi / 4, Vec3d::UnitX()))),
            1e-5);
  EXPECT_LT((sample_animation(clip, rig, 0.5).root_translation - Vec3d(0.5, 0, 0)).norm(), 1e-12);

  // Non-looping clips clamp past the end; looping clips wrap.
  EXPECT_EQ(sample_animation(clip, rig, 5.0).rotations[1].coeffs(), q2.coeffs());
  clip.loop = true;
  EXPECT_EQ(sample_animation(clip, rig, 3.0).rotations[1].coeffs(), q1.coeffs());

  EXPECT_THROW(sample_animation(clip, rig, -0.1), InvalidArgument);
}

TEST(Animation, ValidateRejectsBadClips)
{
  const SkinnedRig rig = chain_rig();
  AnimationClip clip;
  clip.duration = 1.0;
  clip.tracks.resize(3);
  clip.tracks[0] = {RotationKey{0.5, Quatd::Identity()}, RotationKey{0.5, Quatd::Identity()}};
  EXPECT_THROW(clip.validate(rig), RigError);
  clip.tracks[0] = {RotationKey{0.5, Quatd::Identity()}, RotationKey{1.5, Quatd::Identity()}};
  EXPECT_THROW(clip.validate(rig), RigError);
  clip.tracks.resize(2);
  EXPECT_THROW(clip.validate(rig), RigError);
}

TEST(Animation, StaticClipReproducesPose)
{
  const SkinnedRig rig = build_template_humanoid(1.0);
  std::mt19937_64 rng(3);
  Pose pose = random_pose(rig, rng);
  pose.root_uniform_scale = 1.0;
  const AnimationClip clip = make_static_clip(pose, 2.0);
  clip.validate(rig);
  for (double t : {0.0, 0.7, 2.0, 5.5}) {
    const Pose got = sample_animation(clip, rig, t);
    for (std::size_t j = 0; j < rig.joint_count(); ++j) {
      ASSERT_EQ(got.rotations[j].coeffs(), pose.rotations[j].coeffs());
    }
    EXPECT_EQ(got.root_translation, pose.root_translation);
  }
}

TEST(RigCreate, RejectsInvalidRigs)
{
  std::vector<Joint> joints = {Joint{"root", -1, Quatd::Identity(), Vec3d::Zero()},
                               Joint{"child", 0, Quatd::Identity(), Vec3d(0, 1, 0)}};
  const std::vector<Vec3f> vertices = {Vec3f::Zero(), Vec3f::UnitY()};
  const std::vector<VertexSkin> skin = {single(0), single(1)};
  EXPECT_NO_THROW(SkinnedRig::create(vertices, {}, joints, skin));

  VertexSkin bad_sum{};
  bad_sum[0] = SkinInfluence{0, 0.7f};
  EXPECT_THROW(SkinnedRig::create(vertices, {}, joints, {bad_sum, single(1)}), RigError);
  EXPECT_THROW(SkinnedRig::create(vertices, {}, joints, {single(0), single(2)}), RigError);
  EXPECT_THROW(SkinnedRig::create(vertices, {{0, 1, 2}}, joints, skin), RigError);
  EXPECT_THROW(SkinnedRig::create(vertices, {}, joints, {single(0)}), RigError);
  auto forward_parent = joints;
  forward_parent[1].parent = 1;
  EXPECT_THROW(SkinnedRig::create(vertices, {}, forward_parent, skin), RigError);
  EXPECT_THROW(SkinnedRig::create(vertices, {}, {}, {}), RigError);
}

TEST(RigCreate, DominantJointTieGoesToSmallerIndex)
{
  std::vector<Joint> joints = {Joint{"a", -1, Quatd::Identity(), Vec3d::Zero()},
                               Joint{"b", 0, Quatd::Identity(), Vec3d(0, 1, 0)},
                               Joint{"c", 1, Quatd::Identity(), Vec3d(0, 1, 0)}};
  VertexSkin tie{};
  tie[0] = SkinInfluence{2, 0.5f};
  tie[1] = SkinInfluence{1, 0.5f};
  const SkinnedRig rig = SkinnedRig::create({Vec3f::Zero(), Vec3f::Zero()}, {}, joints, {tie, single(0)});
  EXPECT_EQ(rig.dominant_joint(0), 1u);
  EXPECT_EQ(rig.dominant_joint(1), 0u);
  EXPECT_EQ(rig.find_joint("c"), std::optional<std::size_t>(2));
  EXPECT_FALSE(rig.find_joint("zz").has_value());
}
