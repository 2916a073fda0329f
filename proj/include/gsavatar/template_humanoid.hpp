// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "gsavatar/rig_model.hpp"

namespace gsavatar {

/// Joint indices of the procedural template. Left is +X (the subject faces +Z).
enum TemplateJoint : std::uint32_t {
  kHips = 0,
  kSpine,
  kChest,
  kNeck,
  kHead,
  kLeftUpperArm,
  kLeftLowerArm,
  kLeftHand,
  kRightUpperArm,
  kRightLowerArm,
  kRightHand,
  kLeftUpperLeg,
  kLeftLowerLeg,
  kLeftFoot,
  kRightUpperLeg,
  kRightLowerLeg,
  kRightFoot,
  kTemplateJointCount
};

const char* template_joint_name(std::uint32_t joint);

/// Bind (A-pose) abduction angles, degrees from straight down.
inline constexpr double kBindShoulderAbductionDeg = 45.0;
inline constexpr double kBindHipAbductionDeg = 5.0;

/// Abduction angles in degrees, measured from straight down in the frontal plane.
struct LimbAngles {
  double left_shoulder = kBindShoulderAbductionDeg;
  double right_shoulder = kBindShoulderAbductionDeg;
  double left_hip = kBindHipAbductionDeg;
  double right_hip = kBindHipAbductionDeg;

  double& operator[](std::size_t i);
  double operator[](std::size_t i) const;
};

/// Joint names the limb angles act on, in LimbAngles order.
inline constexpr const char* kLimbJointNames[4] = {"left_upper_arm", "right_upper_arm", "left_upper_leg",
                                                   "right_upper_leg"};

/// Sets the four abduction joints of `pose` (found by name; absent joints are
/// skipped) to bind rotation pre-multiplied by a frontal-plane rotation about +Z.
Pose apply_limb_angles(const SkinnedRig& rig, const Pose& pose, const LimbAngles& angles);

/// Procedural 17-joint humanoid in A-pose, feet on y = 0, head top at y = height.
/// Surface vertices lie on per-bone capsules (~4k total) with two-bone blend
/// weights near each joint.
SkinnedRig build_template_humanoid(double height = 1.0);

struct SurfaceSample {
  Vec3f position;  ///< bind pose
  VertexSkin skin;
};

/// Area-uniform random points on the template's capsule surfaces with skin
/// weights from the same rule as the rig's vertices.
std::vector<SurfaceSample> sample_template_surface(double height, std::size_t count, std::mt19937_64& rng);

}  // namespace gsavatar
