// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/template_humanoid.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "gsavatar/error.hpp"

namespace gsavatar {

namespace {

// Proportions for a 1 m tall figure; everything scales linearly with height.
constexpr double kVertexSpacing = 0.0185;
constexpr double kBlendRegion = 0.25;

const Vec3d kHipsPos{0.0, 0.53, 0.0};
const Vec3d kSpinePos{0.0, 0.60, 0.0};
const Vec3d kChestPos{0.0, 0.70, 0.0};
const Vec3d kNeckPos{0.0, 0.82, 0.0};
const Vec3d kHeadPos{0.0, 0.87, 0.0};
const Vec3d kShoulderPos{0.13, 0.80, 0.0};
const Vec3d kHipJointPos{0.07, 0.50, 0.0};
constexpr double kUpperArmLength = 0.17;
constexpr double kLowerArmLength = 0.15;
constexpr double kHandLength = 0.08;
constexpr double kUpperLegLength = 0.23;
constexpr double kLowerLegLength = 0.23;
// The shin surface stops this far above the ankle joint so its end cap stays
// above the ground plane.
constexpr double kShinInset = 0.01;

struct Segment {
  std::uint32_t joint;
  Vec3d a;
  Vec3d b;
  double rx;
  double rz;
  int parent_blend;
  int child_blend;
};

struct Frame {
  Vec3d d;
  Vec3d u;
  Vec3d w;
  double length;
  double cap;
};

Frame segment_frame(const Segment& s)
{
  Frame f;
  const Vec3d axis = s.b - s.a;
  f.length = axis.norm();
  f.d = axis / f.length;
  const Vec3d helper = std::abs(f.d.dot(Vec3d::UnitZ())) < 0.9 ? Vec3d::UnitZ() : Vec3d::UnitX();
  f.u = f.d.cross(helper).normalized();
  f.w = f.d.cross(f.u);
  f.cap = std::min(s.rx, s.rz);
  return f;
}

double smooth(double x)
{
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

VertexSkin skin_for(const Segment& s, const Frame& f, const Vec3d& p)
{
  const double t = std::clamp((p - s.a).dot(f.d) / f.length, 0.0, 1.0);
  float wp = 0.0f;
  float wc = 0.0f;
  if (s.parent_blend >= 0 && t < kBlendRegion) {
    wp = static_cast<float>(0.5 * (1.0 - smooth(t / kBlendRegion)));
  }
  if (s.child_blend >= 0 && t > 1.0 - kBlendRegion) {
    wc = static_cast<float>(0.5 * smooth((t - (1.0 - kBlendRegion)) / kBlendRegion));
  }
  VertexSkin skin{};
  std::size_t k = 0;
  skin[k++] = SkinInfluence{s.joint, 1.0f - wp - wc};
  if (wp > 0.0f) {
    skin[k++] = SkinInfluence{static_cast<std::uint32_t>(s.parent_blend), wp};
  }
  if (wc > 0.0f) {
    skin[k++] = SkinInfluence{static_cast<std::uint32_t>(s.child_blend), wc};
  }
  return skin;
}

// Profile parameter s in [0, pi*cap + L] -> (axial offset from a, radial factor).
std::pair<double, double> profile(const Frame& f, double s)
{
  const double quarter = 0.5 * kPi * f.cap;
  if (s < quarter) {
    const double alpha = s / f.cap;
    return {-f.cap * std::cos(alpha), std::sin(alpha)};
  }
  if (s <= quarter + f.length) {
    return {s - quarter, 1.0};
  }
  const double alpha = (s - quarter - f.length) / f.cap;
  return {f.length + f.cap * std::sin(alpha), std::cos(alpha)};
}

Vec3d surface_point(const Segment& s, const Frame& f, double profile_s, double phi)
{
  const auto [axial, radial] = profile(f, profile_s);
  return s.a + f.d * axial + (f.u * (s.rx * std::cos(phi)) + f.w * (s.rz * std::sin(phi))) * radial;
}

Vec3d mirror_x(const Vec3d& p) { return Vec3d(-p.x(), p.y(), p.z()); }

std::uint32_t mirror_joint(std::uint32_t joint)
{
  switch (joint) {
    case kLeftUpperArm: return kRightUpperArm;
    case kLeftLowerArm: return kRightLowerArm;
    case kLeftHand: return kRightHand;
    case kLeftUpperLeg: return kRightUpperLeg;
    case kLeftLowerLeg: return kRightLowerLeg;
    case kLeftFoot: return kRightFoot;
    default: return joint;
  }
}

Vec3d arm_direction()
{
  const double a = deg_to_rad(kBindShoulderAbductionDeg);
  return Vec3d(std::sin(a), -std::cos(a), 0.0);
}

Vec3d leg_direction()
{
  const double a = deg_to_rad(kBindHipAbductionDeg);
  return Vec3d(std::sin(a), -std::cos(a), 0.0);
}

struct Layout {
  std::vector<Vec3d> joint_positions;  // unit height
  std::vector<Segment> center;         // torso/head, symmetric about x = 0
  std::vector<Segment> left;           // left limbs; right side is their mirror
};

Layout make_layout()
{
  Layout layout;
  auto& jp = layout.joint_positions;
  jp.assign(kTemplateJointCount, Vec3d::Zero());
  const Vec3d arm = arm_direction();
  const Vec3d leg = leg_direction();
  jp[kHips] = kHipsPos;
  jp[kSpine] = kSpinePos;
  jp[kChest] = kChestPos;
  jp[kNeck] = kNeckPos;
  jp[kHead] = kHeadPos;
  jp[kLeftUpperArm] = kShoulderPos;
  jp[kLeftLowerArm] = kShoulderPos + kUpperArmLength * arm;
  jp[kLeftHand] = jp[kLeftLowerArm] + kLowerArmLength * arm;
  jp[kLeftUpperLeg] = kHipJointPos;
  jp[kLeftLowerLeg] = kHipJointPos + kUpperLegLength * leg;
  jp[kLeftFoot] = jp[kLeftLowerLeg] + kLowerLegLength * leg;
  for (std::uint32_t j : {kLeftUpperArm, kLeftLowerArm, kLeftHand, kLeftUpperLeg, kLeftLowerLeg, kLeftFoot}) {
    jp[mirror_joint(j)] = mirror_x(jp[j]);
  }

  layout.center = {
      {kHips, {0.0, 0.45, 0.0}, {0.0, 0.60, 0.0}, 0.12, 0.08, -1, -1},
      {kSpine, kSpinePos, kChestPos, 0.12, 0.08, kHips, kChest},
      {kChest, kChestPos, {0.0, 0.80, 0.0}, 0.13, 0.085, kSpine, -1},
      {kNeck, kNeckPos, kHeadPos, 0.035, 0.035, kChest, kHead},
      {kHead, {0.0, 0.91, 0.0}, {0.0, 0.955, 0.0}, 0.045, 0.045, kNeck, -1},
  };
  const Vec3d ankle = jp[kLeftFoot];
  layout.left = {
      {kLeftUpperArm, jp[kLeftUpperArm], jp[kLeftLowerArm], 0.035, 0.035, kChest, kLeftLowerArm},
      {kLeftLowerArm, jp[kLeftLowerArm], jp[kLeftHand], 0.03, 0.03, kLeftUpperArm, kLeftHand},
      {kLeftHand, jp[kLeftHand], jp[kLeftHand] + kHandLength * arm, 0.025, 0.025, kLeftLowerArm, -1},
      {kLeftUpperLeg, jp[kLeftUpperLeg], jp[kLeftLowerLeg], 0.055, 0.055, kHips, kLeftLowerLeg},
      {kLeftLowerLeg, jp[kLeftLowerLeg], ankle - kShinInset * leg, 0.045, 0.045, kLeftUpperLeg, kLeftFoot},
      {kLeftFoot, {ankle.x(), 0.03, -0.02}, {ankle.x(), 0.03, 0.11}, 0.03, 0.03, kLeftLowerLeg, -1},
  };
  return layout;
}

Segment mirrored(const Segment& s)
{
  Segment m = s;
  m.joint = mirror_joint(s.joint);
  m.a = mirror_x(s.a);
  m.b = mirror_x(s.b);
  m.parent_blend = s.parent_blend < 0 ? -1 : static_cast<int>(mirror_joint(static_cast<std::uint32_t>(s.parent_blend)));
  m.child_blend = s.child_blend < 0 ? -1 : static_cast<int>(mirror_joint(static_cast<std::uint32_t>(s.child_blend)));
  return m;
}

Segment scaled(Segment s, double height)
{
  s.a *= height;
  s.b *= height;
  s.rx *= height;
  s.rz *= height;
  return s;
}

using Triangle = std::array<std::uint32_t, 3>;

// Joins two closed rings whose vertices sit at angles (m + 0.5) / n of a turn.
void zip_rings(std::uint32_t a0, std::uint32_t na, std::uint32_t b0, std::uint32_t nb, std::vector<Triangle>& out)
{
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  while (i < na || j < nb) {
    const bool advance_a = j >= nb || (i < na && std::uint64_t{i + 1} * nb <= std::uint64_t{j + 1} * na);
    if (advance_a) {
      out.push_back({a0 + i % na, a0 + (i + 1) % na, b0 + j % nb});
      ++i;
    } else {
      out.push_back({a0 + i % na, b0 + (j + 1) % nb, b0 + j % nb});
      ++j;
    }
  }
}

void fan(std::uint32_t first, std::uint32_t n, bool flip, std::vector<Triangle>& out)
{
  for (std::uint32_t k = 1; k + 1 < n; ++k) {
    if (flip) {
      out.push_back({first, first + k + 1, first + k});
    } else {
      out.push_back({first, first + k, first + k + 1});
    }
  }
}

// Rings of vertices along the capsule profile, closed by a fan at each end.
void grid_samples(const Segment& s, double spacing, std::vector<Vec3d>& points, std::vector<VertexSkin>& skins,
                  std::vector<Triangle>& triangles)
{
  const Frame f = segment_frame(s);
  const double perimeter = kPi * f.cap + f.length;
  const int rings = std::max(3, static_cast<int>(std::lround(perimeter / spacing)));
  std::uint32_t previous = 0;
  std::uint32_t previous_count = 0;
  for (int k = 0; k < rings; ++k) {
    const double ps = (k + 0.5) * perimeter / rings;
    const double radial = profile(f, ps).second;
    const double circumference = kPi * (s.rx + s.rz) * radial;
    const int around = std::max(6, 2 * static_cast<int>(std::lround(0.5 * circumference / spacing)));
    const auto first = static_cast<std::uint32_t>(points.size());
    for (int m = 0; m < around; ++m) {
      const double phi = 2.0 * kPi * (m + 0.5) / around;
      const Vec3d p = surface_point(s, f, ps, phi);
      points.push_back(p);
      skins.push_back(skin_for(s, f, p));
    }
    const auto count = static_cast<std::uint32_t>(around);
    if (k == 0) {
      fan(first, count, true, triangles);
    } else {
      zip_rings(previous, previous_count, first, count, triangles);
    }
    if (k == rings - 1) {
      fan(first, count, false, triangles);
    }
    previous = first;
    previous_count = count;
  }
}

}  // namespace

const char* template_joint_name(std::uint32_t joint)
{
  static const char* const kNames[kTemplateJointCount] = {
      "hips",           "spine",          "chest",          "neck",           "head",          "left_upper_arm",
      "left_lower_arm", "left_hand",      "right_upper_arm", "right_lower_arm", "right_hand",   "left_upper_leg",
      "left_lower_leg", "left_foot",      "right_upper_leg", "right_lower_leg", "right_foot"};
  return joint < kTemplateJointCount ? kNames[joint] : "";
}

double& LimbAngles::operator[](std::size_t i)
{
  switch (i) {
    case 0: return left_shoulder;
    case 1: return right_shoulder;
    case 2: return left_hip;
    default: return right_hip;
  }
}

double LimbAngles::operator[](std::size_t i) const { return const_cast<LimbAngles&>(*this)[i]; }

Pose apply_limb_angles(const SkinnedRig& rig, const Pose& pose, const LimbAngles& angles)
{
  static constexpr double kBind[4] = {kBindShoulderAbductionDeg, kBindShoulderAbductionDeg, kBindHipAbductionDeg,
                                      kBindHipAbductionDeg};
  // Left limbs swing toward +X with a positive rotation about +Z, right limbs
  // with a negative one.
  static constexpr double kSign[4] = {1.0, -1.0, 1.0, -1.0};
  Pose out = pose;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto joint = rig.find_joint(kLimbJointNames[i]);
    if (!joint) {
      continue;
    }
    const double delta = kSign[i] * deg_to_rad(angles[i] - kBind[i]);
    out.rotations[*joint] = Quatd(Eigen::AngleAxisd(delta, Vec3d::UnitZ())) * rig.joints()[*joint].bind_local_rotation;
  }
  return out;
}

SkinnedRig build_template_humanoid(double height)
{
  if (!(height >= 0.5 && height <= 2.5)) {
    throw InvalidArgument("template height must be in [0.5, 2.5] m");
  }
  const Layout layout = make_layout();

  std::vector<Joint> joints(kTemplateJointCount);
  static constexpr int kParents[kTemplateJointCount] = {-1,     kHips,         kSpine,        kChest,
                                                        kNeck,  kChest,        kLeftUpperArm, kLeftLowerArm,
                                                        kChest, kRightUpperArm, kRightLowerArm, kHips,
                                                        kLeftUpperLeg, kLeftLowerLeg, kHips, kRightUpperLeg,
                                                        kRightLowerLeg};
  for (std::uint32_t j = 0; j < kTemplateJointCount; ++j) {
    joints[j].name = template_joint_name(j);
    joints[j].parent = kParents[j];
    const Vec3d parent_pos =
        kParents[j] < 0 ? Vec3d::Zero() : layout.joint_positions[static_cast<std::size_t>(kParents[j])];
    joints[j].bind_local_translation = height * (layout.joint_positions[j] - parent_pos);
  }

  const double spacing = kVertexSpacing * height;
  std::vector<Vec3d> points;
  std::vector<VertexSkin> skins;
  std::vector<Triangle> triangles;
  for (const auto& s : layout.center) {
    grid_samples(scaled(s, height), spacing, points, skins, triangles);
  }
  std::vector<Vec3d> left_points;
  std::vector<VertexSkin> left_skins;
  std::vector<Triangle> left_triangles;
  for (const auto& s : layout.left) {
    grid_samples(scaled(s, height), spacing, left_points, left_skins, left_triangles);
  }
  const auto left_offset = static_cast<std::uint32_t>(points.size());
  const auto right_offset = left_offset + static_cast<std::uint32_t>(left_points.size());
  points.insert(points.end(), left_points.begin(), left_points.end());
  skins.insert(skins.end(), left_skins.begin(), left_skins.end());
  for (const auto& t : left_triangles) {
    triangles.push_back({t[0] + left_offset, t[1] + left_offset, t[2] + left_offset});
  }
  // Mirroring flips handedness, so the right side winds the other way round.
  for (const auto& t : left_triangles) {
    triangles.push_back({t[0] + right_offset, t[2] + right_offset, t[1] + right_offset});
  }
  for (std::size_t i = 0; i < left_points.size(); ++i) {
    points.push_back(mirror_x(left_points[i]));
    VertexSkin skin = left_skins[i];
    for (auto& influence : skin) {
      if (influence.weight > 0.0f) {
        influence.joint = mirror_joint(influence.joint);
      }
    }
    skins.push_back(skin);
  }

  std::vector<Vec3f> vertices;
  vertices.reserve(points.size());
  for (const auto& p : points) {
    vertices.push_back(p.cast<float>());
  }
  return SkinnedRig::create(std::move(vertices), std::move(triangles), std::move(joints), std::move(skins));
}

std::vector<SurfaceSample> sample_template_surface(double height, std::size_t count, std::mt19937_64& rng)
{
  const Layout layout = make_layout();
  std::vector<Segment> segments;
  for (const auto& s : layout.center) {
    segments.push_back(scaled(s, height));
  }
  for (const auto& s : layout.left) {
    segments.push_back(scaled(s, height));
    segments.push_back(scaled(mirrored(s), height));
  }

  std::vector<Frame> frames;
  std::vector<double> areas;
  for (const auto& s : segments) {
    frames.push_back(segment_frame(s));
    const Frame& f = frames.back();
    // Lateral area of the stadium-of-revolution with the mean cross-section radius.
    const double r = 0.5 * (s.rx + s.rz);
    areas.push_back(2.0 * kPi * r * f.length + 4.0 * kPi * r * f.cap);
  }
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<SurfaceSample> out;
  out.reserve(count);
  while (out.size() < count) {
    const std::size_t index = pick(rng);
    const Segment& s = segments[index];
    const Frame& f = frames[index];
    const double perimeter = kPi * f.cap + f.length;
    const double ps = unit(rng) * perimeter;
    const double phi = unit(rng) * 2.0 * kPi;
    const double accept = unit(rng);
    if (accept > profile(f, ps).second) {
      continue;
    }
    const Vec3d p = surface_point(s, f, ps, phi);
    out.push_back(SurfaceSample{p.cast<float>(), skin_for(s, f, p)});
  }
  return out;
}

}  // namespace gsavatar
