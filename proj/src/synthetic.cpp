// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/synthetic.hpp"

#include <cmath>
#include <string>

#include "gsavatar/error.hpp"

namespace gsavatar {

namespace {

Splat random_appearance(std::mt19937_64& rng, float scale_lo, float scale_hi)
{
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::uniform_real_distribution<float> scale(scale_lo, scale_hi);
  Splat s;
  s.rotation = random_rotation(rng).cast<float>();
  s.scale = Vec3f(scale(rng), scale(rng), scale(rng));
  s.opacity = 0.3f + 0.69f * unit(rng);
  s.color = Vec3f(0.05f + 0.9f * unit(rng), 0.05f + 0.9f * unit(rng), 0.05f + 0.9f * unit(rng));
  return s;
}

}  // namespace

Quatd random_rotation(std::mt19937_64& rng)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector4d v;
  do {
    v = Eigen::Vector4d(normal(rng), normal(rng), normal(rng), normal(rng));
  } while (v.norm() < 1e-6);
  v.normalize();
  return canonicalize(Quatd(v[3], v[0], v[1], v[2]));
}

SplatCloud make_synthetic_subject(const SyntheticOptions& options)
{
  if (options.splat_count == 0) {
    throw InvalidArgument("synthetic subject needs at least one splat");
  }
  std::mt19937_64 rng(options.seed);
  const SkinnedRig rig = build_template_humanoid(options.template_height);
  const Pose posed = apply_limb_angles(rig, Pose::bind_pose(rig), options.limbs);
  const auto skin = compute_skin_matrices(rig, place_pose(rig, posed, options.placement));
  const auto samples = sample_template_surface(options.template_height, options.splat_count, rng);

  std::normal_distribution<double> noise(0.0, options.noise_sigma);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SplatCloud cloud;
  cloud.splats.reserve(options.splat_count + options.floor_splats + options.clutter_splats);
  for (const auto& sample : samples) {
    Mat4d m = Mat4d::Zero();
    for (const auto& influence : sample.skin) {
      if (influence.weight > 0.0f) {
        m += static_cast<double>(influence.weight) * skin[influence.joint];
      }
    }
    const Vec3d p = m.block<3, 3>(0, 0) * sample.position.cast<double>() + m.block<3, 1>(0, 3);
    Splat s = random_appearance(rng, 0.002f * static_cast<float>(options.placement.scale),
                                0.008f * static_cast<float>(options.placement.scale));
    s.position = (p + Vec3d(noise(rng), noise(rng), noise(rng))).cast<float>();
    cloud.splats.push_back(std::move(s));
  }

  const Vec3d& base = options.placement.translation;
  for (std::size_t i = 0; i < options.floor_splats; ++i) {
    const double r = options.floor_radius * std::sqrt(unit(rng));
    const double a = 2.0 * kPi * unit(rng);
    Splat s = random_appearance(rng, 0.01f, 0.03f);
    s.scale.y() = 0.002f;
    s.rotation = Quatf::Identity();
    s.opacity = 0.9f;
    s.position = Vec3d(base.x() + r * std::cos(a), base.y() + 0.004 * (unit(rng) - 0.5), base.z() + r * std::sin(a))
                     .cast<float>();
    cloud.splats.push_back(std::move(s));
  }

  const double height = options.template_height * options.placement.scale;
  for (std::size_t i = 0; i < options.clutter_splats; ++i) {
    Splat s = random_appearance(rng, 0.005f, 0.02f);
    if (i % 2 == 0) {
      // Furniture-like boxes standing on the floor, away from the subject.
      const double a = 2.0 * kPi * unit(rng);
      const double r = 1.2 * height + 0.5 * height * unit(rng);
      s.position = Vec3d(base.x() + r * std::cos(a), base.y() + 0.8 * height * unit(rng), base.z() + r * std::sin(a))
                       .cast<float>();
    } else {
      // Faint floaters anywhere in the capture volume.
      s.position = Vec3d(base.x() + 3.0 * (unit(rng) - 0.5), base.y() + 2.0 * height * unit(rng),
                         base.z() + 3.0 * (unit(rng) - 0.5))
                       .cast<float>();
      s.opacity = 0.01f + 0.02f * static_cast<float>(unit(rng));
    }
    cloud.splats.push_back(std::move(s));
  }
  return cloud;
}

AnimationClip make_demo_clip(const SkinnedRig& rig, double duration)
{
  if (!(duration > 0.0)) {
    throw InvalidArgument("clip duration must be positive");
  }
  AnimationClip clip;
  clip.duration = duration;
  clip.loop = true;
  clip.tracks.resize(rig.joint_count());
  constexpr int kKeys = 9;
  auto add_track = [&](const char* name, const Vec3d& axis, double amplitude_deg, double phase) {
    const auto joint = rig.find_joint(name);
    if (!joint) {
      return;
    }
    const Quatd bind = rig.joints()[*joint].bind_local_rotation;
    for (int k = 0; k < kKeys; ++k) {
      const double u = static_cast<double>(k) / (kKeys - 1);
      const double angle = deg_to_rad(amplitude_deg) * std::sin(2.0 * kPi * u + phase);
      clip.tracks[*joint].push_back(RotationKey{u * duration, Quatd(Eigen::AngleAxisd(angle, axis)) * bind});
    }
  };
  add_track("left_upper_arm", Vec3d::UnitX(), 40.0, 0.0);
  add_track("right_upper_arm", Vec3d::UnitX(), 40.0, kPi);
  add_track("left_lower_arm", Vec3d::UnitX(), 30.0, 0.5 * kPi);
  add_track("right_lower_arm", Vec3d::UnitX(), 30.0, 1.5 * kPi);
  add_track("left_upper_leg", Vec3d::UnitX(), 25.0, kPi);
  add_track("right_upper_leg", Vec3d::UnitX(), 25.0, 0.0);
  add_track("left_lower_leg", Vec3d::UnitX(), 20.0, 0.5 * kPi);
  add_track("right_lower_leg", Vec3d::UnitX(), 20.0, 1.5 * kPi);
  add_track("spine", Vec3d::UnitY(), 10.0, 0.0);
  return clip;
}

SplatCloud random_splat_cloud(std::size_t count, int sh_degree, std::size_t extras, std::mt19937_64& rng)
{
  if (sh_degree < 0 || sh_degree > 3) {
    throw InvalidArgument("sh_degree must be in [0, 3]");
  }
  std::uniform_real_distribution<float> pos(-5.0f, 5.0f);
  // Appearance is drawn in file space and decoded: not every float opacity
  // or color is the decode of some float, and only decoded values round-trip.
  std::uniform_real_distribution<float> raw_scale(-9.0f, -1.0f);
  std::uniform_real_distribution<float> raw_opacity(-6.9f, 6.9f);
  std::uniform_real_distribution<float> raw_dc(-1.77f, 1.77f);
  std::uniform_real_distribution<float> coeff(-1.0f, 1.0f);

  SplatCloud cloud;
  cloud.sh_degree = sh_degree;
  for (std::size_t e = 0; e < extras; ++e) {
    cloud.extra_field_names.push_back("extra_" + std::to_string(e));
  }
  cloud.splats.resize(count);
  for (auto& s : cloud.splats) {
    s.position = Vec3f(pos(rng), pos(rng), pos(rng));
    s.rotation = random_rotation(rng).cast<float>();
    const float opacity = raw_opacity(rng);
    const Vec3f scale(raw_scale(rng), raw_scale(rng), raw_scale(rng));
    const Vec3f dc(raw_dc(rng), raw_dc(rng), raw_dc(rng));
    const DecodedAppearance appearance = decode_appearance(opacity, scale, dc);
    s.scale = appearance.scale;
    s.opacity = appearance.opacity;
    s.color = appearance.color;
    s.sh_rest.resize(sh_rest_count(sh_degree));
    for (auto& c : s.sh_rest) {
      c = coeff(rng);
    }
    s.extras.resize(extras);
    for (auto& c : s.extras) {
      c = coeff(rng);
    }
  }
  return cloud;
}

}  // namespace gsavatar
