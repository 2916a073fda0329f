// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include "gsavatar/rig_model.hpp"
#include "gsavatar/splat_io.hpp"
#include "gsavatar/template_humanoid.hpp"

namespace gsavatar {

/// Generators for test scans with known ground truth.
struct SyntheticOptions {
  std::size_t splat_count = 20000;
  double template_height = 1.0;
  Similarity placement;          ///< world placement of the template
  LimbAngles limbs;              ///< pose of the subject
  double noise_sigma = 0.001;    ///< isotropic position noise, meters
  std::size_t floor_splats = 0;  ///< opaque disc under the feet
  double floor_radius = 2.0;
  std::size_t clutter_splats = 0;  ///< half far-away boxes, half faint floaters
  std::uint64_t seed = 1;
};

/// Splats sampled on the template surface, posed by `limbs`, placed by
/// `placement` and jittered. Subject splats come first, then floor, then
/// clutter.
SplatCloud make_synthetic_subject(const SyntheticOptions& options);

/// Cloud with random attributes that survive a PLY round trip exactly;
/// appearance values are decodes of uniformly random file values. `sh_degree` in [0, 3]; `extras` adds that many unknown float
/// properties.
SplatCloud random_splat_cloud(std::size_t count, int sh_degree, std::size_t extras, std::mt19937_64& rng);

/// Looping clip that swings the arms and bends the knees and elbows. Joints
/// the rig does not have are left at their bind rotation.
AnimationClip make_demo_clip(const SkinnedRig& rig, double duration = 2.0);

/// Uniformly random unit quaternion with w >= 0.
Quatd random_rotation(std::mt19937_64& rng);

}  // namespace gsavatar
