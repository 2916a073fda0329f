// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "gsavatar/error.hpp"
#include "gsavatar/parallel.hpp"
#include "gsavatar/rig_model.hpp"
#include "gsavatar/splat_io.hpp"
#include "gsavatar/template_fit.hpp"

namespace gsavatar {

/// Fit placement as persisted: 32-bit values only, so binding and playback
/// see bit-identical poses.
struct BundleFit {
  float yaw = 0.0f;
  Vec3f translation = Vec3f::Zero();
  float scale = 1.0f;
  std::vector<Quatf> limb_rotations;  ///< one per joint, xyzw

  static BundleFit from(const FitResult& fit);
  Similarity similarity() const;
  Pose limb_pose() const;
  /// Rig-local pose with the placement folded into the root.
  Pose placed_pose(const SkinnedRig& rig) const;
};

/// A splat expressed in the blended skinning frame of its nearest vertex.
struct SplatBinding {
  std::uint32_t vertex = 0;
  Vec3f rel_position = Vec3f::Zero();
  Quatf rel_rotation = Quatf::Identity();
  Vec3f splat_scale = Vec3f::Ones();  ///< divided by the fit scale
};

struct BindingSet {
  std::vector<SplatBinding> bindings;
  std::vector<Vec3f> colors;
  std::vector<float> opacities;
  std::vector<float> vertex_distance;     ///< distance to the bound vertex at bind time
  std::vector<std::uint32_t> source_index;  ///< splat index in the input cloud

  std::size_t size() const noexcept { return bindings.size(); }
};

class BindingError : public Error {
 public:
  BindingError(const std::string& what, std::vector<std::size_t> splats) : Error(what), splats_(std::move(splats)) {}
  const std::vector<std::size_t>& splats() const noexcept { return splats_; }

 private:
  std::vector<std::size_t> splats_;
};

/// Binds each splat to its nearest skinned vertex at the fit pose and stores
/// the splat's position and rotation relative to that vertex's blended
/// skinning matrix. Throws BindingError listing splats whose vertex matrix is
/// singular.
BindingSet compute_bindings(const SplatCloud& cloud, const SkinnedRig& rig, const BundleFit& fit,
                            ThreadPool* pool = nullptr);

struct GroupRange {
  std::uint32_t bone = 0;
  std::uint32_t start = 0;
  std::uint32_t end = 0;
};

struct GroupTable {
  std::vector<std::uint32_t> group_of_splat;
  std::vector<GroupRange> groups;

  /// Recomputes group_of_splat from the ranges.
  void rebuild_membership(std::size_t splat_count);
};

/// Groups splats by the dominant joint of their bound vertex and stably
/// reorders `bindings` so that every group is one contiguous range.
GroupTable assign_groups(BindingSet& bindings, const SkinnedRig& rig);

}  // namespace gsavatar
