// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gsavatar/bundle.hpp"
#include "gsavatar/error.hpp"
#include "gsavatar/parallel.hpp"
#include "gsavatar/rig_model.hpp"

namespace gsavatar {

/// Rotation factor of the polar decomposition of `linear`, by averaging with
/// the inverse transpose until the step is below 1e-9 (at most 30 times).
/// Throws OrientationError if |det| <= 1e-8 or the result is a reflection.
Quatd extract_rotation(const Mat3d& linear);

struct CameraState {
  Vec3f position = Vec3f::Zero();
  Vec3f forward = Vec3f(0.0f, 0.0f, -1.0f);  ///< unit within 1e-6

  /// Throws InvalidArgument if forward is not unit length.
  void validate() const;
  double depth(const Vec3f& p) const;
};

/// Camera on a horizontal circle of `radius` around `target` at angle `azimuth`
/// (radians, 0 = on the +Z side), raised by `elevation` and looking at the target.
CameraState orbit_camera(const Vec3f& target, double radius, double azimuth, double elevation = 0.0);

struct SplatFrame {
  std::vector<Vec3f> positions;
  std::vector<Quatf> rotations;
};

struct FramePacket {
  std::vector<Vec3f> positions;
  std::vector<Quatf> rotations;
  DrawOrder order;  ///< back to front
  std::uint64_t frame_id = 0;
};

enum class SortMode { kGroup, kFull };

const char* sort_mode_name(SortMode mode);
/// "group" or "full"; throws InvalidArgument otherwise.
SortMode parse_sort_mode(const std::string& name);

/// Player state for one bundle on one rig. The constructor checks the rig
/// hash and collects the vertices any splat is bound to, so per-frame work
/// touches only those.
class AvatarRuntime {
 public:
  AvatarRuntime(const AvatarBundle& bundle, const SkinnedRig& rig, ThreadPool* pool = nullptr);

  /// `pose` is rig-local; the bundle's fit placement is applied on top.
  void update(const Pose& pose, SplatFrame& out) const;
  SplatFrame update(const Pose& pose) const;

  /// Sample, update and sort one frame.
  FramePacket frame(const AnimationClip& clip, double t, const CameraState& camera, SortMode mode);

  const AvatarBundle& bundle() const noexcept { return *bundle_; }
  const SkinnedRig& rig() const noexcept { return *rig_; }
  const std::vector<std::uint32_t>& used_vertices() const noexcept { return used_vertices_; }

 private:
  const AvatarBundle* bundle_;
  const SkinnedRig* rig_;
  ThreadPool* pool_;
  Similarity placement_;
  std::vector<std::uint32_t> used_vertices_;
  std::vector<std::uint32_t> slot_of_vertex_;
  std::uint64_t next_frame_id_ = 0;
};

/// Per-splat world scale for a pose: stored scale x fit scale x pose root scale.
std::vector<Vec3f> splat_scales(const AvatarBundle& bundle, const Pose& pose);

/// Stateless form of AvatarRuntime::update. Throws CompatibilityError when
/// the rig does not match the bundle's hash.
SplatFrame update_splats(const AvatarBundle& bundle, const SkinnedRig& rig, const Pose& pose,
                         ThreadPool* pool = nullptr);

/// dot(p - camera.position, camera.forward) in double.
std::vector<double> splat_depths(std::span<const Vec3f> positions, const CameraState& camera);

/// Depth descending, ties by ascending index.
DrawOrder full_sort(std::span<const Vec3f> positions, const CameraState& camera);

/// Groups ordered by the depth of their current centroid (descending, ties
/// by group id); splats keep bundle order inside a group.
DrawOrder group_sort(std::span<const Vec3f> positions, const GroupTable& groups, const CameraState& camera);

struct OrderDivergence {
  double inversion_fraction = 0.0;
  double max_depth_error = 0.0;
};

/// Pairs ordered differently by `a` and `b`, over C(N,2), counted exactly by
/// merge sort. max_depth_error is the largest |depth difference| between
/// neighbours in `a` that `b` draws the other way round.
OrderDivergence order_divergence(const DrawOrder& a, const DrawOrder& b, std::span<const double> depths);

/// One-shot frame: builds an AvatarRuntime and renders time t.
FramePacket run_frame(const AvatarBundle& bundle, const SkinnedRig& rig, const AnimationClip& clip, double t,
                      const CameraState& camera, SortMode mode, ThreadPool* pool = nullptr);

}  // namespace gsavatar
