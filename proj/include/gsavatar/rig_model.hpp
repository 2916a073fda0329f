// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gsavatar/types.hpp"

namespace gsavatar {

struct Joint {
  std::string name;
  int parent = -1;  ///< -1 only for the root; otherwise < own index
  Quatd bind_local_rotation = Quatd::Identity();
  Vec3d bind_local_translation = Vec3d::Zero();
};

struct SkinInfluence {
  std::uint32_t joint = 0;
  float weight = 0.0f;
};

/// Up to four influences per vertex; unused slots have weight 0.
using VertexSkin = std::array<SkinInfluence, 4>;

/// Skinned "background" mesh. Construct with SkinnedRig::create, which
/// validates the invariants and caches the inverse bind matrices.
class SkinnedRig {
 public:
  SkinnedRig() = default;

  static SkinnedRig create(std::vector<Vec3f> vertices, std::vector<std::array<std::uint32_t, 3>> triangles,
                           std::vector<Joint> joints, std::vector<VertexSkin> skin);

  const std::vector<Vec3f>& vertices() const noexcept { return vertices_; }
  const std::vector<std::array<std::uint32_t, 3>>& triangles() const noexcept { return triangles_; }
  const std::vector<Joint>& joints() const noexcept { return joints_; }
  const std::vector<VertexSkin>& skin() const noexcept { return skin_; }
  const std::vector<Mat4d>& inverse_bind() const noexcept { return inverse_bind_; }
  const std::vector<Mat4d>& global_bind() const noexcept { return global_bind_; }

  std::size_t vertex_count() const noexcept { return vertices_.size(); }
  std::size_t joint_count() const noexcept { return joints_.size(); }

  /// Index of the joint with this name, or nullopt.
  std::optional<std::size_t> find_joint(const std::string& name) const;

  /// Joint carrying the largest weight on vertex v (ties -> smaller index).
  std::uint32_t dominant_joint(std::size_t v) const;

 private:
  std::vector<Vec3f> vertices_;
  std::vector<std::array<std::uint32_t, 3>> triangles_;
  std::vector<Joint> joints_;
  std::vector<VertexSkin> skin_;
  std::vector<Mat4d> global_bind_;
  std::vector<Mat4d> inverse_bind_;
};

/// Absolute local joint rotations plus a root placement. Bind pose is the pose
/// whose rotations equal the joints' bind rotations.
struct Pose {
  std::vector<Quatd> rotations;
  Vec3d root_translation = Vec3d::Zero();
  double root_uniform_scale = 1.0;

  static Pose bind_pose(const SkinnedRig& rig);
};

struct RotationKey {
  double time = 0.0;
  Quatd rotation = Quatd::Identity();
};

struct TranslationKey {
  double time = 0.0;
  Vec3d translation = Vec3d::Zero();
};

struct AnimationClip {
  double duration = 0.0;
  bool loop = false;
  /// Indexed by joint; empty track -> bind rotation.
  std::vector<std::vector<RotationKey>> tracks;
  std::vector<TranslationKey> root_translation;

  /// Throws RigError on unsorted keys or a duration shorter than the last key.
  void validate(const SkinnedRig& rig) const;
};

/// World placement of a rig: p -> translation + scale * Ry(yaw) * p.
struct Similarity {
  double yaw = 0.0;
  Vec3d translation = Vec3d::Zero();
  double scale = 1.0;

  Mat4d matrix() const
  {
    return translation_matrix(translation) * rotation_matrix(yaw_rotation(yaw)) * scale_matrix(scale);
  }
};

/// Folds `placement` into the root of a rig-local pose, so that
/// compute_skin_matrices(rig, place_pose(rig, pose, F)) == F * compute_skin_matrices(rig, pose).
Pose place_pose(const SkinnedRig& rig, const Pose& pose, const Similarity& placement);

/// S[j] = global[j] * inverse_bind[j]; global[j] = global[parent] * T(bind_t) * R(pose_j),
/// with the root additionally left-multiplied by T(root_translation) * S(root_scale).
std::vector<Mat4d> compute_skin_matrices(const SkinnedRig& rig, const Pose& pose);

/// Joint global transforms (without the inverse bind).
std::vector<Mat4d> compute_global_transforms(const SkinnedRig& rig, const Pose& pose);

/// Linear blend: sum_k w_k * S[j_k].
Mat4d blend_vertex_matrix(const SkinnedRig& rig, const std::vector<Mat4d>& skin_matrices, std::size_t vertex);

std::vector<Vec3f> skin_vertices(const SkinnedRig& rig, const Pose& pose);
std::vector<Vec3f> skin_vertices(const SkinnedRig& rig, const std::vector<Mat4d>& skin_matrices);

/// Shortest-arc slerp. t == 0 returns a exactly, t == 1 returns b exactly.
Quatd slerp_shortest(const Quatd& a, const Quatd& b, double t);

Pose sample_animation(const AnimationClip& clip, const SkinnedRig& rig, double t);

/// A single-key clip holding `pose` for its whole duration.
AnimationClip make_static_clip(const Pose& pose, double duration = 1.0);

}  // namespace gsavatar
