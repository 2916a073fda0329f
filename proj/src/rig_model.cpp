// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/rig_model.hpp"

#include <algorithm>
#include <cmath>

#include "gsavatar/error.hpp"

namespace gsavatar {

SkinnedRig SkinnedRig::create(std::vector<Vec3f> vertices, std::vector<std::array<std::uint32_t, 3>> triangles,
                              std::vector<Joint> joints, std::vector<VertexSkin> skin)
{
  if (joints.empty()) {
    throw RigError("rig has no joints");
  }
  if (skin.size() != vertices.size()) {
    throw RigError("skin has " + std::to_string(skin.size()) + " entries for " + std::to_string(vertices.size()) +
                   " vertices");
  }
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const int parent = joints[j].parent;
    if (j == 0 && parent != -1) {
      throw RigError("joint 0 must be the root");
    }
    if (j > 0 && (parent < 0 || parent >= static_cast<int>(j))) {
      throw RigError("joint '" + joints[j].name + "' has parent " + std::to_string(parent) +
                     "; joints must be topologically ordered with a single root");
    }
    const double norm = joints[j].bind_local_rotation.norm();
    if (std::abs(norm - 1.0) > 1e-4) {
      throw RigError("joint '" + joints[j].name + "' bind rotation is not unit");
    }
    joints[j].bind_local_rotation.normalize();
  }

  std::vector<char> referenced(joints.size(), 0);
  for (std::size_t v = 0; v < skin.size(); ++v) {
    double sum = 0.0;
    for (const auto& influence : skin[v]) {
      if (influence.weight < 0.0f || !std::isfinite(influence.weight)) {
        throw RigError("vertex " + std::to_string(v) + " has a negative skin weight");
      }
      if (influence.weight > 0.0f) {
        if (influence.joint >= joints.size()) {
          throw RigError("vertex " + std::to_string(v) + " references joint " + std::to_string(influence.joint));
        }
        referenced[influence.joint] = 1;
      }
      sum += influence.weight;
    }
    if (std::abs(sum - 1.0) > 1e-4) {
      throw RigError("vertex " + std::to_string(v) + " skin weights sum to " + std::to_string(sum));
    }
  }
  for (std::size_t j = 0; j < joints.size(); ++j) {
    if (!referenced[j]) {
      throw RigError("joint '" + joints[j].name + "' is not referenced by any vertex");
    }
  }
  for (const auto& tri : triangles) {
    for (auto index : tri) {
      if (index >= vertices.size()) {
        throw RigError("triangle index " + std::to_string(index) + " out of range");
      }
    }
  }

  SkinnedRig rig;
  rig.vertices_ = std::move(vertices);
  rig.triangles_ = std::move(triangles);
  rig.joints_ = std::move(joints);
  rig.skin_ = std::move(skin);
  rig.global_bind_ = compute_global_transforms(rig, Pose::bind_pose(rig));
  rig.inverse_bind_.reserve(rig.global_bind_.size());
  for (const Mat4d& global : rig.global_bind_) {
    rig.inverse_bind_.push_back(global.inverse());
    if (!(rig.inverse_bind_.back() * global).isIdentity(1e-5)) {
      throw RigError("singular joint bind transform");
    }
  }
  return rig;
}

std::optional<std::size_t> SkinnedRig::find_joint(const std::string& name) const
{
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    if (joints_[j].name == name) {
      return j;
    }
  }
  return std::nullopt;
}

std::uint32_t SkinnedRig::dominant_joint(std::size_t v) const
{
  const auto& influences = skin_[v];
  std::uint32_t best = 0;
  float best_weight = -1.0f;
  for (const auto& influence : influences) {
    if (influence.weight <= 0.0f) {
      continue;
    }
    if (influence.weight > best_weight || (influence.weight == best_weight && influence.joint < best)) {
      best = influence.joint;
      best_weight = influence.weight;
    }
  }
  return best;
}

Pose Pose::bind_pose(const SkinnedRig& rig)
{
  Pose pose;
  pose.rotations.reserve(rig.joint_count());
  for (const auto& joint : rig.joints()) {
    pose.rotations.push_back(joint.bind_local_rotation);
  }
  return pose;
}

std::vector<Mat4d> compute_global_transforms(const SkinnedRig& rig, const Pose& pose)
{
  const auto& joints = rig.joints();
  if (pose.rotations.size() != joints.size()) {
    throw InvalidArgument("pose has " + std::to_string(pose.rotations.size()) + " rotations for " +
                          std::to_string(joints.size()) + " joints");
  }
  std::vector<Mat4d> global(joints.size());
  for (std::size_t j = 0; j < joints.size(); ++j) {
    Mat4d local = Mat4d::Identity();
    local.block<3, 3>(0, 0) = pose.rotations[j].normalized().toRotationMatrix();
    local.block<3, 1>(0, 3) = joints[j].bind_local_translation;
    if (joints[j].parent < 0) {
      global[j] = translation_matrix(pose.root_translation) * scale_matrix(pose.root_uniform_scale) * local;
    } else {
      global[j] = global[static_cast<std::size_t>(joints[j].parent)] * local;
    }
  }
  return global;
}

std::vector<Mat4d> compute_skin_matrices(const SkinnedRig& rig, const Pose& pose)
{
  std::vector<Mat4d> skin = compute_global_transforms(rig, pose);
  for (std::size_t j = 0; j < skin.size(); ++j) {
    skin[j] = skin[j] * rig.inverse_bind()[j];
  }
  return skin;
}

Pose place_pose(const SkinnedRig& rig, const Pose& pose, const Similarity& placement)
{
  // F * T(rt) S(rs) T(b) R(q) == T(rt') S(s rs) T(b) R(Ry q)
  // with rt' = t + s Ry rt + s rs (Ry b - b).
  const Quatd yaw = yaw_rotation(placement.yaw);
  const Vec3d bind_root = rig.joints().front().bind_local_translation;
  const double scale = placement.scale * pose.root_uniform_scale;

  Pose placed = pose;
  placed.root_uniform_scale = scale;
  placed.rotations.front() = yaw * pose.rotations.front();
  placed.root_translation = placement.translation + placement.scale * (yaw * pose.root_translation) +
                            scale * (yaw * bind_root - bind_root);
  return placed;
}

Mat4d blend_vertex_matrix(const SkinnedRig& rig, const std::vector<Mat4d>& skin_matrices, std::size_t vertex)
{
  Mat4d blended = Mat4d::Zero();
  for (const auto& influence : rig.skin()[vertex]) {
    if (influence.weight > 0.0f) {
      blended += static_cast<double>(influence.weight) * skin_matrices[influence.joint];
    }
  }
  return blended;
}

std::vector<Vec3f> skin_vertices(const SkinnedRig& rig, const std::vector<Mat4d>& skin_matrices)
{
  std::vector<Vec3f> out(rig.vertex_count());
  for (std::size_t v = 0; v < out.size(); ++v) {
    const Mat4d m = blend_vertex_matrix(rig, skin_matrices, v);
    const Vec3d p = rig.vertices()[v].cast<double>();
    out[v] = (m.block<3, 3>(0, 0) * p + m.block<3, 1>(0, 3)).cast<float>();
  }
  return out;
}

std::vector<Vec3f> skin_vertices(const SkinnedRig& rig, const Pose& pose)
{
  return skin_vertices(rig, compute_skin_matrices(rig, pose));
}

Quatd slerp_shortest(const Quatd& a, const Quatd& b, double t)
{
  if (t <= 0.0) {
    return a;
  }
  if (t >= 1.0) {
    return b;
  }
  double cos_theta = a.dot(b);
  Eigen::Vector4d target = b.coeffs();
  if (cos_theta < 0.0) {
    target = -target;
    cos_theta = -cos_theta;
  }
  Eigen::Vector4d mixed;
  if (cos_theta > 1.0 - 1e-12) {
    mixed = (1.0 - t) * a.coeffs() + t * target;
  } else {
    const double theta = std::acos(std::min(cos_theta, 1.0));
    const double sin_theta = std::sin(theta);
    mixed = (std::sin((1.0 - t) * theta) / sin_theta) * a.coeffs() + (std::sin(t * theta) / sin_theta) * target;
  }
  Quatd out;
  out.coeffs() = mixed.normalized();
  return out;
}

void AnimationClip::validate(const SkinnedRig& rig) const
{
  if (tracks.size() != rig.joint_count()) {
    throw RigError("clip has " + std::to_string(tracks.size()) + " tracks for " +
                   std::to_string(rig.joint_count()) + " joints");
  }
  double last = 0.0;
  auto check = [&](const auto& keys, const std::string& what) {
    for (std::size_t k = 0; k < keys.size(); ++k) {
      if (k > 0 && !(keys[k].time > keys[k - 1].time)) {
        throw RigError(what + ": key times must be strictly increasing");
      }
      last = std::max(last, keys[k].time);
    }
  };
  for (std::size_t j = 0; j < tracks.size(); ++j) {
    check(tracks[j], "track '" + rig.joints()[j].name + "'");
    for (const auto& key : tracks[j]) {
      if (std::abs(key.rotation.norm() - 1.0) > 1e-4) {
        throw RigError("track '" + rig.joints()[j].name + "': rotation is not unit");
      }
    }
  }
  check(root_translation, "root translation track");
  if (duration < last) {
    throw RigError("clip duration is shorter than its last key");
  }
}

namespace {

// Index of the last key with time <= t (keys sorted, t strictly inside).
template <typename Key>
std::size_t bracket(const std::vector<Key>& keys, double t)
{
  const auto it =
      std::upper_bound(keys.begin(), keys.end(), t, [](double value, const Key& key) { return value < key.time; });
  return static_cast<std::size_t>(it - keys.begin()) - 1;
}

}  // namespace

Pose sample_animation(const AnimationClip& clip, const SkinnedRig& rig, double t)
{
  if (!(t >= 0.0)) {
    throw InvalidArgument("animation time must be >= 0");
  }
  if (clip.tracks.size() != rig.joint_count()) {
    throw InvalidArgument("clip does not match rig joint count");
  }
  if (clip.loop && clip.duration > 0.0 && t > clip.duration) {
    t = std::fmod(t, clip.duration);
  }

  Pose pose;
  pose.rotations.resize(rig.joint_count());
  for (std::size_t j = 0; j < rig.joint_count(); ++j) {
    const auto& keys = clip.tracks[j];
    if (keys.empty()) {
      pose.rotations[j] = rig.joints()[j].bind_local_rotation;
    } else if (t <= keys.front().time) {
      pose.rotations[j] = keys.front().rotation;
    } else if (t >= keys.back().time) {
      pose.rotations[j] = keys.back().rotation;
    } else {
      const std::size_t k = bracket(keys, t);
      if (t == keys[k].time) {
        pose.rotations[j] = keys[k].rotation;
      } else {
        const double u = (t - keys[k].time) / (keys[k + 1].time - keys[k].time);
        pose.rotations[j] = slerp_shortest(keys[k].rotation, keys[k + 1].rotation, u);
      }
    }
  }

  const auto& root = clip.root_translation;
  if (!root.empty()) {
    if (t <= root.front().time) {
      pose.root_translation = root.front().translation;
    } else if (t >= root.back().time) {
      pose.root_translation = root.back().translation;
    } else {
      const std::size_t k = bracket(root, t);
      const double u = (t - root[k].time) / (root[k + 1].time - root[k].time);
      pose.root_translation = (1.0 - u) * root[k].translation + u * root[k + 1].translation;
    }
  }
  return pose;
}

AnimationClip make_static_clip(const Pose& pose, double duration)
{
  AnimationClip clip;
  clip.duration = duration;
  clip.loop = true;
  clip.tracks.resize(pose.rotations.size());
  for (std::size_t j = 0; j < pose.rotations.size(); ++j) {
    clip.tracks[j].push_back(RotationKey{0.0, pose.rotations[j]});
  }
  if (!pose.root_translation.isZero(0.0)) {
    clip.root_translation.push_back(TranslationKey{0.0, pose.root_translation});
  }
  return clip;
}

}  // namespace gsavatar
