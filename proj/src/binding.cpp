// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/binding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gsavatar/runtime.hpp"
#include "gsavatar/spatial_index.hpp"

namespace gsavatar {

namespace {
constexpr std::size_t kBindGrain = 1024;
constexpr double kSingularDet = 1e-8;
}  // namespace

BundleFit BundleFit::from(const FitResult& fit)
{
  BundleFit out;
  out.yaw = static_cast<float>(fit.yaw);
  out.translation = fit.translation.cast<float>();
  out.scale = static_cast<float>(fit.uniform_scale);
  out.limb_rotations.reserve(fit.limb_pose.rotations.size());
  for (const auto& q : fit.limb_pose.rotations) {
    out.limb_rotations.push_back(canonicalize(q.normalized()).cast<float>());
  }
  return out;
}

Similarity BundleFit::similarity() const
{
  return Similarity{static_cast<double>(yaw), translation.cast<double>(), static_cast<double>(scale)};
}

Pose BundleFit::limb_pose() const
{
  Pose pose;
  pose.rotations.reserve(limb_rotations.size());
  for (const auto& q : limb_rotations) {
    pose.rotations.push_back(q.cast<double>());
  }
  return pose;
}

Pose BundleFit::placed_pose(const SkinnedRig& rig) const { return place_pose(rig, limb_pose(), similarity()); }

BindingSet compute_bindings(const SplatCloud& cloud, const SkinnedRig& rig, const BundleFit& fit, ThreadPool* pool)
{
  if (cloud.empty()) {
    throw InvalidArgument("cannot bind an empty cloud");
  }
  if (fit.limb_rotations.size() != rig.joint_count()) {
    throw InvalidArgument("fit pose does not match the rig's joint count");
  }
  if (!(fit.scale > 0.0f)) {
    throw InvalidArgument("fit scale must be positive");
  }

  const auto skin = compute_skin_matrices(rig, fit.placed_pose(rig));
  const std::size_t vertex_count = rig.vertex_count();

  // Per-vertex frame at the fit pose: skinned position, inverse matrix and
  // rotation factor. Singular vertices are only an error if a splat uses them.
  std::vector<Vec3f> skinned(vertex_count);
  std::vector<Mat4d> inverse(vertex_count);
  std::vector<Quatd> frame_rotation(vertex_count);
  std::vector<char> singular(vertex_count, 0);
  parallel_for(pool, vertex_count, 256, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const Mat4d m = blend_vertex_matrix(rig, skin, v);
      skinned[v] = (m.block<3, 3>(0, 0) * rig.vertices()[v].cast<double>() + m.block<3, 1>(0, 3)).cast<float>();
      const Mat3d linear = m.block<3, 3>(0, 0);
      if (std::abs(linear.determinant()) < kSingularDet) {
        singular[v] = 1;
        continue;
      }
      try {
        frame_rotation[v] = extract_rotation(linear);
      } catch (const OrientationError&) {
        singular[v] = 1;
        continue;
      }
      inverse[v] = m.inverse();
    }
  });

  const SpatialIndex index = build_vertex_index(skinned);
  const std::size_t n = cloud.size();
  BindingSet out;
  out.bindings.resize(n);
  out.colors.resize(n);
  out.opacities.resize(n);
  out.vertex_distance.resize(n);
  out.source_index.resize(n);
  std::vector<char> failed(n, 0);
  const double inv_scale = 1.0 / static_cast<double>(fit.scale);

  parallel_for(pool, n, kBindGrain, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Splat& s = cloud.splats[i];
      const auto hit = index.nearest(s.position);
      const std::uint32_t v = hit.index;
      SplatBinding& b = out.bindings[i];
      b.vertex = v;
      out.colors[i] = s.color;
      out.opacities[i] = s.opacity;
      out.vertex_distance[i] = static_cast<float>(std::sqrt(hit.distance_squared));
      out.source_index[i] = static_cast<std::uint32_t>(i);
      if (singular[v]) {
        failed[i] = 1;
        continue;
      }
      const Mat4d& inv = inverse[v];
      const Vec3d p = s.position.cast<double>();
      b.rel_position = (inv.block<3, 3>(0, 0) * p + inv.block<3, 1>(0, 3)).cast<float>();
      const Quatd rel = frame_rotation[v].conjugate() * s.rotation.cast<double>();
      b.rel_rotation = canonicalize(rel.normalized()).cast<float>();
      b.splat_scale = (s.scale.cast<double>() * inv_scale).cast<float>();
    }
  });

  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) {
      bad.push_back(i);
    }
  }
  if (!bad.empty()) {
    throw BindingError(std::to_string(bad.size()) + " splat(s) bound to vertices with a singular skinning matrix",
                       std::move(bad));
  }
  return out;
}

void GroupTable::rebuild_membership(std::size_t splat_count)
{
  group_of_splat.assign(splat_count, 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::uint32_t i = groups[g].start; i < groups[g].end && i < splat_count; ++i) {
      group_of_splat[i] = static_cast<std::uint32_t>(g);
    }
  }
}

GroupTable assign_groups(BindingSet& bindings, const SkinnedRig& rig)
{
  const std::size_t n = bindings.size();
  std::vector<std::uint32_t> bone(n);
  for (std::size_t i = 0; i < n; ++i) {
    bone[i] = rig.dominant_joint(bindings.bindings[i].vertex);
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return bone[a] < bone[b]; });

  auto permute = [&](auto& values) {
    auto copy = values;
    for (std::size_t k = 0; k < n; ++k) {
      values[k] = copy[order[k]];
    }
  };
  permute(bindings.bindings);
  permute(bindings.colors);
  permute(bindings.opacities);
  permute(bindings.vertex_distance);
  permute(bindings.source_index);

  GroupTable table;
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint32_t b = bone[order[k]];
    if (table.groups.empty() || table.groups.back().bone != b) {
      table.groups.push_back(GroupRange{b, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k)});
    }
    table.groups.back().end = static_cast<std::uint32_t>(k + 1);
  }
  table.rebuild_membership(n);
  return table;
}

}  // namespace gsavatar
