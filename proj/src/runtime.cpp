// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/LU>

namespace gsavatar {

namespace {

constexpr double kMinDeterminant = 1e-8;
constexpr int kPolarIterations = 30;
constexpr double kPolarTolerance = 1e-9;
constexpr std::size_t kVertexGrain = 64;
constexpr std::size_t kSplatGrain = 4096;

struct VertexFrame {
  Eigen::Matrix<double, 3, 4> matrix;
  Quatd rotation;
};

// Counts inversions of `seq` while merge-sorting it.
std::uint64_t count_inversions(std::vector<std::uint32_t>& seq)
{
  std::vector<std::uint32_t> buffer(seq.size());
  std::uint64_t inversions = 0;
  for (std::size_t width = 1; width < seq.size(); width *= 2) {
    for (std::size_t lo = 0; lo < seq.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, seq.size());
      const std::size_t hi = std::min(lo + 2 * width, seq.size());
      std::size_t i = lo;
      std::size_t j = mid;
      std::size_t k = lo;
      while (i < mid && j < hi) {
        if (seq[j] < seq[i]) {
          inversions += mid - i;
          buffer[k++] = seq[j++];
        } else {
          buffer[k++] = seq[i++];
        }
      }
      while (i < mid) buffer[k++] = seq[i++];
      while (j < hi) buffer[k++] = seq[j++];
    }
    seq.swap(buffer);
  }
  return inversions;
}

std::vector<std::uint32_t> inverse_permutation(const DrawOrder& order, const char* name)
{
  std::vector<std::uint32_t> rank(order.size(), std::numeric_limits<std::uint32_t>::max());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::uint32_t i = order[k];
    if (i >= order.size() || rank[i] != std::numeric_limits<std::uint32_t>::max()) {
      throw InvalidArgument(std::string(name) + " is not a permutation");
    }
    rank[i] = static_cast<std::uint32_t>(k);
  }
  return rank;
}

}  // namespace

Quatd extract_rotation(const Mat3d& linear)
{
  const double det = linear.determinant();
  if (!(std::abs(det) > kMinDeterminant)) {
    throw OrientationError("matrix is singular (|det| = " + std::to_string(std::abs(det)) + ")");
  }
  Mat3d m = linear;
  for (int it = 0; it < kPolarIterations; ++it) {
    const Mat3d next = 0.5 * (m + m.inverse().transpose());
    const double step = (next - m).norm();
    m = next;
    if (step < kPolarTolerance) {
      break;
    }
  }
  if (m.determinant() < 0.0) {
    throw OrientationError("matrix contains a reflection");
  }
  return canonicalize(Quatd(m).normalized());
}

void CameraState::validate() const
{
  const double norm = forward.cast<double>().norm();
  if (!(std::abs(norm - 1.0) <= 1e-6)) {
    throw InvalidArgument("camera forward must be a unit vector");
  }
}

double CameraState::depth(const Vec3f& p) const
{
  return (p.cast<double>() - position.cast<double>()).dot(forward.cast<double>());
}

CameraState orbit_camera(const Vec3f& target, double radius, double azimuth, double elevation)
{
  const Vec3d eye = target.cast<double>() +
                    Vec3d(radius * std::sin(azimuth), elevation, radius * std::cos(azimuth));
  CameraState camera;
  camera.position = eye.cast<float>();
  // Normalize in float so the stored vector is unit to float precision.
  camera.forward = (target.cast<double>() - eye).cast<float>().normalized();
  return camera;
}

const char* sort_mode_name(SortMode mode) { return mode == SortMode::kGroup ? "group" : "full"; }

SortMode parse_sort_mode(const std::string& name)
{
  if (name == "group") {
    return SortMode::kGroup;
  }
  if (name == "full") {
    return SortMode::kFull;
  }
  throw InvalidArgument("unknown sort mode '" + name + "' (expected group or full)");
}

AvatarRuntime::AvatarRuntime(const AvatarBundle& bundle, const SkinnedRig& rig, ThreadPool* pool)
    : bundle_(&bundle), rig_(&rig), pool_(pool), placement_(bundle.fit.similarity())
{
  if (rig_hash(rig) != bundle.rig_hash) {
    throw CompatibilityError("rig does not match the bundle (hash " + to_hex(rig_hash(rig)) + ", bundle expects " +
                             to_hex(bundle.rig_hash) + ")");
  }
  if (bundle.vertex_count != rig.vertex_count()) {
    throw CompatibilityError("bundle vertex count differs from the rig");
  }
  slot_of_vertex_.assign(rig.vertex_count(), std::numeric_limits<std::uint32_t>::max());
  for (const auto& b : bundle.bindings) {
    slot_of_vertex_[b.vertex] = 0;
  }
  for (std::uint32_t v = 0; v < rig.vertex_count(); ++v) {
    if (slot_of_vertex_[v] == 0) {
      slot_of_vertex_[v] = static_cast<std::uint32_t>(used_vertices_.size());
      used_vertices_.push_back(v);
    }
  }
}

void AvatarRuntime::update(const Pose& pose, SplatFrame& out) const
{
  if (pose.rotations.size() != rig_->joint_count()) {
    throw InvalidArgument("pose has " + std::to_string(pose.rotations.size()) + " rotations, rig has " +
                          std::to_string(rig_->joint_count()) + " joints");
  }
  const auto skin = compute_skin_matrices(*rig_, place_pose(*rig_, pose, placement_));

  std::vector<VertexFrame> frames(used_vertices_.size());
  parallel_for(pool_, used_vertices_.size(), kVertexGrain, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const Mat4d m = blend_vertex_matrix(*rig_, skin, used_vertices_[k]);
      frames[k].matrix = m.topRows<3>();
      frames[k].rotation = extract_rotation(m.block<3, 3>(0, 0));
    }
  });

  const auto& bindings = bundle_->bindings;
  const std::size_t n = bindings.size();
  out.positions.resize(n);
  out.rotations.resize(n);
  parallel_for(pool_, n, kSplatGrain, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const SplatBinding& b = bindings[i];
      const VertexFrame& f = frames[slot_of_vertex_[b.vertex]];
      const Vec3d p = f.matrix.leftCols<3>() * b.rel_position.cast<double>() + f.matrix.col(3);
      out.positions[i] = p.cast<float>();
      out.rotations[i] = canonicalize(f.rotation * b.rel_rotation.cast<double>()).cast<float>();
    }
  });
}

SplatFrame AvatarRuntime::update(const Pose& pose) const
{
  SplatFrame out;
  update(pose, out);
  return out;
}

FramePacket AvatarRuntime::frame(const AnimationClip& clip, double t, const CameraState& camera, SortMode mode)
{
  camera.validate();
  SplatFrame splats;
  update(sample_animation(clip, *rig_, t), splats);
  FramePacket packet;
  packet.order = mode == SortMode::kGroup ? group_sort(splats.positions, bundle_->groups, camera)
                                          : full_sort(splats.positions, camera);
  packet.positions = std::move(splats.positions);
  packet.rotations = std::move(splats.rotations);
  packet.frame_id = next_frame_id_++;
  return packet;
}

std::vector<Vec3f> splat_scales(const AvatarBundle& bundle, const Pose& pose)
{
  const double factor = static_cast<double>(bundle.fit.scale) * pose.root_uniform_scale;
  std::vector<Vec3f> out(bundle.splat_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (bundle.bindings[i].splat_scale.cast<double>() * factor).cast<float>();
  }
  return out;
}

SplatFrame update_splats(const AvatarBundle& bundle, const SkinnedRig& rig, const Pose& pose, ThreadPool* pool)
{
  return AvatarRuntime(bundle, rig, pool).update(pose);
}

std::vector<double> splat_depths(std::span<const Vec3f> positions, const CameraState& camera)
{
  std::vector<double> depths(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    depths[i] = camera.depth(positions[i]);
  }
  return depths;
}

DrawOrder full_sort(std::span<const Vec3f> positions, const CameraState& camera)
{
  struct Key {
    double depth;
    std::uint32_t index;
  };
  std::vector<Key> keys(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    keys[i] = Key{camera.depth(positions[i]), static_cast<std::uint32_t>(i)};
  }
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    return a.depth > b.depth || (a.depth == b.depth && a.index < b.index);
  });
  DrawOrder order(keys.size());
  for (std::size_t k = 0; k < keys.size(); ++k) {
    order[k] = keys[k].index;
  }
  return order;
}

DrawOrder group_sort(std::span<const Vec3f> positions, const GroupTable& groups, const CameraState& camera)
{
  const std::size_t g_count = groups.groups.size();
  std::vector<double> key(g_count);
  for (std::size_t g = 0; g < g_count; ++g) {
    const auto& range = groups.groups[g];
    if (range.end > positions.size() || range.end <= range.start) {
      throw InvalidArgument("group table does not match the splat positions");
    }
    Vec3d sum = Vec3d::Zero();
    for (std::uint32_t i = range.start; i < range.end; ++i) {
      sum += positions[i].cast<double>();
    }
    const Vec3d centroid = sum / static_cast<double>(range.end - range.start);
    key[g] = (centroid - camera.position.cast<double>()).dot(camera.forward.cast<double>());
  }
  std::vector<std::uint32_t> group_order(g_count);
  std::iota(group_order.begin(), group_order.end(), 0u);
  std::sort(group_order.begin(), group_order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return key[a] > key[b] || (key[a] == key[b] && a < b); });

  DrawOrder order;
  order.reserve(positions.size());
  for (const std::uint32_t g : group_order) {
    for (std::uint32_t i = groups.groups[g].start; i < groups.groups[g].end; ++i) {
      order.push_back(i);
    }
  }
  if (order.size() != positions.size()) {
    throw InvalidArgument("group ranges do not cover every splat");
  }
  return order;
}

OrderDivergence order_divergence(const DrawOrder& a, const DrawOrder& b, std::span<const double> depths)
{
  if (a.size() != b.size() || a.size() != depths.size()) {
    throw InvalidArgument("order_divergence needs two orders and depths of equal length");
  }
  inverse_permutation(a, "order_a");
  const auto rank_b = inverse_permutation(b, "order_b");
  const std::size_t n = a.size();

  // Position in b of each element, listed in a's order: every inversion is a
  // pair the two orders draw the other way round.
  std::vector<std::uint32_t> seq(n);
  for (std::size_t k = 0; k < n; ++k) {
    seq[k] = rank_b[a[k]];
  }
  OrderDivergence out;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (seq[k] > seq[k + 1]) {
      out.max_depth_error = std::max(out.max_depth_error, std::abs(depths[a[k]] - depths[a[k + 1]]));
    }
  }
  if (n >= 2) {
    const std::uint64_t inversions = count_inversions(seq);
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    out.inversion_fraction = static_cast<double>(inversions) / pairs;
  }
  return out;
}

FramePacket run_frame(const AvatarBundle& bundle, const SkinnedRig& rig, const AnimationClip& clip, double t,
                      const CameraState& camera, SortMode mode, ThreadPool* pool)
{
  AvatarRuntime runtime(bundle, rig, pool);
  return runtime.frame(clip, t, camera, mode);
}

}  // namespace gsavatar
