// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/spatial_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "gsavatar/error.hpp"

namespace gsavatar {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

SpatialIndex::SpatialIndex(std::span<const Vec3f> points) : points_(points.begin(), points.end())
{
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end)
{
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end, -1, -1, 0.0f, 0});
  if (end - begin <= kLeafSize) {
    return id;
  }

  Vec3f lo = Vec3f::Constant(std::numeric_limits<float>::infinity());
  Vec3f hi = -lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  Eigen::Index axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) {
    return id;  // all points coincide; keep as one leaf
  }

  const std::uint32_t mid = begin + (end - begin) / 2;
  auto less = [&](std::uint32_t a, std::uint32_t b) {
    const float va = points_[a][axis];
    const float vb = points_[b][axis];
    return va < vb || (va == vb && a < b);
  };
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, less);

  const float split = points_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& node = nodes_[static_cast<std::size_t>(id)];
  node.axis = static_cast<std::uint8_t>(axis);
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

SpatialIndex::Hit SpatialIndex::nearest(const Vec3f& query) const
{
  if (points_.empty()) {
    throw InvalidArgument("nearest-neighbour query on an empty index");
  }
  Hit best{std::numeric_limits<std::uint32_t>::max(), std::numeric_limits<double>::infinity()};

  // Explicit stack of (node, lower bound on squared distance).
  struct Pending {
    std::int32_t node;
    double bound;
  };
  Pending stack[128];
  int top = 0;
  stack[top++] = Pending{0, 0.0};
  while (top > 0) {
    const Pending item = stack[--top];
    if (item.bound > best.distance_squared) {
      continue;
    }
    const Node& node = nodes_[static_cast<std::size_t>(item.node)];
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t index = order_[i];
        const double d2 = squared_distance(points_[index], query);
        if (d2 < best.distance_squared || (d2 == best.distance_squared && index < best.index)) {
          best = Hit{index, d2};
        }
      }
      continue;
    }
    const double delta = static_cast<double>(query[node.axis]) - static_cast<double>(node.split);
    const double plane = delta * delta;
    // Points equal to the split value live on either side, so the near side
    // is only a guess; the far side is bounded by the plane distance.
    const std::int32_t near_child = delta < 0.0 ? node.left : node.right;
    const std::int32_t far_child = delta < 0.0 ? node.right : node.left;
    stack[top++] = Pending{far_child, plane};
    stack[top++] = Pending{near_child, 0.0};
  }
  return best;
}

SpatialIndex build_vertex_index(std::span<const Vec3f> positions)
{
  if (positions.empty()) {
    throw InvalidArgument("spatial index needs at least one point");
  }
  return SpatialIndex(positions);
}

}  // namespace gsavatar
