// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gsavatar/types.hpp"

namespace gsavatar {

/// Exact nearest-neighbour k-d tree over 3-D points.
///
/// Distances are squared Euclidean distances evaluated in double precision on
/// the float inputs, and ties go to the smallest original index, so results
/// match a linear scan with the same metric exactly. Subtrees are pruned only
/// when their splitting plane is strictly farther than the current best.
class SpatialIndex {
 public:
  struct Hit {
    std::uint32_t index = 0;
    double distance_squared = 0.0;
  };

  SpatialIndex() = default;
  explicit SpatialIndex(std::span<const Vec3f> points);

  Hit nearest(const Vec3f& query) const;

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const std::vector<Vec3f>& points() const noexcept { return points_; }

 private:
  struct Node {
    // Leaves: [begin, end) into order_. Inner nodes: children at left/right.
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    float split = 0.0f;
    std::uint8_t axis = 0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec3f> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Squared distance with the metric the index uses.
inline double squared_distance(const Vec3f& a, const Vec3f& b)
{
  const double dx = static_cast<double>(a.x()) - static_cast<double>(b.x());
  const double dy = static_cast<double>(a.y()) - static_cast<double>(b.y());
  const double dz = static_cast<double>(a.z()) - static_cast<double>(b.z());
  return dx * dx + dy * dy + dz * dz;
}

/// Throws InvalidArgument on empty input.
SpatialIndex build_vertex_index(std::span<const Vec3f> positions);

}  // namespace gsavatar
