// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gsavatar/error.hpp"
#include "gsavatar/spatial_index.hpp"

using namespace gsavatar;

namespace {

SpatialIndex::Hit brute_force(const std::vector<Vec3f>& points, const Vec3f& q)
{
  SpatialIndex::Hit best{0, std::numeric_limits<double>::infinity()};
  for (std::uint32_t i = 0; i < points.size(); ++i) {
    const double dx = double(points[i].x()) - double(q.x());
    const double dy = double(points[i].y()) - double(q.y());
    const double dz = double(points[i].z()) - double(q.z());
    const double d = dx * dx + dy * dy + dz * dz;
    if (d < best.distance_squared) {
      best = {i, d};
    }
  }
  return best;
}

}  // namespace

TEST(SpatialIndex, SinglePoint)
{
  const std::vector<Vec3f> pts = {Vec3f(1, 2, 3)};
  const SpatialIndex index = build_vertex_index(pts);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-10, 10);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(index.nearest(Vec3f(u(rng), u(rng), u(rng))).index, 0u);
  }
}

TEST(SpatialIndex, GridMatchesScan)
{
  std::vector<Vec3f> pts;
  for (int x = 0; x < 10; ++x) {
    for (int y = 0; y < 10; ++y) {
      for (int z = 0; z < 10; ++z) {
        pts.emplace_back(0.1f * x, 0.1f * y, 0.1f * z);
      }
    }
  }
  const SpatialIndex index = build_vertex_index(pts);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-0.2f, 1.2f);
  for (int i = 0; i < 100; ++i) {
    const Vec3f q(u(rng), u(rng), u(rng));
    const auto want = brute_force(pts, q);
    const auto got = index.nearest(q);
    ASSERT_EQ(got.index, want.index);
    ASSERT_EQ(got.distance_squared, want.distance_squared);
  }
  // Queries exactly on grid points and exactly halfway between two of them.
  for (std::uint32_t i = 0; i < pts.size(); i += 13) {
    EXPECT_EQ(index.nearest(pts[i]).index, i);
  }
  EXPECT_EQ(index.nearest(Vec3f(0.05f, 0.0f, 0.0f)).index, brute_force(pts, Vec3f(0.05f, 0.0f, 0.0f)).index);
}

TEST(SpatialIndex, DuplicatesResolveToSmallestIndex)
{
  std::vector<Vec3f> pts(50, Vec3f(0.5f, 0.5f, 0.5f));
  pts[0] = Vec3f(5, 5, 5);
  const SpatialIndex index = build_vertex_index(pts);
  EXPECT_EQ(index.nearest(Vec3f(0.4f, 0.5f, 0.5f)).index, 1u);
  // Equidistant from two distinct points: the smaller index wins.
  const std::vector<Vec3f> pair = {Vec3f(1, 0, 0), Vec3f(-1, 0, 0)};
  EXPECT_EQ(build_vertex_index(pair).nearest(Vec3f::Zero()).index, 0u);
  const std::vector<Vec3f> swapped = {Vec3f(-1, 0, 0), Vec3f(1, 0, 0)};
  EXPECT_EQ(build_vertex_index(swapped).nearest(Vec3f::Zero()).index, 0u);
}

TEST(SpatialIndex, RandomClustersMatchScan)
{
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::uniform_int_distribution<int> coarse(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec3f> pts(500 + 200 * trial);
    for (auto& p : pts) {
      // Heavy ties: many coordinates share quantized values.
      p = Vec3f(coarse(rng) * 0.25f + 0.01f * n(rng), coarse(rng) * 0.25f, n(rng));
    }
    const SpatialIndex index(pts);
    for (int i = 0; i < 300; ++i) {
      const Vec3f q(n(rng), n(rng), n(rng));
      const auto want = brute_force(pts, q);
      const auto got = index.nearest(q);
      ASSERT_EQ(got.index, want.index) << "trial " << trial;
      ASSERT_EQ(got.distance_squared, want.distance_squared);
    }
  }
}

TEST(SpatialIndex, EmptyInputIsError)
{
  EXPECT_THROW(build_vertex_index(std::vector<Vec3f>{}), InvalidArgument);
  EXPECT_THROW(SpatialIndex().nearest(Vec3f::Zero()), InvalidArgument);
}
