// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "gsavatar/error.hpp"
#include "gsavatar/splat_io.hpp"
#include "gsavatar/synthetic.hpp"
#include "test_support.hpp"

using namespace gsavatar;
using test::canonical_names;
using test::make_ply;
using test::same_bits;

namespace {

void expect_bit_equal(const SplatCloud& a, const SplatCloud& b)
{
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.sh_degree, b.sh_degree);
  ASSERT_EQ(a.extra_field_names, b.extra_field_names);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Splat& x = a.splats[i];
    const Splat& y = b.splats[i];
    for (int k = 0; k < 3; ++k) {
      ASSERT_TRUE(same_bits(x.position[k], y.position[k])) << "splat " << i;
      ASSERT_TRUE(same_bits(x.scale[k], y.scale[k])) << "splat " << i;
      ASSERT_TRUE(same_bits(x.color[k], y.color[k])) << "splat " << i;
    }
    for (int k = 0; k < 4; ++k) {
      ASSERT_TRUE(same_bits(x.rotation.coeffs()[k], y.rotation.coeffs()[k])) << "splat " << i;
    }
    ASSERT_TRUE(same_bits(x.opacity, y.opacity)) << "splat " << i;
    ASSERT_EQ(x.sh_rest.size(), y.sh_rest.size());
    for (std::size_t k = 0; k < x.sh_rest.size(); ++k) {
      ASSERT_TRUE(same_bits(x.sh_rest[k], y.sh_rest[k]));
    }
    ASSERT_EQ(x.extras.size(), y.extras.size());
    for (std::size_t k = 0; k < x.extras.size(); ++k) {
      ASSERT_TRUE(same_bits(x.extras[k], y.extras[k]));
    }
  }
}

}  // namespace

TEST(SplatPly, DecodesZeroRawVertex)
{
  // Raw file rotation is (w, x, y, z) = (1, 0, 0, 0).
  const auto bytes = make_ply(canonical_names(), {{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0}});
  const SplatCloud cloud = parse_splat_ply(bytes);
  ASSERT_EQ(cloud.size(), 1u);
  const Splat& s = cloud.splats[0];
  EXPECT_EQ(s.position, Vec3f::Zero());
  EXPECT_EQ(s.rotation.coeffs(), Quatf::Identity().coeffs());
  EXPECT_EQ(s.scale, Vec3f::Ones());
  EXPECT_EQ(s.opacity, 0.5f);
  EXPECT_EQ(s.color, Vec3f::Constant(0.5f));
  EXPECT_EQ(cloud.sh_degree, 0);
}

TEST(SplatPly, ReordersFileQuaternionToXyzw)
{
  // File (w, x, y, z) = (0, 0, 1, 0): 180 degrees about +Y.
  const auto bytes = make_ply(canonical_names(), {{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0}});
  const Quatf q = parse_splat_ply(bytes).splats[0].rotation;
  EXPECT_EQ(q.y(), 1.0f);
  EXPECT_EQ(q.w(), 0.0f);
}

TEST(SplatPly, NormalizesAndCanonicalizesRotation)
{
  const auto bytes = make_ply(canonical_names(), {{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, -2, 0, 0, 0}});
  const Quatf q = parse_splat_ply(bytes).splats[0].rotation;
  EXPECT_FLOAT_EQ(q.w(), 1.0f);
  EXPECT_FLOAT_EQ(q.vec().norm(), 0.0f);
}

TEST(SplatPly, ZeroRotationIsDecodeError)
{
  const auto bytes = make_ply(canonical_names(), {{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0},
                                                  {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}});
  try {
    parse_splat_ply(bytes);
    FAIL() << "expected DecodeError";
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.splat_index(), 1u);
  }
}

TEST(SplatPly, MissingPropertyNamesIt)
{
  auto names = canonical_names();
  names.erase(std::find(names.begin(), names.end(), "scale_2"));
  const auto bytes = make_ply(names, {std::vector<float>(names.size(), 0.0f)});
  try {
    parse_splat_ply(bytes);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.property(), "scale_2");
    EXPECT_NE(std::string(e.what()).find("scale_2"), std::string::npos);
  }
}

TEST(SplatPly, TruncatedBodyReportsByteCounts)
{
  auto bytes = make_ply(canonical_names(), {std::vector<float>(14, 0.0f), std::vector<float>(14, 0.0f)});
  bytes.resize(bytes.size() - 5);
  try {
    parse_splat_ply(bytes);
    FAIL() << "expected LengthError";
  } catch (const LengthError& e) {
    EXPECT_EQ(e.expected(), e.actual() + 5);
  }
}

TEST(SplatPly, MalformedHeaderNamesLine)
{
  const std::string text = "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty flot x\nend_header\n";
  const std::vector<std::uint8_t> bytes(text.begin(), text.end());
  try {
    parse_splat_ply(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(SplatPly, RejectsAsciiAndGarbage)
{
  const std::string ascii = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n0\n";
  EXPECT_THROW(parse_splat_ply(std::vector<std::uint8_t>(ascii.begin(), ascii.end())), FormatError);
  const std::string junk = "PK\x03\x04 not a ply";
  EXPECT_THROW(parse_splat_ply(std::vector<std::uint8_t>(junk.begin(), junk.end())), FormatError);
  EXPECT_THROW(parse_splat_ply(std::vector<std::uint8_t>{}), FormatError);
}

TEST(SplatPly, IgnoresNormalsAndKeepsUnknownProperties)
{
  auto names = canonical_names();
  names.insert(names.begin() + 3, {"nx", "ny", "nz"});
  names.push_back("confidence");
  std::vector<float> row = {1, 2, 3, 9, 9, 9, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0.25f};
  const SplatCloud cloud = parse_splat_ply(make_ply(names, {row}));
  ASSERT_EQ(cloud.extra_field_names, std::vector<std::string>{"confidence"});
  EXPECT_EQ(cloud.splats[0].extras, std::vector<float>{0.25f});
  EXPECT_EQ(cloud.splats[0].position, Vec3f(1, 2, 3));
  EXPECT_EQ(cloud.source_field_names, names);
}

TEST(SplatPly, PreservesRowOrder)
{
  std::vector<std::vector<float>> rows;
  for (int i = 0; i < 50; ++i) {
    rows.push_back({float(i), 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0});
  }
  const SplatCloud cloud = parse_splat_ply(make_ply(canonical_names(), rows));
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(cloud.splats[i].position.x(), float(i));
  }
}

TEST(SplatPly, WriterHeaderHasFourteenPropertiesAtDegreeZero)
{
  std::mt19937_64 rng(3);
  const auto bytes = write_splat_ply(random_splat_cloud(4, 0, 0, rng));
  const std::string text(bytes.begin(), bytes.end());
  const std::string header = text.substr(0, text.find("end_header"));
  std::size_t count = 0;
  for (std::size_t pos = header.find("property float"); pos != std::string::npos;
       pos = header.find("property float", pos + 1)) {
    ++count;
  }
  EXPECT_EQ(count, 14u);
  EXPECT_EQ(header.rfind("ply\nformat binary_little_endian 1.0\n", 0), 0u);
}

TEST(SplatPly, WriterRejectsEmptyCloud)
{
  EXPECT_THROW(write_splat_ply(SplatCloud{}), InvalidArgument);
}

TEST(SplatPly, RoundTripIsBitExact)
{
  std::mt19937_64 rng(11);
  for (int degree = 0; degree <= 3; ++degree) {
    const SplatCloud cloud = random_splat_cloud(1000, degree, degree == 2 ? 2 : 0, rng);
    const auto bytes = write_splat_ply(cloud);
    const SplatCloud back = parse_splat_ply(bytes);
    expect_bit_equal(cloud, back);
    EXPECT_EQ(write_splat_ply(back), bytes) << "degree " << degree;
  }
}

TEST(SplatPly, FileRoundTripAndMissingFile)
{
  test::TempDir dir;
  std::mt19937_64 rng(5);
  const SplatCloud cloud = random_splat_cloud(64, 1, 0, rng);
  write_splat_ply_file(dir.file("a.ply"), cloud);
  expect_bit_equal(cloud, read_splat_ply_file(dir.file("a.ply")));
  EXPECT_EQ(dir.listing(), std::vector<std::string>{"a.ply"});
  EXPECT_THROW(read_splat_ply_file(dir.file("missing.ply")), FileError);
}

TEST(Appearance, DecodeRules)
{
  const auto d = decode_appearance(0.0f, Vec3f::Zero(), Vec3f::Zero());
  EXPECT_EQ(d.opacity, 0.5f);
  EXPECT_EQ(d.scale, Vec3f::Ones());
  EXPECT_EQ(d.color, Vec3f::Constant(0.5f));

  const auto e = decode_appearance(2.0f, Vec3f(-1.0f, 0.5f, 2.0f), Vec3f(-10.0f, 10.0f, 0.3f));
  EXPECT_NEAR(e.opacity, 1.0 / (1.0 + std::exp(-2.0)), 1e-7);
  EXPECT_NEAR(e.scale.x(), std::exp(-1.0), 1e-7);
  EXPECT_NEAR(e.scale.z(), std::exp(2.0), 1e-6);
  EXPECT_EQ(e.color.x(), 0.0f);
  EXPECT_EQ(e.color.y(), 1.0f);
}

TEST(Appearance, ShConstantOracle)
{
  // Band-0 normalization constant computed independently.
  const double c0 = 1.0 / (2.0 * std::sqrt(std::acos(-1.0)));
  EXPECT_NEAR(kShC0, c0, 1e-16);
  const float dc = static_cast<float>(0.5 / c0);  // 1.7724...
  EXPECT_NEAR(dc, 1.7724538509, 1e-6);
  const auto d = decode_appearance(0.0f, Vec3f::Zero(), Vec3f(dc, 0.0f, -dc));
  EXPECT_NEAR(d.color.x(), 1.0f, 1e-6);
  EXPECT_NEAR(d.color.z(), 0.0f, 1e-6);
}

TEST(Appearance, NonFiniteIsDecodeError)
{
  try {
    decode_appearance(std::nanf(""), Vec3f::Zero(), Vec3f::Zero(), 7);
    FAIL();
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.splat_index(), 7u);
  }
  EXPECT_THROW(decode_appearance(0.0f, Vec3f(INFINITY, 0, 0), Vec3f::Zero()), DecodeError);
}

TEST(Appearance, EncodeDecodeIdentity)
{
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<float> unit(0.001f, 0.999f);
  std::uniform_real_distribution<float> log_scale(-8.0f, 1.0f);
  for (int i = 0; i < 2000; ++i) {
    const float opacity = unit(rng);
    const Vec3f scale(std::exp(log_scale(rng)), std::exp(log_scale(rng)), std::exp(log_scale(rng)));
    const Vec3f color(unit(rng), unit(rng), unit(rng));
    const auto raw = encode_appearance(opacity, scale, color);
    const auto back = decode_appearance(raw.opacity, raw.scale, raw.dc);
    ASSERT_NEAR(back.opacity, opacity, 1e-6);
    for (int k = 0; k < 3; ++k) {
      ASSERT_NEAR(back.scale[k], scale[k], 1e-6 * std::max(1.0f, scale[k]));
      ASSERT_NEAR(back.color[k], color[k], 1e-6);
    }
  }
}

TEST(CloudStats, SingleSplat)
{
  SplatCloud cloud;
  cloud.splats.resize(1);
  cloud.splats[0].position = Vec3f(1, 2, 3);
  const CloudStats s = cloud_stats(cloud);
  EXPECT_EQ(s.count, 1u);
  EXPECT_EQ(s.centroid, Vec3d(1, 2, 3));
  EXPECT_EQ(s.aabb_min, Vec3d(1, 2, 3));
  EXPECT_EQ(s.aabb_max, Vec3d(1, 2, 3));
}

TEST(CloudStats, SymmetricPair)
{
  SplatCloud cloud;
  cloud.splats.resize(2);
  cloud.splats[0].opacity = cloud.splats[1].opacity = 0.5f;
  cloud.splats[1].position = Vec3f(2, 0, 0);
  const CloudStats s = cloud_stats(cloud);
  EXPECT_EQ(s.centroid, Vec3d(1, 0, 0));
  EXPECT_EQ(s.opacity_weighted_centroid, Vec3d(1, 0, 0));
}

TEST(CloudStats, MatchesDirectFold)
{
  std::mt19937_64 rng(23);
  const SplatCloud cloud = random_splat_cloud(1000, 0, 0, rng);
  Vec3d lo = Vec3d::Constant(1e300), hi = Vec3d::Constant(-1e300), sum = Vec3d::Zero(), wsum = Vec3d::Zero();
  double w = 0.0;
  for (const auto& s : cloud.splats) {
    const Vec3d p = s.position.cast<double>();
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
    sum += p;
    wsum += s.opacity * p;
    w += s.opacity;
  }
  const CloudStats stats = cloud_stats(cloud);
  EXPECT_EQ(stats.count, 1000u);
  EXPECT_EQ(stats.aabb_min, lo);
  EXPECT_EQ(stats.aabb_max, hi);
  EXPECT_LT((stats.centroid - sum / 1000.0).norm(), 1e-9);
  EXPECT_LT((stats.opacity_weighted_centroid - wsum / w).norm(), 1e-9);
}

TEST(CloudStats, EmptyCloudIsError)
{
  EXPECT_THROW(cloud_stats(SplatCloud{}), InvalidArgument);
}
