// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gsavatar/types.hpp"

namespace gsavatar {

/// One Gaussian splat in the decoded (linear) domain.
struct Splat {
  Vec3f position = Vec3f::Zero();
  Quatf rotation = Quatf::Identity();  ///< unit, w >= 0
  Vec3f scale = Vec3f::Ones();         ///< standard deviations, meters
  float opacity = 1.0f;                ///< [0, 1]
  Vec3f color = Vec3f::Constant(0.5f); ///< linear RGB, [0, 1]
  std::vector<float> sh_rest;          ///< higher-order SH, channel-major as in the file
  std::vector<float> extras;           ///< unrecognized float32 properties, in file order
};

struct SplatCloud {
  std::vector<Splat> splats;
  int sh_degree = 0;
  /// Property names in the order they were read (empty for in-memory clouds).
  std::vector<std::string> source_field_names;
  /// Names of the float32 properties carried in Splat::extras.
  std::vector<std::string> extra_field_names;

  std::size_t size() const noexcept { return splats.size(); }
  bool empty() const noexcept { return splats.empty(); }
};

/// Number of f_rest_* coefficients for a given SH degree (all three channels).
constexpr std::size_t sh_rest_count(int degree)
{
  return static_cast<std::size_t>(((degree + 1) * (degree + 1) - 1) * 3);
}

/// SH band-0 normalization constant, 1 / (2 sqrt(pi)).
inline constexpr double kShC0 = 0.28209479177387814;

struct DecodedAppearance {
  float opacity;
  Vec3f scale;
  Vec3f color;
};

struct RawAppearance {
  float opacity;
  Vec3f scale;
  Vec3f dc;
};

/// logistic / exp / 0.5 + C0 * dc with clamping. Throws DecodeError tagged with
/// `splat_index` on non-finite input.
DecodedAppearance decode_appearance(float raw_opacity, const Vec3f& raw_scale, const Vec3f& raw_dc,
                                    std::size_t splat_index = 0);

/// Inverse of decode_appearance. The raw value is chosen so that decoding it
/// reproduces the given decoded value bit-for-bit whenever such a raw value
/// exists near the analytic inverse.
RawAppearance encode_appearance(float opacity, const Vec3f& scale, const Vec3f& color);

/// Normalizes a raw (w, x, y, z) file quaternion into canonical storage form.
Quatf decode_rotation(float w, float x, float y, float z, std::size_t splat_index = 0);

SplatCloud parse_splat_ply(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_splat_ply(const SplatCloud& cloud);

SplatCloud read_splat_ply_file(const std::string& path);
/// Writes via a temporary file and rename, so readers never see partial output.
void write_splat_ply_file(const std::string& path, const SplatCloud& cloud);

struct CloudStats {
  std::size_t count = 0;
  Vec3d aabb_min = Vec3d::Zero();
  Vec3d aabb_max = Vec3d::Zero();
  Vec3d centroid = Vec3d::Zero();
  Vec3d opacity_weighted_centroid = Vec3d::Zero();
};

CloudStats cloud_stats(const SplatCloud& cloud);

}  // namespace gsavatar
