// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "gsavatar/error.hpp"
#include "gsavatar/splat_io.hpp"

namespace gsavatar {

/// Rule-based subject filter settings. Unset cylinder_radius means
/// 0.6 x (top of densest band - ground).
struct FilterParams {
  std::optional<double> cylinder_radius;
  double floor_epsilon = 0.02;
  double opacity_min = 0.05;
  double head_margin = 0.15;

  void validate() const;

  /// Flat `key = value` text, one entry per line; '#' starts a comment.
  static FilterParams from_config(const std::string& text);
  std::string to_config() const;
};

inline constexpr const char* kRuleOpacity = "opacity";
inline constexpr const char* kRuleVertical = "vertical";
inline constexpr const char* kRuleHorizontal = "horizontal";

struct FilterReport {
  std::size_t input_count = 0;
  std::size_t kept_count = 0;
  std::map<std::string, std::size_t> removed_by_rule;
  double ground_height = 0.0;
  bool floor_detected = false;  ///< floor slab found and cut at ground + floor_epsilon
  double ceiling_height = 0.0;
  double cylinder_radius = 0.0;
  Vec2d subject_axis = Vec2d::Zero();  ///< horizontal (x, z) center
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class IsolationError : public Error {
 public:
  IsolationError(const std::string& what, FilterReport report) : Error(what), report_(std::move(report)) {}
  const FilterReport& report() const noexcept { return report_; }

 private:
  FilterReport report_;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

/// p' = uniform_scale * p + translation. Splat scales are multiplied by
/// uniform_scale; rotations are untouched.
struct NormalizationTransform {
  Vec3d translation = Vec3d::Zero();
  double uniform_scale = 1.0;

  Vec3d apply(const Vec3d& p) const { return uniform_scale * p + translation; }
  Vec3d invert(const Vec3d& q) const { return (q - translation) / uniform_scale; }
};

/// Nearest-rank order statistic of `values` (sorted copy), 1-based rank
/// clamped into [1, n].
double order_statistic(std::vector<double> values, std::size_t rank);

/// Second-or-later order statistic at the 1st percentile of y over splats with
/// opacity >= opacity_min: rank = max(ceil(0.01 N), 2).
double estimate_ground_height(const SplatCloud& cloud, double opacity_min = 0.05);

/// Rules, in order, with the first rejecting rule recorded per splat:
/// opacity below opacity_min; height outside [ground + floor_epsilon, densest
/// band top + head_margin], where the lower cut applies only when a floor slab
/// is detected; horizontal distance from the subject axis above the cylinder
/// radius.
std::pair<SplatCloud, FilterReport> filter_subject(const SplatCloud& cloud, const FilterParams& params);

std::pair<SplatCloud, NormalizationTransform> normalize_cloud(const SplatCloud& cloud, double target_height = 1.0,
                                                               double opacity_min = 0.05);

/// Applies a transform to every splat (positions and scales).
SplatCloud apply_normalization(const SplatCloud& cloud, const NormalizationTransform& transform);

}  // namespace gsavatar
