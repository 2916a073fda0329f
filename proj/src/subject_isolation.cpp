// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/subject_isolation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gsavatar {

namespace {

constexpr double kBandBinSize = 0.05;
constexpr double kBandMinFraction = 0.01;
constexpr std::size_t kMaxBins = 200000;
constexpr int kRecenterIterations = 3;
// A floor slab must spread this much wider than the layer above it.
constexpr double kFloorSpreadRatio = 1.5;
// Height of the comparison layer, in multiples of floor_epsilon.
constexpr double kFloorProbeLayers = 5.0;

std::string trim(const std::string& s)
{
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<double> opaque_heights(const SplatCloud& cloud, double opacity_min)
{
  std::vector<double> ys;
  ys.reserve(cloud.size());
  for (const Splat& s : cloud.splats) {
    if (s.opacity >= opacity_min) {
      ys.push_back(s.position.y());
    }
  }
  return ys;
}

// Upper edge of the tallest contiguous run of 5 cm bins (anchored at the
// ground) that each hold at least 1% of the opaque splats.
double densest_band_top(const std::vector<double>& ys, double ground)
{
  const double y_max = *std::max_element(ys.begin(), ys.end());
  const std::size_t bins =
      std::min(kMaxBins, static_cast<std::size_t>(std::floor((y_max - ground) / kBandBinSize)) + 1);
  std::vector<std::size_t> histogram(bins, 0);
  for (double y : ys) {
    if (y < ground) {
      continue;
    }
    const auto bin = static_cast<std::size_t>(std::floor((y - ground) / kBandBinSize));
    if (bin < bins) {
      ++histogram[bin];
    }
  }
  const double threshold = kBandMinFraction * static_cast<double>(ys.size());
  std::size_t best_start = 0;
  std::size_t best_len = 0;
  std::size_t run_start = 0;
  std::size_t run_len = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (static_cast<double>(histogram[b]) >= threshold) {
      if (run_len == 0) {
        run_start = b;
      }
      ++run_len;
      if (run_len > best_len) {
        best_len = run_len;
        best_start = run_start;
      }
    } else {
      run_len = 0;
    }
  }
  if (best_len == 0) {
    // No bin reaches the density floor; fall back to the full extent.
    return y_max;
  }
  return ground + static_cast<double>(best_start + best_len) * kBandBinSize;
}

Vec2d weighted_horizontal_centroid(const SplatCloud& cloud, const std::vector<char>& mask)
{
  Vec2d sum = Vec2d::Zero();
  double weight = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!mask[i]) {
      continue;
    }
    const Splat& s = cloud.splats[i];
    sum += static_cast<double>(s.opacity) * Vec2d(s.position.x(), s.position.z());
    weight += s.opacity;
  }
  return weight > 0.0 ? Vec2d(sum / weight) : Vec2d::Zero();
}

double horizontal_distance(const Splat& s, const Vec2d& axis)
{
  return (Vec2d(s.position.x(), s.position.z()) - axis).norm();
}

// Median horizontal distance from the per-axis median (x, z). Medians keep a
// minority of distant clutter from inflating the spread.
double horizontal_spread(const SplatCloud& cloud, const std::vector<char>& mask)
{
  auto median = [](std::vector<double>& v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
  };
  std::vector<double> xs, zs;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (mask[i]) {
      xs.push_back(cloud.splats[i].position.x());
      zs.push_back(cloud.splats[i].position.z());
    }
  }
  if (xs.empty()) {
    return 0.0;
  }
  const double cx = median(xs);
  const double cz = median(zs);
  std::vector<double> d(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    d[k] = std::hypot(xs[k] - cx, zs[k] - cz);
  }
  return median(d);
}

// True when the opaque splats within floor_epsilon of the ground form a slab
// wider than what stands on it. Feet alone spread like the ankles above them.
bool detect_floor(const SplatCloud& cloud, const std::vector<char>& opaque, double ground, double epsilon)
{
  const std::size_t n = cloud.size();
  std::vector<char> slab(n, 0);
  std::vector<char> layer(n, 0);
  bool any_slab = false;
  bool any_layer = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!opaque[i]) {
      continue;
    }
    const double y = cloud.splats[i].position.y();
    if (y < ground + epsilon) {
      slab[i] = 1;
      any_slab = true;
    } else if (y < ground + (1.0 + kFloorProbeLayers) * epsilon) {
      layer[i] = 1;
      any_layer = true;
    }
  }
  if (!any_slab) {
    return false;
  }
  if (!any_layer) {
    return true;
  }
  return horizontal_spread(cloud, slab) > kFloorSpreadRatio * horizontal_spread(cloud, layer);
}

}  // namespace

void FilterParams::validate() const
{
  if (cylinder_radius && !(*cylinder_radius > 0.0)) {
    throw InvalidArgument("cylinder_radius must be positive");
  }
  if (!(floor_epsilon > 0.0) || !(head_margin > 0.0)) {
    throw InvalidArgument("floor_epsilon and head_margin must be positive");
  }
  if (!(opacity_min > 0.0) || !(opacity_min < 1.0)) {
    throw InvalidArgument("opacity_min must be in (0, 1)");
  }
}

FilterParams FilterParams::from_config(const std::string& text)
{
  FilterParams params;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("filter config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    double number = 0.0;
    try {
      std::size_t used = 0;
      number = std::stod(value, &used);
      if (used != value.size()) {
        throw std::invalid_argument(value);
      }
    } catch (const std::exception&) {
      throw InvalidArgument("filter config line " + std::to_string(line_no) + ": bad number '" + value + "'");
    }
    if (key == "cylinder_radius") {
      params.cylinder_radius = number;
    } else if (key == "floor_epsilon") {
      params.floor_epsilon = number;
    } else if (key == "opacity_min") {
      params.opacity_min = number;
    } else if (key == "head_margin") {
      params.head_margin = number;
    } else {
      throw InvalidArgument("filter config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  params.validate();
  return params;
}

std::string FilterParams::to_config() const
{
  std::ostringstream out;
  out.precision(17);
  if (cylinder_radius) {
    out << "cylinder_radius = " << *cylinder_radius << "\n";
  }
  out << "floor_epsilon = " << floor_epsilon << "\n";
  out << "opacity_min = " << opacity_min << "\n";
  out << "head_margin = " << head_margin << "\n";
  return out.str();
}

double order_statistic(std::vector<double> values, std::size_t rank)
{
  if (values.empty()) {
    throw InvalidArgument("order statistic of an empty set");
  }
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

double estimate_ground_height(const SplatCloud& cloud, double opacity_min)
{
  if (cloud.size() < 10) {
    throw InvalidArgument("ground estimation needs at least 10 splats");
  }
  std::vector<double> ys = opaque_heights(cloud, opacity_min);
  if (ys.size() < 10) {
    throw EstimationError("ground estimation needs at least 10 splats with opacity >= " +
                          std::to_string(opacity_min) + ", found " + std::to_string(ys.size()));
  }
  const std::size_t n = ys.size();
  const std::size_t rank = std::max<std::size_t>((n + 99) / 100, 2);
  return order_statistic(std::move(ys), rank);
}

std::pair<SplatCloud, FilterReport> filter_subject(const SplatCloud& cloud, const FilterParams& params)
{
  params.validate();
  if (cloud.size() < 10) {
    throw InvalidArgument("subject filtering needs at least 10 splats");
  }

  FilterReport report;
  report.input_count = cloud.size();
  report.removed_by_rule = {{kRuleOpacity, 0}, {kRuleVertical, 0}, {kRuleHorizontal, 0}};

  const std::size_t n = cloud.size();
  // 0 = kept so far, otherwise the first rejecting rule.
  enum Verdict : char { kKept = 0, kOpacity, kVertical, kHorizontal };
  std::vector<char> verdict(n, kKept);
  for (std::size_t i = 0; i < n; ++i) {
    if (cloud.splats[i].opacity < params.opacity_min) {
      verdict[i] = kOpacity;
    }
  }
  const auto opaque = static_cast<std::size_t>(std::count(verdict.begin(), verdict.end(), kKept));
  if (opaque == 0) {
    report.removed_by_rule[kRuleOpacity] = n;
    throw IsolationError("no splats survive filtering (all below opacity_min)", report);
  }

  const double ground = estimate_ground_height(cloud, params.opacity_min);
  const double band_top = densest_band_top(opaque_heights(cloud, params.opacity_min), ground);
  const double ceiling = band_top + params.head_margin;
  std::vector<char> opaque_mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    opaque_mask[i] = verdict[i] == kKept;
  }
  report.floor_detected = detect_floor(cloud, opaque_mask, ground, params.floor_epsilon);
  report.ground_height = ground;
  report.ceiling_height = ceiling;
  // Without a floor, everything down to the ground estimate is subject (feet).
  const double lowest =
      report.floor_detected ? ground + params.floor_epsilon : -std::numeric_limits<double>::infinity();

  for (std::size_t i = 0; i < n; ++i) {
    if (verdict[i] != kKept) {
      continue;
    }
    const double y = cloud.splats[i].position.y();
    if (y < lowest || y > ceiling) {
      verdict[i] = kVertical;
    }
  }

  const double radius = params.cylinder_radius.value_or(0.6 * (band_top - ground));
  report.cylinder_radius = radius;

  std::vector<char> candidates(n);
  for (std::size_t i = 0; i < n; ++i) {
    candidates[i] = verdict[i] == kKept;
  }
  Vec2d axis = weighted_horizontal_centroid(cloud, candidates);
  // Re-center on the members of the current cylinder so residual background
  // on one side does not drag the axis off the subject.
  for (int iter = 0; iter < kRecenterIterations; ++iter) {
    std::vector<char> inside(n, 0);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (candidates[i] && horizontal_distance(cloud.splats[i], axis) <= radius) {
        inside[i] = 1;
        any = true;
      }
    }
    if (!any) {
      break;
    }
    axis = weighted_horizontal_centroid(cloud, inside);
  }
  report.subject_axis = axis;

  SplatCloud kept;
  kept.sh_degree = cloud.sh_degree;
  kept.source_field_names = cloud.source_field_names;
  kept.extra_field_names = cloud.extra_field_names;
  for (std::size_t i = 0; i < n; ++i) {
    if (verdict[i] == kKept && horizontal_distance(cloud.splats[i], axis) > radius) {
      verdict[i] = kHorizontal;
    }
    switch (verdict[i]) {
      case kKept: kept.splats.push_back(cloud.splats[i]); break;
      case kOpacity: ++report.removed_by_rule[kRuleOpacity]; break;
      case kVertical: ++report.removed_by_rule[kRuleVertical]; break;
      default: ++report.removed_by_rule[kRuleHorizontal]; break;
    }
  }
  report.kept_count = kept.size();
  if (kept.empty()) {
    throw IsolationError("no splats survive filtering", report);
  }
  return {std::move(kept), std::move(report)};
}

SplatCloud apply_normalization(const SplatCloud& cloud, const NormalizationTransform& transform)
{
  SplatCloud out = cloud;
  const auto s = transform.uniform_scale;
  for (Splat& splat : out.splats) {
    splat.position = transform.apply(splat.position.cast<double>()).cast<float>();
    splat.scale = (s * splat.scale.cast<double>()).cast<float>();
  }
  return out;
}

std::pair<SplatCloud, NormalizationTransform> normalize_cloud(const SplatCloud& cloud, double target_height,
                                                               double opacity_min)
{
  if (!(target_height > 0.0)) {
    throw InvalidArgument("target_height must be positive");
  }
  const double ground = estimate_ground_height(cloud, opacity_min);
  std::vector<double> ys = opaque_heights(cloud, opacity_min);
  const std::size_t n = ys.size();
  const std::size_t rank = (99 * n + 99) / 100;
  const double top = order_statistic(std::move(ys), rank);
  const double height = top - ground;
  if (!(height > 0.01)) {
    throw NormalizationError("degenerate subject height " + std::to_string(height) + " m (must exceed 1 cm)");
  }

  std::vector<char> all(cloud.size(), 1);
  const Vec2d center = weighted_horizontal_centroid(cloud, all);

  NormalizationTransform transform;
  transform.uniform_scale = target_height / height;
  transform.translation = -transform.uniform_scale * Vec3d(center.x(), ground, center.y());
  return {apply_normalization(cloud, transform), transform};
}

}  // namespace gsavatar
