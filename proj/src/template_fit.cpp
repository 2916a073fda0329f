// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/template_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "gsavatar/subject_isolation.hpp"

namespace gsavatar {

namespace {

constexpr std::size_t kChamferGrain = 256;
constexpr int kYawGridSteps = 24;  // intervals; samples include both ends and the center
constexpr double kYawGridHalfRange = 45.0;  // degrees
constexpr double kScaleRange = 0.05;
constexpr double kFineScaleRange = 0.02;
constexpr int kLimbPasses = 3;
constexpr int kGoldenIterations = 20;
constexpr int kCenterIterations = 10;
constexpr double kAnisotropyMin = 1.2;
constexpr double kLowBandFraction = 0.15;

constexpr double kShoulderRange[2] = {20.0, 80.0};
constexpr double kHipRange[2] = {0.0, 20.0};

std::vector<Vec3f> positions_of(const SplatCloud& cloud)
{
  std::vector<Vec3f> out;
  out.reserve(cloud.size());
  for (const auto& s : cloud.splats) {
    out.push_back(s.position);
  }
  return out;
}

// Spread of y between the 1st and 99th nearest-rank percentiles.
double robust_height(std::vector<double> ys)
{
  const std::size_t n = ys.size();
  const double lo = order_statistic(ys, (n + 99) / 100);
  const double hi = order_statistic(std::move(ys), (99 * n + 99) / 100);
  return hi - lo;
}

// World placement parametrised around the rig centroid so that yaw and scale
// changes do not move the body: p -> center + s * Ry(yaw) * (v - rig_centroid).
struct Placement {
  double yaw;
  double scale;
  Vec3d center;
};

class SimilarityObjective {
 public:
  SimilarityObjective(const SpatialIndex& index, std::vector<Vec3d> local, ThreadPool* pool)
      : index_(index), local_(std::move(local)), pool_(pool)
  {
    centroid_ = Vec3d::Zero();
    for (const auto& v : local_) {
      centroid_ += v;
    }
    centroid_ /= static_cast<double>(local_.size());
    buffer_.resize(local_.size());
  }

  const Vec3d& rig_centroid() const { return centroid_; }

  std::vector<Vec3f>& transform(const Placement& p)
  {
    const Mat3d r = yaw_rotation(p.yaw).toRotationMatrix() * p.scale;
    for (std::size_t i = 0; i < local_.size(); ++i) {
      buffer_[i] = (p.center + r * (local_[i] - centroid_)).cast<float>();
    }
    return buffer_;
  }

  double operator()(const Placement& p) { return chamfer_distance(transform(p), index_, pool_); }

  Vec3d translation(const Placement& p) const
  {
    return p.center - p.scale * (yaw_rotation(p.yaw) * centroid_);
  }

  // Mean offset from placed vertices to their nearest cloud points.
  Vec3d mean_offset(const Placement& p)
  {
    const auto& placed = transform(p);
    Vec3d sum = Vec3d::Zero();
    for (const auto& v : placed) {
      const auto hit = index_.nearest(v);
      sum += (index_.points()[hit.index] - v).cast<double>();
    }
    return sum / static_cast<double>(placed.size());
  }

 private:
  const SpatialIndex& index_;
  std::vector<Vec3d> local_;
  ThreadPool* pool_;
  Vec3d centroid_;
  std::vector<Vec3f> buffer_;
};

// Records a step only when it does not raise the objective.
struct Tracker {
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> trace;

  bool offer(double value)
  {
    if (value <= best) {
      best = value;
      trace.push_back(value);
      return true;
    }
    return false;
  }
};

std::vector<std::size_t> descendants_of(const SkinnedRig& rig, std::size_t root)
{
  std::vector<char> in(rig.joint_count(), 0);
  in[root] = 1;
  for (std::size_t j = root + 1; j < rig.joint_count(); ++j) {
    const int parent = rig.joints()[j].parent;
    if (parent >= 0 && in[static_cast<std::size_t>(parent)]) {
      in[j] = 1;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < in.size(); ++j) {
    if (in[j]) {
      out.push_back(j);
    }
  }
  return out;
}

std::vector<Vec3f> place_vertices(const SkinnedRig& rig, const Pose& limb_pose, const Similarity& similarity,
                                  std::span<const std::size_t> subset)
{
  const auto skin = compute_skin_matrices(rig, place_pose(rig, limb_pose, similarity));
  std::vector<Vec3f> out;
  out.reserve(subset.size());
  for (std::size_t v : subset) {
    const Mat4d m = blend_vertex_matrix(rig, skin, v);
    out.push_back((m.block<3, 3>(0, 0) * rig.vertices()[v].cast<double>() + m.block<3, 1>(0, 3)).cast<float>());
  }
  return out;
}

// Golden-section on yaw then scale, then nearest-point re-centering. Each
// step is kept only if the objective does not rise.
void refine_placement(SimilarityObjective& objective, Placement& current, Tracker& tracker, double yaw_half_width,
                      double scale_range)
{
  Placement probe = current;
  const auto [yaw, yaw_value] = golden_section(
      [&](double y) {
        probe.yaw = y;
        return objective(probe);
      },
      current.yaw - yaw_half_width, current.yaw + yaw_half_width, kGoldenIterations);
  if (tracker.offer(yaw_value)) {
    current.yaw = yaw;
  }
  probe = current;
  const auto [scale, scale_value] = golden_section(
      [&](double s) {
        probe.scale = s;
        return objective(probe);
      },
      current.scale * (1.0 - scale_range), current.scale * (1.0 + scale_range), kGoldenIterations);
  if (tracker.offer(scale_value)) {
    current.scale = scale;
  }
  for (int i = 0; i < kCenterIterations; ++i) {
    Placement candidate = current;
    candidate.center += objective.mean_offset(current);
    if (!tracker.offer(objective(candidate))) {
      break;
    }
    current = candidate;
  }
}

std::vector<Vec3d> local_vertices(const SkinnedRig& rig, const Pose& pose)
{
  std::vector<Vec3d> out;
  out.reserve(rig.vertex_count());
  for (const auto& v : skin_vertices(rig, pose)) {
    out.push_back(v.cast<double>());
  }
  return out;
}

Placement placement_of(const SimilarityObjective& objective, const FitResult& fit)
{
  return Placement{fit.yaw, fit.uniform_scale,
                   fit.translation + fit.uniform_scale * (yaw_rotation(fit.yaw) * objective.rig_centroid())};
}

void store_placement(const SimilarityObjective& objective, const Placement& p, FitResult& fit)
{
  fit.yaw = p.yaw;
  fit.uniform_scale = p.scale;
  fit.translation = objective.translation(p);
}

}  // namespace

std::pair<double, double> golden_section(const std::function<double(double)>& f, double lo, double hi,
                                         int iterations)
{
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  std::pair<double, double> best = fc <= fd ? std::pair{c, fc} : std::pair{d, fd};
  for (int i = 0; i < iterations; ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
      if (fc < best.second || (fc == best.second && c < best.first)) {
        best = {c, fc};
      }
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
      if (fd < best.second || (fd == best.second && d < best.first)) {
        best = {d, fd};
      }
    }
  }
  return best;
}

double chamfer_distance(std::span<const Vec3f> query, const SpatialIndex& target, ThreadPool* pool)
{
  if (query.empty() || target.empty()) {
    throw InvalidArgument("chamfer distance needs non-empty inputs");
  }
  std::vector<double> partial(ThreadPool::chunk_count(query.size(), kChamferGrain), 0.0);
  parallel_for(pool, query.size(), kChamferGrain, [&](std::size_t begin, std::size_t end) {
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      sum += std::sqrt(target.nearest(query[i]).distance_squared);
    }
    partial[begin / kChamferGrain] = sum;
  });
  double total = 0.0;
  for (double value : partial) {
    total += value;
  }
  return total / static_cast<double>(query.size());
}

double chamfer_distance(std::span<const Vec3f> query, const SplatCloud& target, ThreadPool* pool)
{
  if (target.empty()) {
    throw InvalidArgument("chamfer distance needs non-empty inputs");
  }
  const auto positions = positions_of(target);
  return chamfer_distance(query, SpatialIndex(positions), pool);
}

double estimate_front_axis(const SplatCloud& cloud)
{
  if (cloud.size() < 3) {
    throw InvalidArgument("front-axis estimation needs at least 3 splats");
  }
  Vec2d mean = Vec2d::Zero();
  double weight = 0.0;
  for (const auto& s : cloud.splats) {
    mean += static_cast<double>(s.opacity) * Vec2d(s.position.x(), s.position.z());
    weight += s.opacity;
  }
  if (!(weight > 0.0)) {
    throw InvalidArgument("front-axis estimation needs non-zero opacity");
  }
  mean /= weight;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& s : cloud.splats) {
    const Vec2d d = Vec2d(s.position.x(), s.position.z()) - mean;
    cov += static_cast<double>(s.opacity) * d * d.transpose();
  }
  cov /= weight;

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(cov);
  const double small = solver.eigenvalues()[0];
  const double large = solver.eigenvalues()[1];
  if (!(small > 0.0) || large / small < kAnisotropyMin) {
    throw AmbiguousOrientationError(
        "horizontal footprint is nearly isotropic (eigenvalue ratio " + std::to_string(small > 0 ? large / small : 0.0) +
        " < 1.2); cannot tell front from side, pass a manual yaw");
  }
  Vec2d axis = solver.eigenvectors().col(0).normalized();  // (x, z)

  // Feet and toes sit in front of the body's vertical axis.
  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cloud.splats[a].position.y() < cloud.splats[b].position.y();
  });
  const auto low_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(kLowBandFraction * static_cast<double>(cloud.size()))));
  Vec2d low = Vec2d::Zero();
  double low_weight = 0.0;
  for (std::size_t k = 0; k < low_count; ++k) {
    const auto& s = cloud.splats[order[k]];
    low += static_cast<double>(s.opacity) * Vec2d(s.position.x(), s.position.z());
    low_weight += s.opacity;
  }
  if (low_weight > 0.0) {
    low /= low_weight;
  }
  if ((low - mean).dot(axis) < 0.0) {
    axis = -axis;
  }
  return std::atan2(axis.x(), axis.y());
}

FitResult fit_similarity(const SplatCloud& cloud, const SkinnedRig& rig, double yaw_init, const FitOptions& options)
{
  const auto positions = positions_of(cloud);
  return fit_similarity(build_vertex_index(positions), cloud, rig, yaw_init, options);
}

FitResult fit_similarity(const SpatialIndex& cloud_index, const SplatCloud& cloud, const SkinnedRig& rig,
                         double yaw_init, const FitOptions& options)
{
  if (cloud.empty()) {
    throw InvalidArgument("cannot fit an empty cloud");
  }
  const Pose a_pose = Pose::bind_pose(rig);
  std::vector<Vec3d> local = local_vertices(rig, a_pose);

  std::vector<double> cloud_y;
  cloud_y.reserve(cloud.size());
  for (const auto& s : cloud.splats) {
    cloud_y.push_back(s.position.y());
  }
  std::vector<double> rig_y;
  rig_y.reserve(local.size());
  for (const auto& v : local) {
    rig_y.push_back(v.y());
  }
  const double rig_height = robust_height(std::move(rig_y));
  if (!(rig_height > 0.0)) {
    throw InvalidArgument("rig has no vertical extent");
  }
  const double scale0 = robust_height(std::move(cloud_y)) / rig_height;
  if (!(scale0 > 0.0)) {
    throw FitFailureError("cloud has no vertical extent", FitResult{});
  }

  SimilarityObjective objective(cloud_index, std::move(local), options.pool);
  Placement current{yaw_init, scale0, cloud_stats(cloud).opacity_weighted_centroid};
  Tracker tracker;

  // 1. Yaw grid around the initial guess.
  const double step = deg_to_rad(2.0 * kYawGridHalfRange / kYawGridSteps);
  {
    Placement best = current;
    double best_value = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= kYawGridSteps; ++k) {
      Placement candidate = current;
      candidate.yaw = yaw_init - deg_to_rad(kYawGridHalfRange) + k * step;
      const double value = objective(candidate);
      if (value < best_value) {  // ascending yaw: ties keep the smaller value
        best_value = value;
        best = candidate;
      }
    }
    tracker.offer(best_value);
    current = best;
  }

  // 2-4. Golden-section on yaw and scale, then nearest-point re-centering.
  refine_placement(objective, current, tracker, step, kScaleRange);
  // 5-7. Second, narrower pass now that the body is centered.
  refine_placement(objective, current, tracker, deg_to_rad(2.0), kFineScaleRange);

  FitResult result;
  store_placement(objective, current, result);
  result.limb_pose = a_pose;
  result.limb_angles = LimbAngles{};
  result.objective = tracker.best;
  result.objective_trace = std::move(tracker.trace);
  if (result.objective > options.failure_threshold) {
    throw FitFailureError("template fit objective " + std::to_string(result.objective) + " m exceeds " +
                              std::to_string(options.failure_threshold) + " m",
                          result);
  }
  return result;
}

FitResult fit_limb_angles(const SplatCloud& cloud, const SkinnedRig& rig, const FitResult& base,
                          const FitOptions& options)
{
  const auto positions = positions_of(cloud);
  return fit_limb_angles(build_vertex_index(positions), rig, base, options);
}

FitResult fit_limb_angles(const SpatialIndex& cloud_index, const SkinnedRig& rig, const FitResult& base,
                          const FitOptions& options)
{
  FitResult result = base;
  std::vector<std::size_t> all(rig.vertex_count());
  std::iota(all.begin(), all.end(), std::size_t{0});

  auto full_objective = [&](const Pose& pose) {
    return chamfer_distance(place_vertices(rig, pose, result.similarity(), all), cloud_index, options.pool);
  };
  // The base objective comes from the similarity search, which places the
  // vertices along a slightly different arithmetic path; never let the trace
  // rise because of that rounding difference.
  Tracker tracker;
  const double start = full_objective(result.limb_pose);
  tracker.trace = result.objective_trace;
  tracker.best = tracker.trace.empty() ? start : std::min(start, tracker.trace.back());
  if (tracker.trace.empty()) {
    tracker.trace.push_back(start);
  }

  // Vertices whose dominant joint lies in each limb's chain.
  std::vector<std::vector<std::size_t>> subsets(4);
  for (std::size_t limb = 0; limb < 4; ++limb) {
    const auto joint = rig.find_joint(kLimbJointNames[limb]);
    if (!joint) {
      continue;
    }
    const auto chain = descendants_of(rig, *joint);
    for (std::size_t v = 0; v < rig.vertex_count(); ++v) {
      if (std::find(chain.begin(), chain.end(), rig.dominant_joint(v)) != chain.end()) {
        subsets[limb].push_back(v);
      }
    }
  }

  for (int pass = 0; pass < kLimbPasses; ++pass) {
    for (std::size_t limb = 0; limb < 4; ++limb) {
      const auto& subset = subsets[limb];
      if (subset.empty()) {
        continue;
      }
      const double* range = limb < 2 ? kShoulderRange : kHipRange;
      const Similarity similarity = result.similarity();
      LimbAngles probe = result.limb_angles;
      const double angle = golden_section(
          [&](double a) {
            probe[limb] = a;
            const Pose pose = apply_limb_angles(rig, result.limb_pose, probe);
            return chamfer_distance(place_vertices(rig, pose, similarity, subset), cloud_index, options.pool);
          },
          range[0], range[1], kGoldenIterations).first;
      LimbAngles candidate = result.limb_angles;
      candidate[limb] = angle;
      const Pose pose = apply_limb_angles(rig, result.limb_pose, candidate);
      if (tracker.offer(full_objective(pose))) {
        result.limb_angles = candidate;
        result.limb_pose = pose;
      }
    }

    // The similarity was fitted with the bind limbs; re-fit it to the new ones.
    SimilarityObjective objective(cloud_index, local_vertices(rig, result.limb_pose), options.pool);
    Placement current = placement_of(objective, result);
    refine_placement(objective, current, tracker, deg_to_rad(2.0), kFineScaleRange);
    store_placement(objective, current, result);
  }
  result.objective = tracker.best;
  result.objective_trace = std::move(tracker.trace);
  return result;
}

std::vector<Vec3f> fitted_vertices(const SkinnedRig& rig, const FitResult& fit)
{
  std::vector<std::size_t> all(rig.vertex_count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return place_vertices(rig, fit.limb_pose, fit.similarity(), all);
}

}  // namespace gsavatar
