// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "gsavatar/error.hpp"
#include "gsavatar/parallel.hpp"
#include "gsavatar/rig_model.hpp"
#include "gsavatar/spatial_index.hpp"
#include "gsavatar/splat_io.hpp"
#include "gsavatar/template_humanoid.hpp"

namespace gsavatar {

/// Placement and limb pose of the template that best explains a scan.
struct FitResult {
  double yaw = 0.0;  ///< radians about +Y
  Vec3d translation = Vec3d::Zero();
  double uniform_scale = 1.0;
  LimbAngles limb_angles;
  Pose limb_pose;          ///< rig-local pose; the similarity is applied on top
  double objective = 0.0;  ///< one-sided chamfer, meters
  /// Objective after every accepted step, in order. Never increases.
  std::vector<double> objective_trace;

  Similarity similarity() const { return Similarity{yaw, translation, uniform_scale}; }
};

class AmbiguousOrientationError : public OrientationError {
 public:
  using OrientationError::OrientationError;
};

class FitFailureError : public Error {
 public:
  FitFailureError(const std::string& what, FitResult best) : Error(what), best_(std::move(best)) {}
  const FitResult& best() const noexcept { return best_; }

 private:
  FitResult best_;
};

struct FitOptions {
  double failure_threshold = 0.15;  ///< meters of mean chamfer
  ThreadPool* pool = nullptr;
};

/// Mean distance from each query point to its nearest target point, summed in
/// double in fixed-size chunks so the result does not depend on the pool size.
double chamfer_distance(std::span<const Vec3f> query, const SpatialIndex& target, ThreadPool* pool = nullptr);
double chamfer_distance(std::span<const Vec3f> query, const SplatCloud& target, ThreadPool* pool = nullptr);

/// Yaw whose forward axis (sin yaw, 0, cos yaw) points the way the subject
/// faces. Throws AmbiguousOrientationError when the horizontal footprint is
/// too round to tell width from depth.
double estimate_front_axis(const SplatCloud& cloud);

/// Coarse-to-fine search over yaw, scale and translation with the rig held in
/// its bind A-pose. Throws FitFailureError if the final objective exceeds the
/// failure threshold.
FitResult fit_similarity(const SplatCloud& cloud, const SkinnedRig& rig, double yaw_init,
                         const FitOptions& options = {});
FitResult fit_similarity(const SpatialIndex& cloud_index, const SplatCloud& cloud, const SkinnedRig& rig,
                         double yaw_init, const FitOptions& options = {});

/// Refines shoulder (20-80 deg) and hip (0-20 deg) abduction, one angle at a
/// time, accepting only changes that do not raise the full objective. After
/// each pass over the four limbs, yaw, scale and translation are refined again
/// with the new limb pose.
FitResult fit_limb_angles(const SplatCloud& cloud, const SkinnedRig& rig, const FitResult& base,
                          const FitOptions& options = {});
FitResult fit_limb_angles(const SpatialIndex& cloud_index, const SkinnedRig& rig, const FitResult& base,
                          const FitOptions& options = {});

/// Golden-section minimisation on [lo, hi] with a fixed iteration count.
/// Returns the best (x, f(x)) over every evaluated point.
std::pair<double, double> golden_section(const std::function<double(double)>& f, double lo, double hi,
                                         int iterations = 20);

/// Template vertices in the fit's world placement and limb pose.
std::vector<Vec3f> fitted_vertices(const SkinnedRig& rig, const FitResult& fit);

}  // namespace gsavatar
