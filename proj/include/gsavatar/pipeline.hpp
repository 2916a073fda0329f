// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

#include "gsavatar/bundle.hpp"
#include "gsavatar/subject_isolation.hpp"
#include "gsavatar/template_fit.hpp"

namespace gsavatar {

/// Scan-to-bundle settings. The pipeline has no randomness, so there is no seed.
struct PipelineOptions {
  FilterParams filter;
  double target_height = 1.0;
  std::optional<double> manual_yaw_deg;  ///< skips front-axis estimation
  bool skip_limb_fit = false;
  double failure_threshold = 0.15;
  ThreadPool* pool = nullptr;
};

struct StageTimings {
  double filter_ms = 0.0;
  double normalize_ms = 0.0;
  double fit_ms = 0.0;
  double limb_fit_ms = 0.0;
  double bind_ms = 0.0;
  double group_ms = 0.0;
  double total_ms = 0.0;
};

struct PipelineResult {
  FilterReport filter_report;
  NormalizationTransform normalization;
  SplatCloud subject;  ///< isolated and normalized; the space the bundle lives in
  FitResult fit;
  AvatarBundle bundle;
  std::vector<std::uint32_t> source_index;  ///< bundle splat -> index in `subject`
  StageTimings timings;
};

/// filter -> normalize -> front axis -> similarity fit -> limb fit -> bind ->
/// group. Stage errors propagate unchanged (IsolationError, EstimationError,
/// NormalizationError, OrientationError, FitFailureError, BindingError).
PipelineResult run_bind_pipeline(const SplatCloud& scan, const SkinnedRig& rig, const PipelineOptions& options);

/// JSON report: filter report, normalization, fit and per-stage timings.
std::string pipeline_report_json(const PipelineResult& result, bool include_timings = true);

}  // namespace gsavatar
