// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/pipeline.hpp"

#include <chrono>

#include "json.hpp"

namespace gsavatar {

namespace {

class StageClock {
 public:
  StageClock() : start_(std::chrono::steady_clock::now()), last_(start_) {}

  double lap()
  {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }
  double total() const
  {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
  std::chrono::steady_clock::time_point last_;
};

nlohmann::json vec_json(const Vec3d& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

}  // namespace

PipelineResult run_bind_pipeline(const SplatCloud& scan, const SkinnedRig& rig, const PipelineOptions& options)
{
  PipelineResult out;
  StageClock clock;

  auto [isolated, report] = filter_subject(scan, options.filter);
  out.filter_report = std::move(report);
  out.timings.filter_ms = clock.lap();

  auto [normalized, transform] = normalize_cloud(isolated, options.target_height, options.filter.opacity_min);
  out.subject = std::move(normalized);
  out.normalization = transform;
  out.timings.normalize_ms = clock.lap();

  FitOptions fit_options;
  fit_options.failure_threshold = options.failure_threshold;
  fit_options.pool = options.pool;
  const double yaw_init =
      options.manual_yaw_deg ? deg_to_rad(*options.manual_yaw_deg) : estimate_front_axis(out.subject);
  std::vector<Vec3f> positions;
  positions.reserve(out.subject.size());
  for (const auto& s : out.subject.splats) {
    positions.push_back(s.position);
  }
  const SpatialIndex index = build_vertex_index(positions);
  out.fit = fit_similarity(index, out.subject, rig, yaw_init, fit_options);
  out.timings.fit_ms = clock.lap();
  if (!options.skip_limb_fit) {
    out.fit = fit_limb_angles(index, rig, out.fit, fit_options);
  }
  out.timings.limb_fit_ms = clock.lap();

  const BundleFit bundle_fit = BundleFit::from(out.fit);
  BindingSet bindings = compute_bindings(out.subject, rig, bundle_fit, options.pool);
  out.timings.bind_ms = clock.lap();

  GroupTable groups = assign_groups(bindings, rig);
  out.source_index = bindings.source_index;
  out.bundle = make_bundle(rig, bundle_fit, std::move(bindings), std::move(groups));
  out.timings.group_ms = clock.lap();
  out.timings.total_ms = clock.total();
  return out;
}

std::string pipeline_report_json(const PipelineResult& result, bool include_timings)
{
  using nlohmann::json;
  const FilterReport& f = result.filter_report;
  json removed = json::object();
  for (const auto& [rule, count] : f.removed_by_rule) {
    removed[rule] = count;
  }
  const FitResult& fit = result.fit;
  json report = {
      {"filter",
       {{"input_count", f.input_count},
        {"kept_count", f.kept_count},
        {"removed_by_rule", removed},
        {"ground_height", f.ground_height},
        {"floor_detected", f.floor_detected},
        {"ceiling_height", f.ceiling_height},
        {"cylinder_radius", f.cylinder_radius},
        {"subject_axis", json::array({f.subject_axis.x(), f.subject_axis.y()})}}},
      {"normalization",
       {{"translation", vec_json(result.normalization.translation)},
        {"uniform_scale", result.normalization.uniform_scale}}},
      {"fit",
       {{"yaw_deg", rad_to_deg(fit.yaw)},
        {"translation", vec_json(fit.translation)},
        {"uniform_scale", fit.uniform_scale},
        {"limb_angles_deg",
         {{"left_shoulder", fit.limb_angles.left_shoulder},
          {"right_shoulder", fit.limb_angles.right_shoulder},
          {"left_hip", fit.limb_angles.left_hip},
          {"right_hip", fit.limb_angles.right_hip}}},
        {"objective", fit.objective},
        {"objective_trace", fit.objective_trace}}},
      {"bundle",
       {{"splat_count", result.bundle.splat_count()},
        {"vertex_count", result.bundle.vertex_count},
        {"group_count", result.bundle.groups.groups.size()},
        {"rig_hash", to_hex(result.bundle.rig_hash)}}},
  };
  if (include_timings) {
    const StageTimings& t = result.timings;
    report["timings_ms"] = {{"filter", t.filter_ms},   {"normalize", t.normalize_ms}, {"fit", t.fit_ms},
                            {"limb_fit", t.limb_fit_ms}, {"bind", t.bind_ms},         {"group", t.group_ms},
                            {"total", t.total_ms}};
  }
  return report.dump(2) + "\n";
}

}  // namespace gsavatar
