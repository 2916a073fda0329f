// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "gsavatar/pipeline.hpp"
#include "gsavatar/runtime.hpp"
#include "gsavatar/synthetic.hpp"
#include "json.hpp"

using namespace gsavatar;

namespace {

constexpr std::size_t kSubjectSplats = 20000;

SplatCloud scan(double yaw_deg, std::uint64_t seed = 4)
{
  SyntheticOptions opts;
  opts.splat_count = kSubjectSplats;
  opts.placement = Similarity{deg_to_rad(yaw_deg), Vec3d(1.5, 0.3, -2.0), 1.8};
  opts.floor_splats = 4000;
  opts.clutter_splats = 2000;
  opts.seed = seed;
  return make_synthetic_subject(opts);
}

double yaw_error_deg(double a, double b) { return std::abs(rad_to_deg(std::remainder(a - b, 2.0 * kPi))); }

const SkinnedRig& rig()
{
  static const SkinnedRig r = build_template_humanoid(1.0);
  return r;
}

}  // namespace

TEST(Pipeline, IsolatesFitsAndBinds)
{
  const PipelineResult result = run_bind_pipeline(scan(40.0), rig(), PipelineOptions{});
  const FilterReport& f = result.filter_report;
  EXPECT_EQ(f.input_count, kSubjectSplats + 6000);
  EXPECT_TRUE(f.floor_detected);
  EXPECT_GE(f.kept_count, kSubjectSplats * 97 / 100);
  EXPECT_LE(f.kept_count, kSubjectSplats + 20);
  EXPECT_EQ(result.subject.size(), f.kept_count);
  EXPECT_EQ(result.bundle.splat_count(), f.kept_count);
  // The scan holds the template at scale 1.8; normalization rescales it.
  EXPECT_LT(yaw_error_deg(result.fit.yaw, deg_to_rad(40.0)), 5.0);
  EXPECT_NEAR(result.fit.uniform_scale / (1.8 * result.normalization.uniform_scale), 1.0, 0.02);
  EXPECT_LT(result.fit.objective, 0.02);
  for (std::size_t k = 1; k < result.fit.objective_trace.size(); ++k) {
    EXPECT_LE(result.fit.objective_trace[k], result.fit.objective_trace[k - 1]);
  }
  EXPECT_GT(result.bundle.groups.groups.size(), 10u);
}

TEST(Pipeline, FitPoseReproducesSubject)
{
  const PipelineResult result = run_bind_pipeline(scan(-70.0, 9), rig(), PipelineOptions{});
  const SplatFrame frame = update_splats(result.bundle, rig(), result.bundle.fit.limb_pose());
  ASSERT_EQ(result.source_index.size(), frame.positions.size());
  for (std::size_t i = 0; i < frame.positions.size(); ++i) {
    const Splat& s = result.subject.splats[result.source_index[i]];
    ASSERT_LT((frame.positions[i] - s.position).norm(), 1e-5) << i;
    ASSERT_LT(quat_distance(frame.rotations[i], s.rotation), 1e-4) << i;
    ASSERT_EQ(result.bundle.colors[i], s.color);
    ASSERT_EQ(result.bundle.opacities[i], s.opacity);
  }
}

TEST(Pipeline, ManualYawSkipsEstimation)
{
  PipelineOptions options;
  options.manual_yaw_deg = 40.0;
  const PipelineResult right = run_bind_pipeline(scan(40.0), rig(), options);
  EXPECT_LT(yaw_error_deg(right.fit.yaw, deg_to_rad(40.0)), 5.0);

  // Facing backwards: the search stays within its window around the given yaw.
  options.manual_yaw_deg = 220.0;
  options.failure_threshold = 1.0;
  const PipelineResult wrong = run_bind_pipeline(scan(40.0), rig(), options);
  EXPECT_LE(yaw_error_deg(wrong.fit.yaw, deg_to_rad(220.0)), 45.0 + 1e-9);
  EXPECT_GT(wrong.fit.objective, right.fit.objective);
}

TEST(Pipeline, SkipLimbFitKeepsBindAngles)
{
  PipelineOptions options;
  options.skip_limb_fit = true;
  const PipelineResult result = run_bind_pipeline(scan(0.0), rig(), options);
  EXPECT_EQ(result.fit.limb_angles.left_shoulder, kBindShoulderAbductionDeg);
  EXPECT_EQ(result.fit.limb_angles.right_hip, kBindHipAbductionDeg);
}

TEST(Pipeline, ReportJson)
{
  const PipelineResult result = run_bind_pipeline(scan(10.0), rig(), PipelineOptions{});
  const auto j = nlohmann::json::parse(pipeline_report_json(result));
  EXPECT_EQ(j["filter"]["input_count"].get<std::size_t>(), result.filter_report.input_count);
  EXPECT_EQ(j["filter"]["kept_count"].get<std::size_t>(), result.filter_report.kept_count);
  std::size_t removed = 0;
  for (const auto& [rule, count] : j["filter"]["removed_by_rule"].items()) {
    removed += count.get<std::size_t>();
  }
  EXPECT_EQ(removed + result.filter_report.kept_count, result.filter_report.input_count);
  EXPECT_TRUE(j["filter"]["floor_detected"].get<bool>());
  EXPECT_DOUBLE_EQ(j["fit"]["yaw_deg"].get<double>(), rad_to_deg(result.fit.yaw));
  EXPECT_EQ(j["fit"]["objective_trace"].size(), result.fit.objective_trace.size());
  EXPECT_EQ(j["bundle"]["splat_count"].get<std::size_t>(), result.bundle.splat_count());
  EXPECT_EQ(j["bundle"]["rig_hash"].get<std::string>(), to_hex(rig_hash(rig())));
  EXPECT_TRUE(j.contains("timings_ms"));
  EXPECT_FALSE(nlohmann::json::parse(pipeline_report_json(result, false)).contains("timings_ms"));
}

TEST(Pipeline, StageErrorsPropagate)
{
  SplatCloud faint = scan(0.0);
  for (auto& s : faint.splats) {
    s.opacity = 0.01f;
  }
  EXPECT_THROW(run_bind_pipeline(faint, rig(), PipelineOptions{}), IsolationError);

  PipelineOptions strict;
  strict.failure_threshold = 1e-6;
  EXPECT_THROW(run_bind_pipeline(scan(0.0), rig(), strict), FitFailureError);
}
