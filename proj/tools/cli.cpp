// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "gsavatar/bundle.hpp"
#include "gsavatar/file_io.hpp"
#include "gsavatar/pipeline.hpp"
#include "gsavatar/rig_io.hpp"
#include "gsavatar/runtime.hpp"
#include "gsavatar/synthetic.hpp"
#include "json.hpp"

namespace gsavatar::cli {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start)
{
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double median(std::vector<double> values)
{
  if (values.empty()) {
    return 0.0;
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

class UsageError : public Error {
 public:
  using Error::Error;
};

struct ThreadFlag {
  std::size_t threads = default_thread_count();

  std::unique_ptr<ThreadPool> make_pool() const
  {
    if (threads < 1) {
      throw UsageError("--threads must be at least 1");
    }
    return threads > 1 ? std::make_unique<ThreadPool>(threads) : nullptr;
  }
};

// Splat PLY of one posed frame, rows in draw order.
SplatCloud frame_cloud(const AvatarBundle& bundle, const FramePacket& packet, const std::vector<Vec3f>& scales)
{
  SplatCloud cloud;
  cloud.splats.resize(packet.order.size());
  for (std::size_t k = 0; k < packet.order.size(); ++k) {
    const std::uint32_t i = packet.order[k];
    Splat& s = cloud.splats[k];
    s.position = packet.positions[i];
    s.rotation = packet.rotations[i];
    s.scale = scales[i];
    s.color = bundle.colors[i];
    s.opacity = bundle.opacities[i];
  }
  return cloud;
}

// Mean splat position at the fit pose; the default camera target.
Vec3f bundle_center(const AvatarRuntime& runtime)
{
  const SplatFrame frame = runtime.update(runtime.bundle().fit.limb_pose());
  Vec3d sum = Vec3d::Zero();
  for (const auto& p : frame.positions) {
    sum += p.cast<double>();
  }
  if (frame.positions.empty()) {
    return Vec3f::Zero();
  }
  return (sum / static_cast<double>(frame.positions.size())).cast<float>();
}

int cmd_info(const std::string& input, bool as_json, std::ostream& out)
{
  const SplatCloud cloud = read_splat_ply_file(input);
  const CloudStats stats = cloud_stats(cloud);
  auto vec = [](const Vec3d& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); };
  if (as_json) {
    const nlohmann::json j = {{"count", stats.count},
                              {"sh_degree", cloud.sh_degree},
                              {"aabb_min", vec(stats.aabb_min)},
                              {"aabb_max", vec(stats.aabb_max)},
                              {"centroid", vec(stats.centroid)},
                              {"opacity_weighted_centroid", vec(stats.opacity_weighted_centroid)},
                              {"extra_properties", cloud.extra_field_names}};
    out << j.dump(2) << "\n";
    return kOk;
  }
  auto row = [&](const char* name, const Vec3d& v) {
    out << std::left << std::setw(28) << name << v.x() << " " << v.y() << " " << v.z() << "\n";
  };
  out << std::left << std::setw(28) << "count" << stats.count << "\n";
  out << std::left << std::setw(28) << "sh_degree" << cloud.sh_degree << "\n";
  row("aabb_min", stats.aabb_min);
  row("aabb_max", stats.aabb_max);
  row("centroid", stats.centroid);
  row("opacity_weighted_centroid", stats.opacity_weighted_centroid);
  if (!cloud.extra_field_names.empty()) {
    out << std::left << std::setw(28) << "extra_properties";
    for (const auto& name : cloud.extra_field_names) {
      out << name << " ";
    }
    out << "\n";
  }
  return kOk;
}

struct BindFlags {
  std::string input;
  std::string rig;
  std::string output;
  std::string report;
  std::string filter_config;
  std::string fit_clip;
  std::string subject_out;
  std::optional<double> cylinder_radius;
  std::optional<double> opacity_min;
  std::optional<double> floor_epsilon;
  std::optional<double> head_margin;
  std::optional<double> manual_yaw;
  double target_height = 1.0;
  bool skip_limb_fit = false;
  bool no_timings = false;
  ThreadFlag threads;
};

int cmd_bind(const BindFlags& f, std::ostream& out)
{
  PipelineOptions options;
  if (!f.filter_config.empty()) {
    options.filter = FilterParams::from_config(read_file_text(f.filter_config));
  }
  if (f.cylinder_radius) options.filter.cylinder_radius = *f.cylinder_radius;
  if (f.opacity_min) options.filter.opacity_min = *f.opacity_min;
  if (f.floor_epsilon) options.filter.floor_epsilon = *f.floor_epsilon;
  if (f.head_margin) options.filter.head_margin = *f.head_margin;
  try {
    options.filter.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (!(f.target_height > 0.0)) {
    throw UsageError("--target-height must be positive");
  }
  options.target_height = f.target_height;
  options.manual_yaw_deg = f.manual_yaw;
  options.skip_limb_fit = f.skip_limb_fit;
  const auto pool = f.threads.make_pool();
  options.pool = pool.get();

  const SplatCloud scan = read_splat_ply_file(f.input);
  const SkinnedRig rig = load_rig(f.rig);
  const PipelineResult result = run_bind_pipeline(scan, rig, options);

  // Everything is computed before the first write, so a failure leaves no
  // output behind; each write is itself atomic.
  const std::string report = pipeline_report_json(result, !f.no_timings);
  const auto bundle_bytes = export_bundle(result.bundle);
  write_file_atomic(f.output, bundle_bytes);
  write_file_atomic(f.report.empty() ? f.output + ".report.json" : f.report, report);
  if (!f.fit_clip.empty()) {
    save_clip(f.fit_clip, make_static_clip(result.bundle.fit.limb_pose()), rig);
  }
  if (!f.subject_out.empty()) {
    SplatCloud subject;
    subject.sh_degree = result.subject.sh_degree;
    subject.extra_field_names = result.subject.extra_field_names;
    subject.splats.reserve(result.source_index.size());
    for (const std::uint32_t i : result.source_index) {
      subject.splats.push_back(result.subject.splats[i]);
    }
    write_splat_ply_file(f.subject_out, subject);
  }
  out << "bound " << result.bundle.splat_count() << " splats into " << result.bundle.groups.groups.size()
      << " groups; yaw " << rad_to_deg(result.fit.yaw) << " deg, scale " << result.fit.uniform_scale
      << ", objective " << result.fit.objective << " m\n";
  return kOk;
}

struct PoseFlags {
  std::string bundle;
  std::string rig;
  std::string clip;
  std::string output;
  std::string order_out;
  double t = 0.0;
  std::vector<float> camera_position;
  std::vector<float> camera_forward;
  std::string mode = "group";
  ThreadFlag threads;
};

int cmd_pose(const PoseFlags& f, std::ostream& out)
{
  if (!(f.t >= 0.0)) {
    throw UsageError("--t must be non-negative");
  }
  const SortMode mode = parse_sort_mode(f.mode);
  const AvatarBundle bundle = load_bundle(f.bundle);
  const SkinnedRig rig = load_rig(f.rig);
  const AnimationClip clip = load_clip(f.clip, rig);
  const auto pool = f.threads.make_pool();
  AvatarRuntime runtime(bundle, rig, pool.get());

  CameraState camera;
  if (f.camera_position.empty() && f.camera_forward.empty()) {
    camera = orbit_camera(bundle_center(runtime), 3.0, 0.0);
  } else {
    if (f.camera_position.size() != 3 || f.camera_forward.size() != 3) {
      throw UsageError("--camera-pos and --camera-forward take three values each and must be given together");
    }
    camera.position = Vec3f(f.camera_position[0], f.camera_position[1], f.camera_position[2]);
    camera.forward = Vec3f(f.camera_forward[0], f.camera_forward[1], f.camera_forward[2]).normalized();
  }

  const Pose pose = sample_animation(clip, rig, f.t);
  const FramePacket packet = runtime.frame(clip, f.t, camera, mode);
  const auto depths = splat_depths(packet.positions, camera);
  std::ostringstream csv;
  csv << std::setprecision(9) << "rank,splat,depth\n";
  for (std::size_t k = 0; k < packet.order.size(); ++k) {
    csv << k << "," << packet.order[k] << "," << depths[packet.order[k]] << "\n";
  }
  const auto ply = write_splat_ply(frame_cloud(bundle, packet, splat_scales(bundle, pose)));
  write_file_atomic(f.output, ply);
  write_file_atomic(f.order_out.empty() ? f.output + ".order.csv" : f.order_out, csv.str());
  out << "posed " << packet.positions.size() << " splats at t=" << f.t << " (" << sort_mode_name(mode) << " sort)\n";
  return kOk;
}

struct BenchFlags {
  std::string bundle;
  std::string rig;
  std::string clip;
  std::string output;
  std::string mode = "all";
  int frames = 60;
  ThreadFlag threads;
};

int cmd_bench(const BenchFlags& f, std::ostream& out)
{
  if (f.frames < 1) {
    throw UsageError("--frames must be at least 1");
  }
  std::vector<SortMode> modes;
  if (f.mode == "all") {
    modes = {SortMode::kGroup, SortMode::kFull};
  } else {
    modes = {parse_sort_mode(f.mode)};
  }
  const AvatarBundle bundle = load_bundle(f.bundle);
  const SkinnedRig rig = load_rig(f.rig);
  const AnimationClip clip = load_clip(f.clip, rig);
  const auto pool = f.threads.make_pool();
  const AvatarRuntime runtime(bundle, rig, pool.get());
  const Vec3f center = bundle_center(runtime);

  struct Row {
    double update_ms;
    double sort_ms;
    double inversion;
  };
  std::vector<std::vector<Row>> rows(modes.size());
  SplatFrame frame;
  for (int k = 0; k < f.frames; ++k) {
    const double t = clip.duration * static_cast<double>(k) / static_cast<double>(f.frames);
    const CameraState camera = orbit_camera(center, 3.0, 2.0 * kPi * static_cast<double>(k) / f.frames, 0.3);
    const Pose pose = sample_animation(clip, rig, t);
    for (std::size_t m = 0; m < modes.size(); ++m) {
      auto start = Clock::now();
      runtime.update(pose, frame);
      const double update_ms = elapsed_ms(start);
      start = Clock::now();
      const DrawOrder order = modes[m] == SortMode::kGroup ? group_sort(frame.positions, bundle.groups, camera)
                                                           : full_sort(frame.positions, camera);
      const double sort_ms = elapsed_ms(start);
      // Reference order is recomputed outside the timed region.
      const DrawOrder reference = full_sort(frame.positions, camera);
      const auto divergence = order_divergence(reference, order, splat_depths(frame.positions, camera));
      rows[m].push_back(Row{update_ms, sort_ms, divergence.inversion_fraction});
    }
  }

  std::ostringstream csv;
  csv << std::setprecision(6) << "N,G,mode,ms_update,ms_sort,inversion_fraction\n";
  const std::size_t n = bundle.splat_count();
  const std::size_t g = bundle.groups.groups.size();
  for (std::size_t m = 0; m < modes.size(); ++m) {
    for (const Row& r : rows[m]) {
      csv << n << "," << g << "," << sort_mode_name(modes[m]) << "," << r.update_ms << "," << r.sort_ms << ","
          << r.inversion << "\n";
    }
  }
  for (std::size_t m = 0; m < modes.size(); ++m) {
    std::vector<double> u, s, inv;
    for (const Row& r : rows[m]) {
      u.push_back(r.update_ms);
      s.push_back(r.sort_ms);
      inv.push_back(r.inversion);
    }
    csv << "# median," << g << "," << sort_mode_name(modes[m]) << "," << median(u) << "," << median(s) << ","
        << median(inv) << "\n";
  }
  if (f.output.empty()) {
    out << csv.str();
  } else {
    write_file_atomic(f.output, csv.str());
  }
  return kOk;
}

struct SynthFlags {
  std::string output;
  std::string rig_out;
  std::size_t splats = 20000;
  double yaw = 0.0;
  double scale = 1.0;
  std::vector<double> translation{0.0, 0.0, 0.0};
  double shoulder = kBindShoulderAbductionDeg;
  double hip = kBindHipAbductionDeg;
  double noise = 0.001;
  std::size_t floor = 0;
  std::size_t clutter = 0;
  std::uint64_t seed = 1;
};

int cmd_synth(const SynthFlags& f, std::ostream& out)
{
  if (f.translation.size() != 3) {
    throw UsageError("--translation takes three values");
  }
  SyntheticOptions options;
  options.splat_count = f.splats;
  options.placement = Similarity{deg_to_rad(f.yaw), Vec3d(f.translation[0], f.translation[1], f.translation[2]),
                                 f.scale};
  options.limbs.left_shoulder = options.limbs.right_shoulder = f.shoulder;
  options.limbs.left_hip = options.limbs.right_hip = f.hip;
  options.noise_sigma = f.noise;
  options.floor_splats = f.floor;
  options.clutter_splats = f.clutter;
  options.seed = f.seed;
  const SplatCloud cloud = make_synthetic_subject(options);
  write_splat_ply_file(f.output, cloud);
  if (!f.rig_out.empty()) {
    save_rig(f.rig_out, build_template_humanoid(1.0));
  }
  out << "wrote " << cloud.size() << " splats to " << f.output << "\n";
  return kOk;
}

int cmd_template(const std::string& rig_out, const std::string& clip_out, double height, double duration,
                 std::ostream& out)
{
  const SkinnedRig rig = build_template_humanoid(height);
  save_rig(rig_out, rig);
  if (!clip_out.empty()) {
    save_clip(clip_out, make_demo_clip(rig, duration), rig);
  }
  out << "template rig: " << rig.vertex_count() << " vertices, " << rig.joint_count() << " joints, hash "
      << to_hex(rig_hash(rig)) << "\n";
  return kOk;
}

}  // namespace

int exit_code_for(const std::exception& error)
{
  if (dynamic_cast<const UsageError*>(&error) || dynamic_cast<const InvalidArgument*>(&error)) {
    return kUsageError;
  }
  if (dynamic_cast<const FileError*>(&error)) {
    return kMissingFile;
  }
  if (dynamic_cast<const FormatError*>(&error) || dynamic_cast<const SchemaError*>(&error) ||
      dynamic_cast<const LengthError*>(&error) || dynamic_cast<const DecodeError*>(&error) ||
      dynamic_cast<const RigError*>(&error)) {
    return kFormatError;
  }
  if (dynamic_cast<const CompatibilityError*>(&error)) {
    return kIncompatible;
  }
  if (dynamic_cast<const IsolationError*>(&error) || dynamic_cast<const EstimationError*>(&error) ||
      dynamic_cast<const NormalizationError*>(&error)) {
    return kFilterError;
  }
  if (dynamic_cast<const OrientationError*>(&error) || dynamic_cast<const FitFailureError*>(&error)) {
    return kFitError;
  }
  if (dynamic_cast<const BindingError*>(&error)) {
    return kBindError;
  }
  return kFailure;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Turn a static Gaussian-splat scan of a person into an animatable avatar bundle.", "gsavatar"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gsavatar 0.1.0");

  std::string info_input;
  bool info_json = false;
  auto* info = app.add_subcommand("info", "Print splat count, bounds and SH degree of a PLY file");
  info->add_option("input", info_input, "Splat PLY")->required();
  info->add_flag("--json", info_json, "Print JSON instead of aligned text");

  BindFlags bind_flags;
  auto* bind = app.add_subcommand("bind", "Isolate, fit, bind and export an avatar bundle");
  bind->add_option("input", bind_flags.input, "Scan PLY")->required();
  bind->add_option("rig", bind_flags.rig, "Rig JSON")->required();
  bind->add_option("output", bind_flags.output, "Output bundle")->required();
  bind->add_option("--report", bind_flags.report, "Report JSON path (default: <output>.report.json)");
  bind->add_option("--filter-config", bind_flags.filter_config, "key = value filter settings file");
  bind->add_option("--cylinder-radius", bind_flags.cylinder_radius, "Subject cylinder radius, scan units");
  bind->add_option("--opacity-min", bind_flags.opacity_min, "Drop splats below this opacity");
  bind->add_option("--floor-epsilon", bind_flags.floor_epsilon, "Drop splats this close above the ground");
  bind->add_option("--head-margin", bind_flags.head_margin, "Room above the densest band");
  bind->add_option("--target-height", bind_flags.target_height, "Subject height after normalization");
  bind->add_option("--manual-yaw", bind_flags.manual_yaw, "Facing direction in degrees; skips estimation");
  bind->add_flag("--skip-limb-fit", bind_flags.skip_limb_fit, "Keep the template's bind limb angles");
  bind->add_option("--fit-clip", bind_flags.fit_clip, "Also write a one-key clip holding the fit pose");
  bind->add_option("--subject-out", bind_flags.subject_out, "Also write the isolated subject in bundle order");
  bind->add_flag("--no-timings", bind_flags.no_timings, "Omit timings from the report");
  bind->add_option("--threads", bind_flags.threads.threads, "Worker threads (default: GSAVATAR_THREADS or cores)");

  PoseFlags pose_flags;
  auto* pose = app.add_subcommand("pose", "Pose a bundle at time t and write the splats in draw order");
  pose->add_option("bundle", pose_flags.bundle, "Avatar bundle")->required();
  pose->add_option("rig", pose_flags.rig, "Rig JSON")->required();
  pose->add_option("clip", pose_flags.clip, "Animation JSON")->required();
  pose->add_option("--t", pose_flags.t, "Clip time in seconds");
  pose->add_option("--camera-pos", pose_flags.camera_position, "Camera position x y z")->expected(3);
  pose->add_option("--camera-forward", pose_flags.camera_forward, "Camera forward x y z")->expected(3);
  pose->add_option("--mode", pose_flags.mode, "group or full");
  pose->add_option("--out", pose_flags.output, "Output PLY")->required();
  pose->add_option("--order-out", pose_flags.order_out, "Order CSV (default: <out>.order.csv)");
  pose->add_option("--threads", pose_flags.threads.threads, "Worker threads");

  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "Time per-frame update and sorting over an orbiting camera");
  bench->add_option("bundle", bench_flags.bundle, "Avatar bundle")->required();
  bench->add_option("rig", bench_flags.rig, "Rig JSON")->required();
  bench->add_option("clip", bench_flags.clip, "Animation JSON")->required();
  bench->add_option("--frames", bench_flags.frames, "Frames to run");
  bench->add_option("--mode", bench_flags.mode, "group, full or all");
  bench->add_option("--out", bench_flags.output, "CSV path (default: standard output)");
  bench->add_option("--threads", bench_flags.threads.threads, "Worker threads");

  SynthFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "Write a synthetic scan sampled from the template");
  synth->add_option("--out", synth_flags.output, "Output PLY")->required();
  synth->add_option("--rig-out", synth_flags.rig_out, "Also write the 1 m template rig");
  synth->add_option("--splats", synth_flags.splats, "Subject splat count");
  synth->add_option("--yaw", synth_flags.yaw, "Facing direction, degrees");
  synth->add_option("--scale", synth_flags.scale, "Uniform scale");
  synth->add_option("--translation", synth_flags.translation, "Placement x y z")->expected(3);
  synth->add_option("--shoulder", synth_flags.shoulder, "Shoulder abduction, degrees");
  synth->add_option("--hip", synth_flags.hip, "Hip abduction, degrees");
  synth->add_option("--noise", synth_flags.noise, "Position noise sigma");
  synth->add_option("--floor", synth_flags.floor, "Floor splats");
  synth->add_option("--clutter", synth_flags.clutter, "Background splats");
  synth->add_option("--seed", synth_flags.seed, "Random seed");

  std::string template_rig;
  std::string template_clip;
  double template_height = 1.0;
  double template_duration = 2.0;
  auto* tmpl = app.add_subcommand("template", "Write the template humanoid rig and an optional demo clip");
  tmpl->add_option("--out", template_rig, "Rig JSON")->required();
  tmpl->add_option("--clip-out", template_clip, "Demo animation JSON");
  tmpl->add_option("--height", template_height, "Template height");
  tmpl->add_option("--duration", template_duration, "Demo clip duration, seconds");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) {
      reversed.pop_back();  // program name
    }
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsageError;
  }

  try {
    if (*info) return cmd_info(info_input, info_json, out);
    if (*bind) return cmd_bind(bind_flags, out);
    if (*pose) return cmd_pose(pose_flags, out);
    if (*bench) return cmd_bench(bench_flags, out);
    if (*synth) return cmd_synth(synth_flags, out);
    if (*tmpl) return cmd_template(template_rig, template_clip, template_height, template_duration, out);
  } catch (const AmbiguousOrientationError& e) {
    err << "error: " << e.what() << "\n"
        << "hint: pass --manual-yaw <degrees> with the direction the subject faces (0 = +Z)\n";
    return kFitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kUsageError;
}

}  // namespace gsavatar::cli
