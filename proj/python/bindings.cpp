// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

// Python module: thin wrappers that copy between library types and numpy.

#include <cstring>
#include <memory>
#include <optional>
#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cli.hpp"
#include "gsavatar/bundle.hpp"
#include "gsavatar/pipeline.hpp"
#include "gsavatar/rig_io.hpp"
#include "gsavatar/runtime.hpp"
#include "gsavatar/splat_io.hpp"
#include "gsavatar/synthetic.hpp"

namespace py = pybind11;
using namespace gsavatar;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

// Vec3f and Quatf are tightly packed float triples / quadruples.
template <typename T, int Width>
py::array_t<float> to_numpy(const std::vector<T>& values)
{
  static_assert(sizeof(T) == Width * sizeof(float));
  py::array_t<float> out({static_cast<py::ssize_t>(values.size()), static_cast<py::ssize_t>(Width)});
  std::memcpy(out.mutable_data(), values.data(), values.size() * sizeof(T));
  return out;
}

template <typename T, int Width>
std::vector<T> from_numpy(const FloatArray& a, const char* name)
{
  if (a.ndim() != 2 || a.shape(1) != Width) {
    throw InvalidArgument(std::string(name) + " must have shape (N, " + std::to_string(Width) + ")");
  }
  std::vector<T> out(static_cast<std::size_t>(a.shape(0)));
  std::memcpy(static_cast<void*>(out.data()), a.data(), out.size() * sizeof(T));
  return out;
}

Vec3f vec3(const std::array<float, 3>& v) { return Vec3f(v[0], v[1], v[2]); }

CameraState camera(const std::array<float, 3>& position, const std::array<float, 3>& forward)
{
  CameraState c;
  c.position = vec3(position);
  c.forward = vec3(forward).normalized();
  return c;
}

template <typename Fn>
auto with_pool(int threads, Fn&& fn)
{
  if (threads < 1) {
    throw InvalidArgument("threads must be at least 1");
  }
  std::unique_ptr<ThreadPool> pool = threads > 1 ? std::make_unique<ThreadPool>(threads) : nullptr;
  return fn(pool.get());
}

py::array_t<std::uint32_t> order_to_numpy(const DrawOrder& order)
{
  py::array_t<std::uint32_t> out(static_cast<py::ssize_t>(order.size()));
  std::memcpy(out.mutable_data(), order.data(), order.size() * sizeof(std::uint32_t));
  return out;
}

DrawOrder order_from_numpy(const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& a)
{
  return DrawOrder(a.data(), a.data() + a.size());
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Gaussian-splat scan to skinned avatar toolkit";

  // Base class first: pybind11 tries the most recently registered translator first.
  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", error);
  py::register_exception<SchemaError>(m, "SchemaError", error);
  py::register_exception<LengthError>(m, "LengthError", error);
  py::register_exception<DecodeError>(m, "DecodeError", error);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", error);
  py::register_exception<FileError>(m, "FileError", error);
  py::register_exception<RigError>(m, "RigError", error);
  py::register_exception<OrientationError>(m, "OrientationError", error);
  py::register_exception<CompatibilityError>(m, "CompatibilityError", error);
  py::register_exception<IsolationError>(m, "IsolationError", error);
  py::register_exception<FitFailureError>(m, "FitFailureError", error);
  py::register_exception<BindingError>(m, "BindingError", error);

  py::class_<SplatCloud>(m, "SplatCloud")
      .def("__len__", &SplatCloud::size)
      .def_readonly("sh_degree", &SplatCloud::sh_degree)
      .def_property_readonly("positions",
                             [](const SplatCloud& c) {
                               std::vector<Vec3f> v;
                               for (const auto& s : c.splats) v.push_back(s.position);
                               return to_numpy<Vec3f, 3>(v);
                             })
      .def_property_readonly("rotations",
                             [](const SplatCloud& c) {
                               std::vector<Quatf> v;
                               for (const auto& s : c.splats) v.push_back(s.rotation);
                               return to_numpy<Quatf, 4>(v);
                             },
                             "Unit quaternions, xyzw, w >= 0.")
      .def_property_readonly("scales",
                             [](const SplatCloud& c) {
                               std::vector<Vec3f> v;
                               for (const auto& s : c.splats) v.push_back(s.scale);
                               return to_numpy<Vec3f, 3>(v);
                             })
      .def_property_readonly("colors",
                             [](const SplatCloud& c) {
                               std::vector<Vec3f> v;
                               for (const auto& s : c.splats) v.push_back(s.color);
                               return to_numpy<Vec3f, 3>(v);
                             })
      .def_property_readonly("opacities", [](const SplatCloud& c) {
        py::array_t<float> out(static_cast<py::ssize_t>(c.size()));
        for (std::size_t i = 0; i < c.size(); ++i) out.mutable_at(i) = c.splats[i].opacity;
        return out;
      });

  m.def(
      "cloud_from_arrays",
      [](const FloatArray& positions, const FloatArray& rotations, const FloatArray& scales, const FloatArray& colors,
         const FloatArray& opacities) {
        const auto p = from_numpy<Vec3f, 3>(positions, "positions");
        const auto r = from_numpy<Quatf, 4>(rotations, "rotations");
        const auto s = from_numpy<Vec3f, 3>(scales, "scales");
        const auto c = from_numpy<Vec3f, 3>(colors, "colors");
        if (r.size() != p.size() || s.size() != p.size() || c.size() != p.size() ||
            static_cast<std::size_t>(opacities.size()) != p.size()) {
          throw InvalidArgument("all arrays must have the same length");
        }
        SplatCloud cloud;
        cloud.splats.resize(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
          auto& splat = cloud.splats[i];
          splat.position = p[i];
          splat.rotation = canonicalize(r[i].normalized());
          splat.scale = s[i];
          splat.color = c[i];
          splat.opacity = opacities.data()[i];
        }
        return cloud;
      },
      py::arg("positions"), py::arg("rotations"), py::arg("scales"), py::arg("colors"), py::arg("opacities"),
      "Cloud from (N,3) positions, (N,4) xyzw rotations, (N,3) scales and colors, (N,) opacities.");
  m.def("read_ply", &read_splat_ply_file, py::arg("path"));
  m.def("write_ply", &write_splat_ply_file, py::arg("path"), py::arg("cloud"));
  m.def(
      "cloud_stats",
      [](const SplatCloud& cloud) {
        const CloudStats s = cloud_stats(cloud);
        auto v = [](const Vec3d& x) { return std::array<double, 3>{x.x(), x.y(), x.z()}; };
        py::dict d;
        d["count"] = s.count;
        d["aabb_min"] = v(s.aabb_min);
        d["aabb_max"] = v(s.aabb_max);
        d["centroid"] = v(s.centroid);
        d["opacity_weighted_centroid"] = v(s.opacity_weighted_centroid);
        return d;
      },
      py::arg("cloud"));
  m.def(
      "synthetic_subject",
      [](std::size_t splats, double yaw_deg, double scale, const std::array<double, 3>& translation,
         double shoulder_deg, double hip_deg, double noise, std::size_t floor, std::size_t clutter,
         std::uint64_t seed) {
        SyntheticOptions o;
        o.splat_count = splats;
        o.placement = Similarity{deg_to_rad(yaw_deg), Vec3d(translation[0], translation[1], translation[2]), scale};
        o.limbs.left_shoulder = o.limbs.right_shoulder = shoulder_deg;
        o.limbs.left_hip = o.limbs.right_hip = hip_deg;
        o.noise_sigma = noise;
        o.floor_splats = floor;
        o.clutter_splats = clutter;
        o.seed = seed;
        return make_synthetic_subject(o);
      },
      py::arg("splats") = 20000, py::arg("yaw_deg") = 0.0, py::arg("scale") = 1.0,
      py::arg("translation") = std::array<double, 3>{0.0, 0.0, 0.0},
      py::arg("shoulder_deg") = kBindShoulderAbductionDeg, py::arg("hip_deg") = kBindHipAbductionDeg,
      py::arg("noise") = 0.001, py::arg("floor") = 0, py::arg("clutter") = 0, py::arg("seed") = 1,
      "Scan sampled from the template humanoid at a known placement and pose.");

  py::class_<SkinnedRig>(m, "Rig")
      .def_property_readonly("vertex_count", &SkinnedRig::vertex_count)
      .def_property_readonly("joint_count", &SkinnedRig::joint_count)
      .def_property_readonly("joint_names",
                             [](const SkinnedRig& r) {
                               std::vector<std::string> names;
                               for (const auto& j : r.joints()) names.push_back(j.name);
                               return names;
                             })
      .def_property_readonly("vertices", [](const SkinnedRig& r) { return to_numpy<Vec3f, 3>(r.vertices()); })
      .def_property_readonly("hash", [](const SkinnedRig& r) { return to_hex(rig_hash(r)); })
      .def("to_json", &rig_to_json);
  m.def("template_rig", &build_template_humanoid, py::arg("height") = 1.0);
  m.def("load_rig", &load_rig, py::arg("path"));
  m.def("save_rig", &save_rig, py::arg("path"), py::arg("rig"));

  py::class_<AnimationClip>(m, "Clip")
      .def_readonly("duration", &AnimationClip::duration)
      .def_readonly("loop", &AnimationClip::loop);
  m.def("demo_clip", &make_demo_clip, py::arg("rig"), py::arg("duration") = 2.0);
  m.def("load_clip", &load_clip, py::arg("path"), py::arg("rig"));
  m.def("save_clip", &save_clip, py::arg("path"), py::arg("clip"), py::arg("rig"));
  m.def(
      "fit_pose_clip", [](const AvatarBundle& b) { return make_static_clip(b.fit.limb_pose()); }, py::arg("bundle"),
      "One-key clip holding the bundle's fit pose.");

  py::class_<AvatarBundle>(m, "Bundle")
      .def("__len__", &AvatarBundle::splat_count)
      .def_readonly("vertex_count", &AvatarBundle::vertex_count)
      .def_property_readonly("group_count", [](const AvatarBundle& b) { return b.groups.groups.size(); })
      .def_property_readonly("groups",
                             [](const AvatarBundle& b) {
                               std::vector<std::array<std::uint32_t, 3>> g;
                               for (const auto& r : b.groups.groups) g.push_back({r.bone, r.start, r.end});
                               return g;
                             },
                             "(bone, start, end) per group.")
      .def_property_readonly("rig_hash", [](const AvatarBundle& b) { return to_hex(b.rig_hash); })
      .def_property_readonly("fit", [](const AvatarBundle& b) {
        py::dict d;
        d["yaw"] = b.fit.yaw;
        d["translation"] = std::array<float, 3>{b.fit.translation.x(), b.fit.translation.y(), b.fit.translation.z()};
        d["scale"] = b.fit.scale;
        return d;
      });
  m.def("load_bundle", [](const std::string& path) { return load_bundle(path); }, py::arg("path"));
  m.def("save_bundle", [](const std::string& path, const AvatarBundle& b) { save_bundle(path, b); },
        py::arg("path"), py::arg("bundle"));
  m.def(
      "export_bundle",
      [](const AvatarBundle& b) {
        const auto bytes = export_bundle(b);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      py::arg("bundle"));
  m.def(
      "import_bundle",
      [](const py::bytes& data) {
        const std::string s = data;
        return import_bundle(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
      },
      py::arg("data"));

  m.def(
      "bind",
      [](const SplatCloud& scan, const SkinnedRig& rig, std::optional<double> manual_yaw_deg, bool skip_limb_fit,
         double target_height, int threads, bool timings) {
        return with_pool(threads, [&](ThreadPool* pool) {
          PipelineOptions o;
          o.manual_yaw_deg = manual_yaw_deg;
          o.skip_limb_fit = skip_limb_fit;
          o.target_height = target_height;
          o.pool = pool;
          py::gil_scoped_release release;
          PipelineResult r = run_bind_pipeline(scan, rig, o);
          std::string report = pipeline_report_json(r, timings);
          return std::make_pair(std::move(r.bundle), std::move(report));
        });
      },
      py::arg("scan"), py::arg("rig"), py::arg("manual_yaw_deg") = py::none(), py::arg("skip_limb_fit") = false,
      py::arg("target_height") = 1.0, py::arg("threads") = 1, py::arg("timings") = true,
      "Isolate, normalize, fit and bind a scan. Returns (bundle, report JSON).");

  m.def(
      "pose",
      [](const AvatarBundle& bundle, const SkinnedRig& rig, const AnimationClip& clip, double t,
         const std::array<float, 3>& camera_position, const std::array<float, 3>& camera_forward,
         const std::string& mode, int threads) {
        const SortMode sort_mode = parse_sort_mode(mode);
        const CameraState cam = camera(camera_position, camera_forward);
        return with_pool(threads, [&](ThreadPool* pool) {
          FramePacket packet;
          std::vector<Vec3f> scales;
          {
            py::gil_scoped_release release;
            packet = run_frame(bundle, rig, clip, t, cam, sort_mode, pool);
            scales = splat_scales(bundle, sample_animation(clip, rig, t));
          }
          py::dict d;
          d["positions"] = to_numpy<Vec3f, 3>(packet.positions);
          d["rotations"] = to_numpy<Quatf, 4>(packet.rotations);
          d["scales"] = to_numpy<Vec3f, 3>(scales);
          d["order"] = order_to_numpy(packet.order);
          return d;
        });
      },
      py::arg("bundle"), py::arg("rig"), py::arg("clip"), py::arg("t"), py::arg("camera_position"),
      py::arg("camera_forward"), py::arg("mode") = "group", py::arg("threads") = 1,
      "Posed splats in bundle order plus the back-to-front draw order.");

  m.def(
      "orbit_camera",
      [](const std::array<float, 3>& target, double radius, double azimuth, double elevation) {
        const CameraState c = orbit_camera(vec3(target), radius, azimuth, elevation);
        return std::make_pair(std::array<float, 3>{c.position.x(), c.position.y(), c.position.z()},
                              std::array<float, 3>{c.forward.x(), c.forward.y(), c.forward.z()});
      },
      py::arg("target"), py::arg("radius"), py::arg("azimuth"), py::arg("elevation") = 0.0,
      "(position, forward) on a horizontal circle; azimuth 0 is on the +Z side.");
  m.def(
      "depths",
      [](const FloatArray& positions, const std::array<float, 3>& cp, const std::array<float, 3>& cf) {
        const auto d = splat_depths(from_numpy<Vec3f, 3>(positions, "positions"), camera(cp, cf));
        return py::array_t<double>(static_cast<py::ssize_t>(d.size()), d.data());
      },
      py::arg("positions"), py::arg("camera_position"), py::arg("camera_forward"));
  m.def(
      "full_sort",
      [](const FloatArray& positions, const std::array<float, 3>& cp, const std::array<float, 3>& cf) {
        return order_to_numpy(full_sort(from_numpy<Vec3f, 3>(positions, "positions"), camera(cp, cf)));
      },
      py::arg("positions"), py::arg("camera_position"), py::arg("camera_forward"));
  m.def(
      "group_sort",
      [](const FloatArray& positions, const AvatarBundle& bundle, const std::array<float, 3>& cp,
         const std::array<float, 3>& cf) {
        return order_to_numpy(group_sort(from_numpy<Vec3f, 3>(positions, "positions"), bundle.groups, camera(cp, cf)));
      },
      py::arg("positions"), py::arg("bundle"), py::arg("camera_position"), py::arg("camera_forward"));
  m.def(
      "order_divergence",
      [](const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& b,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& depths) {
        const auto d = order_divergence(order_from_numpy(a), order_from_numpy(b),
                                        std::span(depths.data(), static_cast<std::size_t>(depths.size())));
        return std::make_pair(d.inversion_fraction, d.max_depth_error);
      },
      py::arg("a"), py::arg("b"), py::arg("depths"), "(inversion_fraction, max_depth_error)");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> argv{"gsavatar"};
        argv.insert(argv.end(), args.begin(), args.end());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(argv, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command line in-process. Returns (exit_code, stdout, stderr).");
}
