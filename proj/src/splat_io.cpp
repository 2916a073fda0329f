// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/splat_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "gsavatar/error.hpp"
#include "gsavatar/file_io.hpp"

namespace gsavatar {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

LengthError::LengthError(std::size_t expected, std::size_t actual)
    : Error("truncated PLY body: expected " + std::to_string(expected) + " bytes, got " +
            std::to_string(actual)),
      expected_(expected),
      actual_(actual)
{
}

namespace {

float decode_opacity(float raw) { return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(raw)))); }
float decode_scale(float raw) { return static_cast<float>(std::exp(static_cast<double>(raw))); }
float decode_color(float raw)
{
  return static_cast<float>(std::clamp(0.5 + kShC0 * static_cast<double>(raw), 0.0, 1.0));
}

// Finds a raw float near `analytic` that decodes to exactly `target`. The
// decode maps are monotone, so a short nextafter walk either side of the
// rounded analytic inverse finds the preimage when one exists.
template <typename Decode>
float invert(float target, double analytic, Decode decode)
{
  analytic = std::clamp(analytic, -120.0, 120.0);
  const float start = static_cast<float>(analytic);
  if (decode(start) == target) {
    return start;
  }
  float up = start;
  float down = start;
  for (int step = 0; step < 64; ++step) {
    up = std::nextafter(up, std::numeric_limits<float>::infinity());
    if (decode(up) == target) {
      return up;
    }
    down = std::nextafter(down, -std::numeric_limits<float>::infinity());
    if (decode(down) == target) {
      return down;
    }
  }
  return start;
}

enum class PlyType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

std::optional<PlyType> parse_type(const std::string& name)
{
  static const std::unordered_map<std::string, PlyType> kTypes = {
      {"char", PlyType::kInt8},     {"int8", PlyType::kInt8},       {"uchar", PlyType::kUInt8},
      {"uint8", PlyType::kUInt8},   {"short", PlyType::kInt16},     {"int16", PlyType::kInt16},
      {"ushort", PlyType::kUInt16}, {"uint16", PlyType::kUInt16},   {"int", PlyType::kInt32},
      {"int32", PlyType::kInt32},   {"uint", PlyType::kUInt32},     {"uint32", PlyType::kUInt32},
      {"float", PlyType::kFloat32}, {"float32", PlyType::kFloat32}, {"double", PlyType::kFloat64},
      {"float64", PlyType::kFloat64}};
  const auto it = kTypes.find(name);
  if (it == kTypes.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::size_t type_size(PlyType type)
{
  switch (type) {
    case PlyType::kInt8:
    case PlyType::kUInt8: return 1;
    case PlyType::kInt16:
    case PlyType::kUInt16: return 2;
    case PlyType::kInt32:
    case PlyType::kUInt32:
    case PlyType::kFloat32: return 4;
    case PlyType::kFloat64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  PlyType type;
  std::size_t offset;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
  std::size_t stride = 0;
};

struct Header {
  std::vector<Element> elements;
  std::size_t body_offset = 0;
};

[[noreturn]] void header_error(std::size_t line_no, const std::string& line, const std::string& why)
{
  throw FormatError("malformed PLY header at line " + std::to_string(line_no) + " ('" + line + "'): " + why);
}

Header parse_header(std::span<const std::uint8_t> bytes)
{
  Header header;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool saw_format = false;
  bool saw_end = false;

  while (pos < bytes.size()) {
    const auto* begin = bytes.data() + pos;
    const auto* nl = static_cast<const std::uint8_t*>(std::memchr(begin, '\n', bytes.size() - pos));
    if (nl == nullptr) {
      break;
    }
    std::string line(reinterpret_cast<const char*>(begin), static_cast<std::size_t>(nl - begin));
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    pos = static_cast<std::size_t>(nl - bytes.data()) + 1;
    ++line_no;

    std::istringstream tokens(line);
    std::string keyword;
    tokens >> keyword;

    if (line_no == 1) {
      if (line != "ply") {
        header_error(line_no, line, "expected magic 'ply'");
      }
      continue;
    }
    if (keyword == "format") {
      std::string kind;
      std::string version;
      tokens >> kind >> version;
      if (kind != "binary_little_endian") {
        header_error(line_no, line, "only binary_little_endian is supported");
      }
      if (version != "1.0") {
        header_error(line_no, line, "unsupported format version");
      }
      saw_format = true;
    } else if (keyword == "comment" || keyword == "obj_info" || keyword.empty()) {
      continue;
    } else if (keyword == "element") {
      Element element;
      long long count = -1;
      tokens >> element.name >> count;
      if (element.name.empty() || !tokens || count < 0) {
        header_error(line_no, line, "expected 'element <name> <count>'");
      }
      element.count = static_cast<std::size_t>(count);
      header.elements.push_back(std::move(element));
    } else if (keyword == "property") {
      if (header.elements.empty()) {
        header_error(line_no, line, "property before any element");
      }
      std::string type_name;
      std::string name;
      tokens >> type_name >> name;
      if (type_name == "list") {
        header_error(line_no, line, "list properties are not supported");
      }
      const auto type = parse_type(type_name);
      if (!type || name.empty()) {
        header_error(line_no, line, "expected 'property <type> <name>'");
      }
      auto& element = header.elements.back();
      element.properties.push_back(Property{name, *type, element.stride});
      element.stride += type_size(*type);
    } else if (keyword == "end_header") {
      saw_end = true;
      break;
    } else {
      header_error(line_no, line, "unknown keyword");
    }
  }

  if (line_no == 0) {
    throw FormatError("malformed PLY header at line 1: empty input");
  }
  if (!saw_end) {
    throw FormatError("malformed PLY header at line " + std::to_string(line_no) + ": missing end_header");
  }
  if (!saw_format) {
    throw FormatError("malformed PLY header at line 2: missing format line");
  }
  header.body_offset = pos;
  return header;
}

float read_f32(const std::uint8_t* p)
{
  float value;
  std::memcpy(&value, p, sizeof(value));
  return value;
}

void append_f32(std::vector<std::uint8_t>& out, float value)
{
  std::uint8_t buf[sizeof(float)];
  std::memcpy(buf, &value, sizeof(value));
  out.insert(out.end(), buf, buf + sizeof(buf));
}

bool is_ignored(const std::string& name) { return name == "nx" || name == "ny" || name == "nz"; }

}  // namespace

DecodedAppearance decode_appearance(float raw_opacity, const Vec3f& raw_scale, const Vec3f& raw_dc,
                                    std::size_t splat_index)
{
  if (!std::isfinite(raw_opacity) || !raw_scale.allFinite() || !raw_dc.allFinite()) {
    throw DecodeError(splat_index, "non-finite appearance value at splat " + std::to_string(splat_index));
  }
  DecodedAppearance out{};
  out.opacity = decode_opacity(raw_opacity);
  for (int i = 0; i < 3; ++i) {
    out.scale[i] = decode_scale(raw_scale[i]);
    out.color[i] = decode_color(raw_dc[i]);
  }
  return out;
}

RawAppearance encode_appearance(float opacity, const Vec3f& scale, const Vec3f& color)
{
  RawAppearance raw{};
  const double o = opacity;
  raw.opacity = invert(opacity, std::log(o / (1.0 - o)), decode_opacity);
  for (int i = 0; i < 3; ++i) {
    raw.scale[i] = invert(scale[i], std::log(static_cast<double>(scale[i])), decode_scale);
    raw.dc[i] = invert(color[i], (static_cast<double>(color[i]) - 0.5) / kShC0, decode_color);
  }
  return raw;
}

Quatf decode_rotation(float w, float x, float y, float z, std::size_t splat_index)
{
  const double n2 = double(w) * w + double(x) * x + double(y) * y + double(z) * z;
  if (!std::isfinite(n2) || n2 == 0.0) {
    throw DecodeError(splat_index, "zero-norm or non-finite rotation at splat " + std::to_string(splat_index));
  }
  const double norm = std::sqrt(n2);
  Quatf q(w, x, y, z);
  // Already unit to float precision: keep the stored bits so that a written
  // cloud re-reads identically.
  if (std::abs(norm - 1.0) > 0x1p-23) {
    q = Quatf(static_cast<float>(w / norm), static_cast<float>(x / norm), static_cast<float>(y / norm),
              static_cast<float>(z / norm));
  }
  return canonicalize(q);
}

SplatCloud parse_splat_ply(std::span<const std::uint8_t> bytes)
{
  const Header header = parse_header(bytes);

  std::size_t offset = header.body_offset;
  const Element* vertex = nullptr;
  for (const auto& element : header.elements) {
    if (element.name == "vertex") {
      vertex = &element;
      break;
    }
    offset += element.count * element.stride;
  }
  if (vertex == nullptr) {
    throw SchemaError("vertex", "PLY has no 'vertex' element");
  }

  std::unordered_map<std::string, const Property*> by_name;
  for (const auto& prop : vertex->properties) {
    by_name.emplace(prop.name, &prop);
  }
  auto require = [&](const std::string& name) -> std::size_t {
    const auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw SchemaError(name, "missing required property '" + name + "'");
    }
    if (it->second->type != PlyType::kFloat32) {
      throw SchemaError(name, "property '" + name + "' must be float32");
    }
    return it->second->offset;
  };

  static const char* const kRequired[] = {"x",       "y",       "z",       "f_dc_0", "f_dc_1",
                                          "f_dc_2",  "opacity", "scale_0", "scale_1", "scale_2",
                                          "rot_0",   "rot_1",   "rot_2",   "rot_3"};
  std::size_t off[14];
  for (std::size_t i = 0; i < 14; ++i) {
    off[i] = require(kRequired[i]);
  }

  // f_rest_* must be a contiguous 0..K-1 set whose size matches an SH degree.
  std::vector<std::size_t> rest_offsets;
  for (std::size_t k = 0;; ++k) {
    const std::string name = "f_rest_" + std::to_string(k);
    if (by_name.find(name) == by_name.end()) {
      break;
    }
    rest_offsets.push_back(require(name));
  }
  int sh_degree = -1;
  for (int degree = 0; degree <= 3; ++degree) {
    if (sh_rest_count(degree) == rest_offsets.size()) {
      sh_degree = degree;
    }
  }
  if (sh_degree < 0) {
    throw SchemaError("f_rest_" + std::to_string(rest_offsets.size()),
                      "f_rest_* count " + std::to_string(rest_offsets.size()) + " does not match any SH degree");
  }

  SplatCloud cloud;
  cloud.sh_degree = sh_degree;
  std::vector<std::size_t> extra_offsets;
  for (const auto& prop : vertex->properties) {
    cloud.source_field_names.push_back(prop.name);
    const bool known = std::find(std::begin(kRequired), std::end(kRequired), prop.name) != std::end(kRequired) ||
                       prop.name.rfind("f_rest_", 0) == 0 || is_ignored(prop.name);
    if (!known && prop.type == PlyType::kFloat32) {
      cloud.extra_field_names.push_back(prop.name);
      extra_offsets.push_back(prop.offset);
    }
  }

  const std::size_t needed = vertex->count * vertex->stride;
  const std::size_t available = bytes.size() > offset ? bytes.size() - offset : 0;
  if (available < needed) {
    throw LengthError(offset + needed, bytes.size());
  }

  cloud.splats.resize(vertex->count);
  for (std::size_t i = 0; i < vertex->count; ++i) {
    const std::uint8_t* row = bytes.data() + offset + i * vertex->stride;
    auto f = [&](std::size_t k) { return read_f32(row + off[k]); };
    Splat& s = cloud.splats[i];
    s.position = Vec3f(f(0), f(1), f(2));
    if (!s.position.allFinite()) {
      throw DecodeError(i, "non-finite position at splat " + std::to_string(i));
    }
    const auto appearance = decode_appearance(f(6), Vec3f(f(7), f(8), f(9)), Vec3f(f(3), f(4), f(5)), i);
    s.opacity = appearance.opacity;
    s.scale = appearance.scale;
    s.color = appearance.color;
    s.rotation = decode_rotation(f(10), f(11), f(12), f(13), i);
    s.sh_rest.resize(rest_offsets.size());
    for (std::size_t k = 0; k < rest_offsets.size(); ++k) {
      s.sh_rest[k] = read_f32(row + rest_offsets[k]);
    }
    s.extras.resize(extra_offsets.size());
    for (std::size_t k = 0; k < extra_offsets.size(); ++k) {
      s.extras[k] = read_f32(row + extra_offsets[k]);
    }
  }
  return cloud;
}

std::vector<std::uint8_t> write_splat_ply(const SplatCloud& cloud)
{
  if (cloud.empty()) {
    throw InvalidArgument("cannot write an empty splat cloud");
  }
  if (cloud.sh_degree < 0 || cloud.sh_degree > 3) {
    throw InvalidArgument("sh_degree must be in [0, 3]");
  }
  const std::size_t rest = sh_rest_count(cloud.sh_degree);
  const std::size_t extras = cloud.extra_field_names.size();

  std::ostringstream head;
  head << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size() << "\n";
  for (const char* name : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"}) {
    head << "property float " << name << "\n";
  }
  for (std::size_t k = 0; k < rest; ++k) {
    head << "property float f_rest_" << k << "\n";
  }
  for (const char* name : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
    head << "property float " << name << "\n";
  }
  for (const auto& name : cloud.extra_field_names) {
    head << "property float " << name << "\n";
  }
  head << "end_header\n";
  const std::string text = head.str();

  const std::size_t floats_per_row = 14 + rest + extras;
  std::vector<std::uint8_t> out;
  out.reserve(text.size() + cloud.size() * floats_per_row * sizeof(float));
  out.insert(out.end(), text.begin(), text.end());

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Splat& s = cloud.splats[i];
    if (s.sh_rest.size() != rest || s.extras.size() != extras) {
      throw InvalidArgument("splat " + std::to_string(i) + " payload length does not match cloud layout");
    }
    const RawAppearance raw = encode_appearance(s.opacity, s.scale, s.color);
    append_f32(out, s.position.x());
    append_f32(out, s.position.y());
    append_f32(out, s.position.z());
    append_f32(out, raw.dc.x());
    append_f32(out, raw.dc.y());
    append_f32(out, raw.dc.z());
    for (float v : s.sh_rest) {
      append_f32(out, v);
    }
    append_f32(out, raw.opacity);
    append_f32(out, raw.scale.x());
    append_f32(out, raw.scale.y());
    append_f32(out, raw.scale.z());
    append_f32(out, s.rotation.w());
    append_f32(out, s.rotation.x());
    append_f32(out, s.rotation.y());
    append_f32(out, s.rotation.z());
    for (float v : s.extras) {
      append_f32(out, v);
    }
  }
  return out;
}

SplatCloud read_splat_ply_file(const std::string& path) { return parse_splat_ply(read_file_bytes(path)); }

void write_splat_ply_file(const std::string& path, const SplatCloud& cloud)
{
  write_file_atomic(path, write_splat_ply(cloud));
}

CloudStats cloud_stats(const SplatCloud& cloud)
{
  if (cloud.empty()) {
    throw InvalidArgument("cloud_stats requires at least one splat");
  }
  CloudStats stats;
  stats.count = cloud.size();
  stats.aabb_min = Vec3d::Constant(std::numeric_limits<double>::infinity());
  stats.aabb_max = Vec3d::Constant(-std::numeric_limits<double>::infinity());
  Vec3d sum = Vec3d::Zero();
  Vec3d weighted = Vec3d::Zero();
  double weight = 0.0;
  for (const Splat& s : cloud.splats) {
    const Vec3d p = s.position.cast<double>();
    stats.aabb_min = stats.aabb_min.cwiseMin(p);
    stats.aabb_max = stats.aabb_max.cwiseMax(p);
    sum += p;
    weighted += static_cast<double>(s.opacity) * p;
    weight += s.opacity;
  }
  stats.centroid = sum / static_cast<double>(cloud.size());
  stats.opacity_weighted_centroid = weight > 0.0 ? Vec3d(weighted / weight) : stats.centroid;
  return stats;
}

}  // namespace gsavatar
