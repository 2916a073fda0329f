// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/bundle.hpp"

#include <bit>
#include <cstring>

#include "gsavatar/file_io.hpp"

namespace gsavatar {

static_assert(std::endian::native == std::endian::little, "bundle I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'G', 'S', 'A', 'B'};
constexpr std::size_t kHeaderBytes = 4 + 4 * 4 + 32;
// vertex, rel_position, rel_rotation, scale, color, opacity
constexpr std::size_t kSplatBytes = 4 + 12 + 16 + 12 + 12 + 4;
constexpr std::size_t kGroupBytes = 12;

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  template <typename T>
  void put(T value)
  {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void put(const Vec3f& v)
  {
    put(v.x());
    put(v.y());
    put(v.z());
  }
  void put(const Quatf& q)
  {
    put(q.x());
    put(q.y());
    put(q.z());
    put(q.w());
  }
  void bytes(const void* data, std::size_t n)
  {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  void need(std::size_t n, const char* what) const
  {
    if (data_.size() - pos_ < n) {
      throw BundleError(BundleError::Kind::kTruncated, std::string("truncated bundle: ") + what + " needs " +
                                                           std::to_string(n) + " bytes, " +
                                                           std::to_string(data_.size() - pos_) + " left");
    }
  }
  template <typename T>
  T get()
  {
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  Vec3f vec3()
  {
    const float x = get<float>();
    const float y = get<float>();
    const float z = get<float>();
    return Vec3f(x, y, z);
  }
  Quatf quat()
  {
    const float x = get<float>();
    const float y = get<float>();
    const float z = get<float>();
    const float w = get<float>();
    return Quatf(w, x, y, z);
  }
  void copy(void* out, std::size_t n)
  {
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void check_consistent(const AvatarBundle& b)
{
  const std::size_t n = b.splat_count();
  if (b.colors.size() != n || b.opacities.size() != n) {
    throw InvalidArgument("bundle appearance arrays do not match the splat count");
  }
  std::uint32_t expect = 0;
  for (const auto& g : b.groups.groups) {
    if (g.start != expect || g.end <= g.start) {
      throw InvalidArgument("bundle group ranges must partition the splat array in order");
    }
    expect = g.end;
  }
  if (expect != n) {
    throw InvalidArgument("bundle group ranges do not cover every splat");
  }
}

}  // namespace

AvatarBundle make_bundle(const SkinnedRig& rig, const BundleFit& fit, BindingSet bindings, GroupTable groups)
{
  AvatarBundle b;
  b.vertex_count = static_cast<std::uint32_t>(rig.vertex_count());
  b.rig_hash = rig_hash(rig);
  b.fit = fit;
  b.bindings = std::move(bindings.bindings);
  b.colors = std::move(bindings.colors);
  b.opacities = std::move(bindings.opacities);
  b.groups = std::move(groups);
  check_consistent(b);
  if (b.groups.groups.size() > rig.joint_count()) {
    throw InvalidArgument("more groups than joints");
  }
  for (const auto& g : b.groups.groups) {
    if (g.bone >= rig.joint_count()) {
      throw InvalidArgument("group bone " + std::to_string(g.bone) + " is not a rig joint");
    }
  }
  for (std::size_t i = 0; i < b.bindings.size(); ++i) {
    if (b.bindings[i].vertex >= b.vertex_count) {
      throw InvalidArgument("splat " + std::to_string(i) + " is bound to vertex " +
                            std::to_string(b.bindings[i].vertex) + " of " + std::to_string(b.vertex_count));
    }
  }
  return b;
}

std::vector<std::uint8_t> export_bundle(const AvatarBundle& b)
{
  check_consistent(b);
  const std::size_t n = b.splat_count();
  const std::size_t joints = b.fit.limb_rotations.size();
  Writer w(kHeaderBytes + 24 + 16 * joints + n * kSplatBytes + b.groups.groups.size() * kGroupBytes);

  w.bytes(kMagic, 4);
  w.put(kBundleVersion);
  w.put(static_cast<std::uint32_t>(n));
  w.put(b.vertex_count);
  w.put(static_cast<std::uint32_t>(b.groups.groups.size()));
  w.bytes(b.rig_hash.data(), b.rig_hash.size());

  w.put(b.fit.yaw);
  w.put(b.fit.translation);
  w.put(b.fit.scale);
  w.put(static_cast<std::uint32_t>(joints));
  for (const auto& q : b.fit.limb_rotations) {
    w.put(q);
  }

  // Structure-of-arrays, one array per field.
  for (const auto& s : b.bindings) w.put(s.vertex);
  for (const auto& s : b.bindings) w.put(s.rel_position);
  for (const auto& s : b.bindings) w.put(s.rel_rotation);
  for (const auto& s : b.bindings) w.put(s.splat_scale);
  for (const auto& c : b.colors) w.put(c);
  for (const float o : b.opacities) w.put(o);

  for (const auto& g : b.groups.groups) {
    w.put(g.bone);
    w.put(g.start);
    w.put(g.end);
  }
  return w.take();
}

AvatarBundle import_bundle(std::span<const std::uint8_t> bytes)
{
  Reader r(bytes);
  r.need(4, "magic");
  char magic[4];
  r.copy(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw BundleError(BundleError::Kind::kBadMagic, "bad magic: not an avatar bundle");
  }
  r.need(4, "version");
  const auto version = r.get<std::uint32_t>();
  if (version != kBundleVersion) {
    throw BundleError(BundleError::Kind::kUnsupportedVersion,
                      "unsupported version " + std::to_string(version) + " (max supported " +
                          std::to_string(kBundleVersion) + ")");
  }
  r.need(kHeaderBytes - 8, "header");
  const auto n = r.get<std::uint32_t>();
  AvatarBundle b;
  b.vertex_count = r.get<std::uint32_t>();
  const auto group_count = r.get<std::uint32_t>();
  r.copy(b.rig_hash.data(), b.rig_hash.size());

  r.need(24, "fit block");
  b.fit.yaw = r.get<float>();
  b.fit.translation = r.vec3();
  b.fit.scale = r.get<float>();
  const auto joints = r.get<std::uint32_t>();
  r.need(std::size_t{16} * joints, "limb pose");
  b.fit.limb_rotations.resize(joints);
  for (auto& q : b.fit.limb_rotations) {
    q = r.quat();
  }

  r.need(std::size_t{kSplatBytes} * n, "splat arrays");
  b.bindings.resize(n);
  b.colors.resize(n);
  b.opacities.resize(n);
  for (auto& s : b.bindings) s.vertex = r.get<std::uint32_t>();
  for (auto& s : b.bindings) s.rel_position = r.vec3();
  for (auto& s : b.bindings) s.rel_rotation = r.quat();
  for (auto& s : b.bindings) s.splat_scale = r.vec3();
  for (auto& c : b.colors) c = r.vec3();
  for (auto& o : b.opacities) o = r.get<float>();

  r.need(std::size_t{kGroupBytes} * group_count, "group table");
  b.groups.groups.resize(group_count);
  for (auto& g : b.groups.groups) {
    g.bone = r.get<std::uint32_t>();
    g.start = r.get<std::uint32_t>();
    g.end = r.get<std::uint32_t>();
  }
  if (r.remaining() != 0) {
    throw BundleError(BundleError::Kind::kInconsistent,
                      std::to_string(r.remaining()) + " trailing bytes after the group table");
  }

  auto inconsistent = [](const std::string& what) { return BundleError(BundleError::Kind::kInconsistent, what); };
  for (std::size_t i = 0; i < n; ++i) {
    if (b.bindings[i].vertex >= b.vertex_count) {
      throw inconsistent("splat " + std::to_string(i) + " references vertex " +
                         std::to_string(b.bindings[i].vertex) + " of " + std::to_string(b.vertex_count));
    }
  }
  if (group_count > joints) {
    throw inconsistent("group count exceeds joint count");
  }
  std::uint32_t expect = 0;
  for (std::size_t g = 0; g < group_count; ++g) {
    const auto& range = b.groups.groups[g];
    if (range.start != expect || range.end <= range.start || range.end > n || range.bone >= joints) {
      throw inconsistent("group " + std::to_string(g) + " does not continue the partition of the splat array");
    }
    expect = range.end;
  }
  if (expect != n) {
    throw inconsistent("group ranges do not cover every splat");
  }
  b.groups.rebuild_membership(n);
  return b;
}

void save_bundle(const std::filesystem::path& path, const AvatarBundle& bundle)
{
  write_file_atomic(path.string(), export_bundle(bundle));
}

AvatarBundle load_bundle(const std::filesystem::path& path)
{
  const auto bytes = read_file_bytes(path.string());
  return import_bundle(bytes);
}

}  // namespace gsavatar
