// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gsavatar/binding.hpp"
#include "gsavatar/error.hpp"
#include "gsavatar/rig_io.hpp"

namespace gsavatar {

inline constexpr std::uint32_t kBundleVersion = 1;

/// Everything a player needs besides the rig: the persisted fit, per-splat
/// bindings and appearance, and the bone groups. Splats are stored in group
/// order.
struct AvatarBundle {
  std::uint32_t vertex_count = 0;
  RigHash rig_hash{};
  BundleFit fit;
  std::vector<SplatBinding> bindings;
  std::vector<Vec3f> colors;
  std::vector<float> opacities;
  GroupTable groups;

  std::size_t splat_count() const noexcept { return bindings.size(); }
};

AvatarBundle make_bundle(const SkinnedRig& rig, const BundleFit& fit, BindingSet bindings, GroupTable groups);

class BundleError : public FormatError {
 public:
  enum class Kind { kBadMagic, kUnsupportedVersion, kTruncated, kInconsistent };
  BundleError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Little-endian binary encoding. Float fields round-trip bit-exactly.
std::vector<std::uint8_t> export_bundle(const AvatarBundle& bundle);

/// Validates magic, version, lengths, index ranges and group layout. Nothing
/// is returned unless the whole buffer parses.
AvatarBundle import_bundle(std::span<const std::uint8_t> bytes);

void save_bundle(const std::filesystem::path& path, const AvatarBundle& bundle);
AvatarBundle load_bundle(const std::filesystem::path& path);

}  // namespace gsavatar
