// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gsavatar/rig_model.hpp"

namespace gsavatar {

/// SHA-256 over the canonical binary encoding of a rig (see canonical_rig_bytes).
using RigHash = std::array<std::uint8_t, 32>;

/// Little-endian encoding used for hashing:
///   "GSRIG001", u32 V, V x f32[3] vertices,
///   u32 J, per joint {u32 name_len, name bytes, i32 parent, f32[4] bind rotation xyzw, f32[3] bind translation},
///   V x 4 x {u32 joint, f32 weight},
///   u32 T, T x u32[3] triangles.
std::vector<std::uint8_t> canonical_rig_bytes(const SkinnedRig& rig);
RigHash rig_hash(const SkinnedRig& rig);
std::string to_hex(const RigHash& hash);

/// rig.json: {vertices: [[x,y,z]...], triangles: [[a,b,c]...],
///            joints: [{name, parent (null for root), bind_rotation [x,y,z,w], bind_translation [x,y,z]}],
///            skin: [[[joint, weight] x <=4]...]}
SkinnedRig rig_from_json(const std::string& text);
std::string rig_to_json(const SkinnedRig& rig);
SkinnedRig load_rig(const std::string& path);
void save_rig(const std::string& path, const SkinnedRig& rig);

/// anim.json: {duration, loop, tracks: {joint_name: [{t, rotation [x,y,z,w]}...]},
///             root_translation (optional): [{t, translation [x,y,z]}...]}
AnimationClip clip_from_json(const std::string& text, const SkinnedRig& rig);
std::string clip_to_json(const AnimationClip& clip, const SkinnedRig& rig);
AnimationClip load_clip(const std::string& path, const SkinnedRig& rig);
void save_clip(const std::string& path, const AnimationClip& clip, const SkinnedRig& rig);

}  // namespace gsavatar
