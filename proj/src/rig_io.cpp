// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/rig_io.hpp"

#include <cstring>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "gsavatar/error.hpp"
#include "gsavatar/file_io.hpp"
#include "json.hpp"

namespace gsavatar {

using json = nlohmann::json;

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value)
{
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

json quat_json(const Quatd& q) { return json::array({q.x(), q.y(), q.z(), q.w()}); }

Quatd quat_from(const json& j, const std::string& where)
{
  if (!j.is_array() || j.size() != 4) {
    throw RigError(where + ": expected [x, y, z, w]");
  }
  return Quatd(j[3].get<double>(), j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Vec3d vec_from(const json& j, const std::string& where)
{
  if (!j.is_array() || j.size() != 3) {
    throw RigError(where + ": expected [x, y, z]");
  }
  return Vec3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json parse_json(const std::string& text, const char* what)
{
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw RigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> canonical_rig_bytes(const SkinnedRig& rig)
{
  std::vector<std::uint8_t> out;
  const char magic[] = "GSRIG001";
  out.insert(out.end(), magic, magic + 8);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(rig.vertex_count()));
  for (const auto& v : rig.vertices()) {
    put(out, v.x());
    put(out, v.y());
    put(out, v.z());
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(rig.joint_count()));
  for (const auto& joint : rig.joints()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(joint.name.size()));
    out.insert(out.end(), joint.name.begin(), joint.name.end());
    put<std::int32_t>(out, joint.parent);
    const auto& q = joint.bind_local_rotation;
    for (double c : {q.x(), q.y(), q.z(), q.w()}) {
      put(out, static_cast<float>(c));
    }
    for (int i = 0; i < 3; ++i) {
      put(out, static_cast<float>(joint.bind_local_translation[i]));
    }
  }
  for (const auto& skin : rig.skin()) {
    for (const auto& influence : skin) {
      put<std::uint32_t>(out, influence.weight > 0.0f ? influence.joint : 0u);
      put(out, influence.weight);
    }
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(rig.triangles().size()));
  for (const auto& tri : rig.triangles()) {
    for (auto index : tri) {
      put<std::uint32_t>(out, index);
    }
  }
  return out;
}

RigHash rig_hash(const SkinnedRig& rig)
{
  const auto bytes = canonical_rig_bytes(rig);
  RigHash hash{};
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), hash.data(), &length, EVP_sha256(), nullptr) != 1 ||
      length != hash.size()) {
    throw Error("SHA-256 digest failed");
  }
  return hash;
}

std::string to_hex(const RigHash& hash)
{
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (auto byte : hash) {
    out << std::setw(2) << static_cast<int>(byte);
  }
  return out.str();
}

SkinnedRig rig_from_json(const std::string& text)
{
  const json doc = parse_json(text, "rig.json");
  try {
    std::vector<Vec3f> vertices;
    for (const auto& v : doc.at("vertices")) {
      vertices.push_back(vec_from(v, "vertex").cast<float>());
    }
    std::vector<std::array<std::uint32_t, 3>> triangles;
    if (doc.contains("triangles")) {
      for (const auto& t : doc.at("triangles")) {
        if (!t.is_array() || t.size() != 3) {
          throw RigError("triangle: expected [a, b, c]");
        }
        triangles.push_back({t[0].get<std::uint32_t>(), t[1].get<std::uint32_t>(), t[2].get<std::uint32_t>()});
      }
    }
    std::vector<Joint> joints;
    for (const auto& j : doc.at("joints")) {
      Joint joint;
      joint.name = j.at("name").get<std::string>();
      joint.parent = j.at("parent").is_null() ? -1 : j.at("parent").get<int>();
      joint.bind_local_rotation = quat_from(j.at("bind_rotation"), "joint '" + joint.name + "' bind_rotation");
      joint.bind_local_translation = vec_from(j.at("bind_translation"), "joint '" + joint.name + "'");
      joints.push_back(std::move(joint));
    }
    std::vector<VertexSkin> skin;
    for (const auto& entry : doc.at("skin")) {
      if (!entry.is_array() || entry.size() > 4) {
        throw RigError("skin entry must list at most 4 [joint, weight] pairs");
      }
      VertexSkin vs{};
      for (std::size_t k = 0; k < entry.size(); ++k) {
        vs[k].joint = entry[k].at(0).get<std::uint32_t>();
        vs[k].weight = entry[k].at(1).get<float>();
      }
      skin.push_back(vs);
    }
    return SkinnedRig::create(std::move(vertices), std::move(triangles), std::move(joints), std::move(skin));
  } catch (const json::exception& e) {
    throw RigError(std::string("rig.json: ") + e.what());
  }
}

std::string rig_to_json(const SkinnedRig& rig)
{
  json doc;
  json vertices = json::array();
  for (const auto& v : rig.vertices()) {
    vertices.push_back({v.x(), v.y(), v.z()});
  }
  doc["vertices"] = std::move(vertices);
  json triangles = json::array();
  for (const auto& t : rig.triangles()) {
    triangles.push_back({t[0], t[1], t[2]});
  }
  doc["triangles"] = std::move(triangles);
  json joints = json::array();
  for (const auto& joint : rig.joints()) {
    const auto& t = joint.bind_local_translation;
    joints.push_back({{"name", joint.name},
                      {"parent", joint.parent < 0 ? json(nullptr) : json(joint.parent)},
                      {"bind_rotation", quat_json(joint.bind_local_rotation)},
                      {"bind_translation", {t.x(), t.y(), t.z()}}});
  }
  doc["joints"] = std::move(joints);
  json skin = json::array();
  for (const auto& vs : rig.skin()) {
    json entry = json::array();
    for (const auto& influence : vs) {
      if (influence.weight > 0.0f) {
        entry.push_back({influence.joint, influence.weight});
      }
    }
    skin.push_back(std::move(entry));
  }
  doc["skin"] = std::move(skin);
  return doc.dump();
}

SkinnedRig load_rig(const std::string& path) { return rig_from_json(read_file_text(path)); }

void save_rig(const std::string& path, const SkinnedRig& rig) { write_file_atomic(path, rig_to_json(rig)); }

AnimationClip clip_from_json(const std::string& text, const SkinnedRig& rig)
{
  const json doc = parse_json(text, "anim.json");
  try {
    AnimationClip clip;
    clip.duration = doc.at("duration").get<double>();
    clip.loop = doc.value("loop", false);
    clip.tracks.resize(rig.joint_count());
    for (const auto& [name, keys] : doc.at("tracks").items()) {
      const auto joint = rig.find_joint(name);
      if (!joint) {
        throw RigError("anim.json: unknown joint '" + name + "'");
      }
      for (const auto& key : keys) {
        clip.tracks[*joint].push_back(RotationKey{key.at("t").get<double>(),
                                                  quat_from(key.at("rotation"), "track '" + name + "'")});
      }
    }
    if (doc.contains("root_translation")) {
      for (const auto& key : doc.at("root_translation")) {
        clip.root_translation.push_back(
            TranslationKey{key.at("t").get<double>(), vec_from(key.at("translation"), "root_translation")});
      }
    }
    clip.validate(rig);
    return clip;
  } catch (const json::exception& e) {
    throw RigError(std::string("anim.json: ") + e.what());
  }
}

std::string clip_to_json(const AnimationClip& clip, const SkinnedRig& rig)
{
  json doc;
  doc["duration"] = clip.duration;
  doc["loop"] = clip.loop;
  json tracks = json::object();
  for (std::size_t j = 0; j < clip.tracks.size() && j < rig.joint_count(); ++j) {
    if (clip.tracks[j].empty()) {
      continue;
    }
    json keys = json::array();
    for (const auto& key : clip.tracks[j]) {
      keys.push_back({{"t", key.time}, {"rotation", quat_json(key.rotation)}});
    }
    tracks[rig.joints()[j].name] = std::move(keys);
  }
  doc["tracks"] = std::move(tracks);
  if (!clip.root_translation.empty()) {
    json keys = json::array();
    for (const auto& key : clip.root_translation) {
      const auto& t = key.translation;
      keys.push_back({{"t", key.time}, {"translation", {t.x(), t.y(), t.z()}}});
    }
    doc["root_translation"] = std::move(keys);
  }
  return doc.dump();
}

AnimationClip load_clip(const std::string& path, const SkinnedRig& rig)
{
  return clip_from_json(read_file_text(path), rig);
}

void save_clip(const std::string& path, const AnimationClip& clip, const SkinnedRig& rig)
{
  write_file_atomic(path, clip_to_json(clip, rig));
}

}  // namespace gsavatar
