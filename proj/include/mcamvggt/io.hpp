/*
 * Copyright 2026 The mcamvggt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MCAMVGGT_IO_HPP_
#define MCAMVGGT_IO_HPP_

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcamvggt/errors.hpp"
#include "mcamvggt/geometry.hpp"
#include "mcamvggt/synthetic.hpp"

namespace mcamvggt::io {

using nlohmann::json;
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "raw array and checkpoint I/O assume a little-endian host");

// ---------------------------------------------------------------------------
// Raw arrays: 16-byte header then little-endian float32 payload.
//   bytes 0-3   magic "MCRA"
//   bytes 4-5   dtype code (uint16, 1 = float32)
//   bytes 6-9   height H (uint32)
//   bytes 10-13 width W (uint32)
//   bytes 14-15 channels C (uint16)

inline constexpr std::array<char, 4> kRawMagic = {'M', 'C', 'R', 'A'};
inline constexpr std::uint16_t kDtypeFloat32 = 1;

struct RawArray {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint16_t channels = 0;
  std::vector<float> data;
};

inline void write_raw(const fs::path& path, const RawArray& a) {
  if (a.data.size() != static_cast<std::size_t>(a.height) * a.width * a.channels) {
    throw IoError("raw array payload size does not match its shape");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kRawMagic.data(), 4);
  out.write(reinterpret_cast<const char*>(&kDtypeFloat32), 2);
  out.write(reinterpret_cast<const char*>(&a.height), 4);
  out.write(reinterpret_cast<const char*>(&a.width), 4);
  out.write(reinterpret_cast<const char*>(&a.channels), 2);
  out.write(reinterpret_cast<const char*>(a.data.data()),
            static_cast<std::streamsize>(a.data.size() * sizeof(float)));
  if (!out) throw IoError("write failed for " + path.string());
}

inline RawArray read_raw(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  std::uint16_t dtype = 0;
  RawArray a;
  in.read(magic.data(), 4);
  in.read(reinterpret_cast<char*>(&dtype), 2);
  in.read(reinterpret_cast<char*>(&a.height), 4);
  in.read(reinterpret_cast<char*>(&a.width), 4);
  in.read(reinterpret_cast<char*>(&a.channels), 2);
  if (!in || magic != kRawMagic) throw IoError(path.string() + " is not a raw array file");
  if (dtype != kDtypeFloat32) throw IoError(path.string() + ": unsupported dtype");
  a.data.resize(static_cast<std::size_t>(a.height) * a.width * a.channels);
  in.read(reinterpret_cast<char*>(a.data.data()),
          static_cast<std::streamsize>(a.data.size() * sizeof(float)));
  if (!in) throw IoError(path.string() + ": truncated payload");
  return a;
}

// ---------------------------------------------------------------------------
// JSON documents.

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setw(2) << j << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

inline json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// {"R": 9 row-major floats, "t": 3 floats}
inline json pose_to_json(const PoseSE3& p) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) r.push_back(p.rotation()(i, k));
  }
  return {{"R", r}, {"t", vec3_to_json(p.translation())}};
}

inline PoseSE3 pose_from_json(const json& j) {
  if (!j.contains("R") || !j.contains("t") || j["R"].size() != 9) {
    throw ConfigError("pose must be {\"R\": [9], \"t\": [3]}");
  }
  Mat3 r;
  for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = j["R"][i].get<double>();
  PoseSE3 pose(r, vec3_from_json(j["t"]));
  if (!pose.is_valid(1e-6)) throw ConfigError("pose rotation is not orthonormal");
  // Stored values are rounded; re-project so downstream invariants hold.
  return PoseSE3(nearest_rotation(r), pose.translation());
}

inline json intrinsics_to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

inline CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics k;
  try {
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("intrinsics: ") + e.what());
  }
  return k;
}

inline json rig_to_json(const CameraRig& rig) {
  json out = json::array();
  for (const auto& c : rig.cameras) {
    out.push_back({{"camera_id", c.camera_id},
                   {"extrinsic", pose_to_json(c.extrinsic)},
                   {"intrinsics", intrinsics_to_json(c.intrinsics)}});
  }
  return out;
}

inline CameraRig rig_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("rig must be a JSON list");
  CameraRig rig;
  for (const auto& c : j) {
    RigCamera cam;
    try {
      cam.camera_id = c.at("camera_id").get<std::string>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("rig camera: ") + e.what());
    }
    cam.extrinsic = pose_from_json(c.at("extrinsic"));
    cam.intrinsics = intrinsics_from_json(c.at("intrinsics"));
    rig.cameras.push_back(cam);
  }
  rig.validate();
  return rig;
}

inline json primitive_to_json(const Primitive& p) {
  return {{"kind", p.kind == Primitive::Kind::kPlane ? "plane" : "box"},
          {"pose", pose_to_json(p.pose)},
          {"half_extents", vec3_to_json(p.half_extents)},
          {"color", vec3_to_json(p.color)}};
}

inline Primitive primitive_from_json(const json& j) {
  Primitive p;
  const std::string kind = j.value("kind", "plane");
  if (kind == "plane") {
    p.kind = Primitive::Kind::kPlane;
  } else if (kind == "box") {
    p.kind = Primitive::Kind::kBox;
  } else {
    throw ConfigError("unknown primitive kind '" + kind + "'");
  }
  if (j.contains("pose")) p.pose = pose_from_json(j["pose"]);
  if (j.contains("half_extents")) p.half_extents = vec3_from_json(j["half_extents"]);
  if (j.contains("color")) p.color = vec3_from_json(j["color"]);
  return p;
}

inline json scene_to_json(const SceneSpec& s) {
  json traj = json::array();
  for (const auto& p : s.ego_trajectory) traj.push_back(pose_to_json(p));
  json prims = json::array();
  for (const auto& p : s.static_geometry) prims.push_back(primitive_to_json(p));
  json dyn = json::array();
  for (const auto& d : s.dynamic_objects) {
    json poses = json::array();
    for (const auto& p : d.poses) poses.push_back(pose_to_json(p));
    dyn.push_back({{"half_extents", vec3_to_json(d.half_extents)},
                   {"color", vec3_to_json(d.color)},
                   {"poses", poses}});
  }
  return {{"name", s.name},
          {"rng_seed", s.rng_seed},
          {"num_frames", s.num_frames()},
          {"rig", rig_to_json(s.rig)},
          {"ego_trajectory", traj},
          {"static_geometry", prims},
          {"dynamic_objects", dyn},
          {"lidar", {{"rays", s.lidar_rays},
                     {"height", s.lidar_height},
                     {"max_range", s.lidar_max_range},
                     {"min_elevation_deg", s.lidar_min_elevation_deg},
                     {"max_elevation_deg", s.lidar_max_elevation_deg}}}};
}

inline SceneSpec scene_from_json(const json& j) {
  SceneSpec s;
  try {
    s.name = j.at("name").get<std::string>();
    s.rng_seed = j.value("rng_seed", std::uint64_t{0});
    s.rig = rig_from_json(j.at("rig"));
    for (const auto& p : j.at("ego_trajectory")) s.ego_trajectory.push_back(pose_from_json(p));
    for (const auto& p : j.at("static_geometry")) s.static_geometry.push_back(primitive_from_json(p));
    for (const auto& d : j.value("dynamic_objects", json::array())) {
      DynamicObject obj;
      obj.half_extents = vec3_from_json(d.at("half_extents"));
      obj.color = vec3_from_json(d.at("color"));
      for (const auto& p : d.at("poses")) obj.poses.push_back(pose_from_json(p));
      s.dynamic_objects.push_back(obj);
    }
    if (j.contains("lidar")) {
      const json& l = j["lidar"];
      s.lidar_rays = l.value("rays", s.lidar_rays);
      s.lidar_height = l.value("height", s.lidar_height);
      s.lidar_max_range = l.value("max_range", s.lidar_max_range);
      s.lidar_min_elevation_deg = l.value("min_elevation_deg", s.lidar_min_elevation_deg);
      s.lidar_max_elevation_deg = l.value("max_elevation_deg", s.lidar_max_elevation_deg);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene spec: ") + e.what());
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// ASCII PLY point clouds.

inline void write_ply(const fs::path& path, const std::vector<Vec3>& points,
                      const std::vector<Vec3>* colors = nullptr) {
  if (colors != nullptr && colors->size() != points.size()) {
    throw IoError("PLY color count differs from point count");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "ply\nformat ascii 1.0\nelement vertex " << points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (colors != nullptr) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  out << std::setprecision(9);
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << points[i].x() << ' ' << points[i].y() << ' ' << points[i].z();
    if (colors != nullptr) {
      for (int c = 0; c < 3; ++c) {
        out << ' ' << static_cast<int>(std::lround(std::clamp((*colors)[i][c], 0.0, 1.0) * 255.0));
      }
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::vector<Vec3> read_ply_points(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.rfind("element vertex", 0) == 0) count = std::stoul(line.substr(15));
    if (line == "end_header") break;
  }
  std::vector<Vec3> pts;
  pts.reserve(count);
  for (std::size_t i = 0; i < count && std::getline(in, line); ++i) {
    std::istringstream ss(line);
    Vec3 p;
    ss >> p.x() >> p.y() >> p.z();
    pts.push_back(p);
  }
  if (pts.size() != count) throw IoError(path.string() + ": truncated PLY");
  return pts;
}

// ---------------------------------------------------------------------------
// Checkpoints: "MCKP", uint32 version, uint32 json length, json text,
// uint32 tensor count, then per tensor: uint32 name length, name,
// uint32 ndim, uint32 dims[ndim], float32 payload.

struct NamedArray {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> data;
};

struct CheckpointFile {
  json header;
  std::vector<NamedArray> arrays;
};

inline constexpr std::array<char, 4> kCheckpointMagic = {'M', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_checkpoint(const fs::path& path, const CheckpointFile& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  out.write(kCheckpointMagic.data(), 4);
  put_u32(kCheckpointVersion);
  const std::string text = ck.header.dump();
  put_u32(static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_u32(static_cast<std::uint32_t>(ck.arrays.size()));
  for (const auto& a : ck.arrays) {
    put_u32(static_cast<std::uint32_t>(a.name.size()));
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    put_u32(static_cast<std::uint32_t>(a.shape.size()));
    std::size_t n = 1;
    for (auto d : a.shape) {
      put_u32(d);
      n *= d;
    }
    if (n != a.data.size()) throw IoError("checkpoint array '" + a.name + "' has a bad payload size");
    out.write(reinterpret_cast<const char*>(a.data.data()), static_cast<std::streamsize>(n * sizeof(float)));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

inline CheckpointFile read_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw MissingCheckpoint("checkpoint not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto get_u32 = [&] {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw IoError(path.string() + ": truncated checkpoint");
    return v;
  };
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kCheckpointMagic) throw IoError(path.string() + " is not a checkpoint");
  if (get_u32() != kCheckpointVersion) throw IoError(path.string() + ": unsupported checkpoint version");
  CheckpointFile ck;
  std::string text(get_u32(), '\0');
  in.read(text.data(), static_cast<std::streamsize>(text.size()));
  try {
    ck.header = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": corrupt header: " + e.what());
  }
  const std::uint32_t count = get_u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedArray a;
    a.name.resize(get_u32());
    in.read(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    const std::uint32_t ndim = get_u32();
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      a.shape.push_back(get_u32());
      n *= a.shape.back();
    }
    a.data.resize(n);
    in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw IoError(path.string() + ": truncated tensor '" + a.name + "'");
    ck.arrays.push_back(std::move(a));
  }
  return ck;
}

// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fingerprint(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

}  // namespace mcamvggt::io

#endif  // MCAMVGGT_IO_HPP_
