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

#ifndef MCAMVGGT_DATASET_HPP_
#define MCAMVGGT_DATASET_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "mcamvggt/config.hpp"
#include "mcamvggt/io.hpp"
#include "mcamvggt/synthetic.hpp"

namespace mcamvggt {

struct DatasetScene {
  std::string split;  // "train" | "eval"
  SceneSpec spec;
  std::vector<FrameBundle> frames;
};

struct Dataset {
  int image_width = 0;
  int image_height = 0;
  std::vector<DatasetScene> scenes;

  std::vector<const DatasetScene*> split(const std::string& name) const {
    std::vector<const DatasetScene*> out;
    for (const auto& s : scenes) {
      if (s.split == name) out.push_back(&s);
    }
    return out;
  }
  // Held-out scenes, or the training scenes when none were generated.
  std::vector<const DatasetScene*> eval_scenes() const {
    auto out = split("eval");
    return out.empty() ? split("train") : out;
  }
};

inline std::vector<std::pair<std::string, SceneSpec>> scene_specs(const SceneConfig& cfg) {
  std::vector<std::pair<std::string, SceneSpec>> out;
  if (cfg.kind == "explicit") {
    for (const auto& s : cfg.explicit_train) out.emplace_back("train", s);
    for (const auto& s : cfg.explicit_eval) out.emplace_back("eval", s);
    if (out.empty()) throw ConfigError("explicit scene config lists no scenes");
    return out;
  }
  const CameraRig rig = rig_from_config(cfg);
  char name[32];
  for (int k = 0; k < cfg.train_scenes; ++k) {
    std::snprintf(name, sizeof(name), "train_%03d", k);
    out.emplace_back("train", make_random_scene(name, rig, cfg.options, cfg.seed * 1000003ull + k));
  }
  for (int k = 0; k < cfg.eval_scenes; ++k) {
    std::snprintf(name, sizeof(name), "eval_%03d", k);
    out.emplace_back("eval", make_random_scene(name, rig, cfg.options, cfg.seed * 1000003ull + 500000 + k));
  }
  return out;
}

inline Dataset generate_dataset(const SceneConfig& cfg, int workers = worker_count()) {
  Dataset ds{cfg.image_width, cfg.image_height, {}};
  for (auto& [split, spec] : scene_specs(cfg)) {
    for (const auto& cam : spec.rig.cameras) {
      if (cam.intrinsics.width != cfg.image_width || cam.intrinsics.height != cfg.image_height) {
        throw ConfigError("camera '" + cam.camera_id + "' image size differs from scene.image_width/height");
      }
    }
    auto frames = generate_scene(spec, workers);
    ds.scenes.push_back({split, std::move(spec), std::move(frames)});
  }
  return ds;
}

namespace detail {

inline io::RawArray depth_array(const DepthMap& d, bool mask) {
  io::RawArray a{static_cast<std::uint32_t>(d.height), static_cast<std::uint32_t>(d.width), 1, {}};
  a.data.resize(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    a.data[k] = mask ? (d.valid[k] ? 1.f : 0.f) : static_cast<float>(d.depth[k]);
  }
  return a;
}

inline void check_shape(const io::RawArray& a, int h, int w, int c, const std::filesystem::path& p) {
  if (a.height != static_cast<std::uint32_t>(h) || a.width != static_cast<std::uint32_t>(w) ||
      a.channels != static_cast<std::uint16_t>(c)) {
    throw IoError(p.string() + ": unexpected array shape");
  }
}

}  // namespace detail

// Layout:
//   rig.json, manifest.json
//   scene/<name>/spec.json
//   scene/<name>/frames/<i>/poses.json, lidar.raw
//   scene/<name>/frames/<i>/<camera_id>/{image,depth,mask}.raw
inline void write_dataset(const Dataset& ds, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  if (ds.scenes.empty()) throw EmptyScene("dataset has no scenes");
  io::write_json(root / "rig.json", io::rig_to_json(ds.scenes.front().spec.rig));
  json manifest = {{"image_width", ds.image_width}, {"image_height", ds.image_height}, {"scenes", json::array()}};
  for (const auto& scene : ds.scenes) {
    manifest["scenes"].push_back(
        {{"name", scene.spec.name}, {"split", scene.split}, {"frames", scene.frames.size()}});
    const fs::path dir = root / "scene" / scene.spec.name;
    fs::create_directories(dir / "frames", ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    io::write_json(dir / "spec.json", io::scene_to_json(scene.spec));
    for (const auto& f : scene.frames) {
      const fs::path fdir = dir / "frames" / std::to_string(f.frame_index);
      fs::create_directories(fdir, ec);
      if (ec) throw IoError("cannot create " + fdir.string() + ": " + ec.message());
      json poses = {{"ego", io::pose_to_json(f.ego_pose)}, {"cameras", json::object()}};
      for (const auto& c : f.cameras) {
        poses["cameras"][c.camera_id] = io::pose_to_json(c.cam_to_world);
        const fs::path cdir = fdir / c.camera_id;
        fs::create_directories(cdir, ec);
        if (ec) throw IoError("cannot create " + cdir.string() + ": " + ec.message());
        io::write_raw(cdir / "image.raw", {static_cast<std::uint32_t>(c.image.height),
                                           static_cast<std::uint32_t>(c.image.width), 3, c.image.rgb});
        io::write_raw(cdir / "depth.raw", detail::depth_array(c.depth, false));
        io::write_raw(cdir / "mask.raw", detail::depth_array(c.depth, true));
      }
      io::write_json(fdir / "poses.json", poses);
      io::RawArray lidar{static_cast<std::uint32_t>(f.sparse_points.size()), 1, 3, {}};
      for (const auto& p : f.sparse_points) {
        for (int k = 0; k < 3; ++k) lidar.data.push_back(static_cast<float>(p[k]));
      }
      io::write_raw(fdir / "lidar.raw", lidar);
    }
  }
  io::write_json(root / "manifest.json", manifest);
}

inline Dataset read_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::exists(root / "manifest.json")) throw IoError("no dataset at " + root.string());
  const json manifest = io::read_json(root / "manifest.json");
  Dataset ds;
  ds.image_width = manifest.at("image_width").get<int>();
  ds.image_height = manifest.at("image_height").get<int>();
  for (const auto& entry : manifest.at("scenes")) {
    DatasetScene scene;
    scene.split = entry.at("split").get<std::string>();
    const fs::path dir = root / "scene" / entry.at("name").get<std::string>();
    scene.spec = io::scene_from_json(io::read_json(dir / "spec.json"));
    const int n = entry.at("frames").get<int>();
    for (int i = 0; i < n; ++i) {
      const fs::path fdir = dir / "frames" / std::to_string(i);
      const json poses = io::read_json(fdir / "poses.json");
      FrameBundle f;
      f.frame_index = i;
      f.ego_pose = io::pose_from_json(poses.at("ego"));
      for (const auto& cam : scene.spec.rig.cameras) {
        const int w = cam.intrinsics.width, h = cam.intrinsics.height;
        CameraFrame c;
        c.camera_id = cam.camera_id;
        c.cam_to_world = io::pose_from_json(poses.at("cameras").at(cam.camera_id));
        const fs::path cdir = fdir / cam.camera_id;
        io::RawArray img = io::read_raw(cdir / "image.raw");
        detail::check_shape(img, h, w, 3, cdir / "image.raw");
        c.image = Image(w, h);
        c.image.rgb = std::move(img.data);
        const io::RawArray depth = io::read_raw(cdir / "depth.raw");
        const io::RawArray mask = io::read_raw(cdir / "mask.raw");
        detail::check_shape(depth, h, w, 1, cdir / "depth.raw");
        detail::check_shape(mask, h, w, 1, cdir / "mask.raw");
        c.depth = DepthMap(w, h);
        for (std::size_t k = 0; k < c.depth.size(); ++k) {
          c.depth.depth[k] = depth.data[k];
          c.depth.valid[k] = mask.data[k] > 0.5f ? 1 : 0;
        }
        f.cameras.push_back(std::move(c));
      }
      const io::RawArray lidar = io::read_raw(fdir / "lidar.raw");
      for (std::uint32_t k = 0; k < lidar.height; ++k) {
        f.sparse_points.emplace_back(lidar.data[3 * k], lidar.data[3 * k + 1], lidar.data[3 * k + 2]);
      }
      scene.frames.push_back(std::move(f));
    }
    ds.scenes.push_back(std::move(scene));
  }
  return ds;
}

}  // namespace mcamvggt

#endif  // MCAMVGGT_DATASET_HPP_
