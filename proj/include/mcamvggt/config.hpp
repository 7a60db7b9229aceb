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

#ifndef MCAMVGGT_CONFIG_HPP_
#define MCAMVGGT_CONFIG_HPP_

#include <string>
#include <vector>

#include <json.hpp>

#include "mcamvggt/errors.hpp"
#include "mcamvggt/io.hpp"
#include "mcamvggt/losses.hpp"
#include "mcamvggt/model_config.hpp"
#include "mcamvggt/pipeline.hpp"
#include "mcamvggt/scene_builder.hpp"

namespace mcamvggt {

using nlohmann::json;

// Either procedurally generated street scenes or explicit scene specs.
struct SceneConfig {
  std::string kind = "random";  // "random" | "explicit"
  int image_width = 56;
  int image_height = 28;
  json rig = "nuscenes_like";   // preset name or explicit rig list
  int train_scenes = 6;
  int eval_scenes = 2;
  RandomSceneOptions options;
  std::uint64_t seed = 7;
  std::vector<SceneSpec> explicit_train;
  std::vector<SceneSpec> explicit_eval;
};

struct TrainConfig {
  int steps = 500;
  double lr = 2e-4;
  int finetune_steps = 0;
  double lr_finetune = 1e-4;
  int min_frames = 3;
  int max_frames = 6;
  std::uint64_t seed = 0;
  double grad_clip = 1.0;  // global norm; <= 0 disables
  LossWeights loss;
  DepthSource depth_source = DepthSource::kRender;
  int checkpoint_every = 0;  // 0 = only at the end
};

enum class Alignment { kLeastSquares, kScaleHead };

inline Alignment parse_alignment(const std::string& s) {
  if (s == "least_squares") return Alignment::kLeastSquares;
  if (s == "scale_head") return Alignment::kScaleHead;
  throw ConfigError("alignment must be 'least_squares' or 'scale_head', got '" + s + "'");
}

inline std::string to_string(Alignment a) { return a == Alignment::kLeastSquares ? "least_squares" : "scale_head"; }

struct EvalConfig {
  std::vector<int> frames = {6, 10, 14};
  Alignment alignment = Alignment::kLeastSquares;
};

struct BenchConfig {
  std::vector<int> frames = {8, 16, 32};
  std::vector<int> windows = {3, 5, 7};
  std::vector<std::string> modes = {"window", "global"};
  int cameras = 6;
  int runs = 5;
  int warmup = 2;
};

struct RunConfig {
  SceneConfig scene;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  BenchConfig bench;
  json model_json;  // canonical model section, the fingerprint source

  void validate() const;
};

// ---------------------------------------------------------------------------

inline json model_to_json(const ModelConfig& m) {
  return {{"image_width", m.image_width},
          {"image_height", m.image_height},
          {"patch_size", m.patch_size},
          {"dim", m.dim},
          {"layers", m.layers},
          {"heads", m.heads},
          {"selected_layers", m.selected_layers},
          {"window", m.window},
          {"mlp_ratio", m.mlp_ratio},
          {"max_frames", m.max_frames},
          {"head_channels", m.head_channels},
          {"variant", to_string(m.variant)},
          {"seed", m.seed}};
}

inline ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  m.image_width = j.value("image_width", m.image_width);
  m.image_height = j.value("image_height", m.image_height);
  m.patch_size = j.value("patch_size", m.patch_size);
  m.dim = j.value("dim", m.dim);
  m.layers = j.value("layers", m.layers);
  m.heads = j.value("heads", m.heads);
  if (j.contains("selected_layers")) {
    const auto v = j["selected_layers"].get<std::vector<int>>();
    if (v.size() != 4) throw ConfigError("selected_layers must list exactly 4 layers");
    std::copy(v.begin(), v.end(), m.selected_layers.begin());
  }
  m.window = j.value("window", m.window);
  m.mlp_ratio = j.value("mlp_ratio", m.mlp_ratio);
  m.max_frames = j.value("max_frames", m.max_frames);
  m.head_channels = j.value("head_channels", m.head_channels);
  m.variant = parse_variant(j.value("variant", to_string(m.variant)));
  m.seed = j.value("seed", m.seed);
  m.validate();
  return m;
}

inline std::string model_fingerprint(const ModelConfig& m) { return io::fingerprint(model_to_json(m).dump()); }

inline RandomSceneOptions scene_options_from_json(const json& j, RandomSceneOptions o) {
  o.num_frames = j.value("frames", o.num_frames);
  o.num_static_boxes = j.value("static_boxes", o.num_static_boxes);
  o.num_dynamic_objects = j.value("dynamic_objects", o.num_dynamic_objects);
  o.speed_min = j.value("speed_min", o.speed_min);
  o.speed_max = j.value("speed_max", o.speed_max);
  o.yaw_rate_max_deg = j.value("yaw_rate_max_deg", o.yaw_rate_max_deg);
  o.lidar_rays = j.value("lidar_rays", o.lidar_rays);
  return o;
}

inline json scene_config_to_json(const SceneConfig& s) {
  json j = {{"kind", s.kind}, {"image_width", s.image_width}, {"image_height", s.image_height}, {"rig", s.rig}};
  if (s.kind == "random") {
    j.update({{"train_scenes", s.train_scenes},
              {"eval_scenes", s.eval_scenes},
              {"seed", s.seed},
              {"frames", s.options.num_frames},
              {"static_boxes", s.options.num_static_boxes},
              {"dynamic_objects", s.options.num_dynamic_objects},
              {"speed_min", s.options.speed_min},
              {"speed_max", s.options.speed_max},
              {"yaw_rate_max_deg", s.options.yaw_rate_max_deg},
              {"lidar_rays", s.options.lidar_rays}});
  } else {
    json train = json::array(), eval = json::array();
    for (const auto& sp : s.explicit_train) train.push_back(io::scene_to_json(sp));
    for (const auto& sp : s.explicit_eval) eval.push_back(io::scene_to_json(sp));
    j["train"] = train;
    j["eval"] = eval;
  }
  return j;
}

inline CameraRig rig_from_config(const SceneConfig& s) {
  if (s.rig.is_string()) {
    if (s.rig.get<std::string>() != "nuscenes_like") {
      throw ConfigError("unknown rig preset '" + s.rig.get<std::string>() + "'");
    }
    return nuscenes_like_rig(s.image_width, s.image_height);
  }
  return io::rig_from_json(s.rig);
}

inline SceneConfig scene_config_from_json(const json& j) {
  SceneConfig s;
  s.kind = j.value("kind", s.kind);
  s.image_width = j.value("image_width", s.image_width);
  s.image_height = j.value("image_height", s.image_height);
  if (j.contains("rig")) s.rig = j["rig"];
  if (s.kind == "random") {
    s.train_scenes = j.value("train_scenes", s.train_scenes);
    s.eval_scenes = j.value("eval_scenes", s.eval_scenes);
    s.seed = j.value("seed", s.seed);
    s.options = scene_options_from_json(j, s.options);
  } else if (s.kind == "explicit") {
    for (const auto& sp : j.value("train", json::array())) s.explicit_train.push_back(io::scene_from_json(sp));
    for (const auto& sp : j.value("eval", json::array())) s.explicit_eval.push_back(io::scene_from_json(sp));
  } else {
    throw ConfigError("scene.kind must be 'random' or 'explicit'");
  }
  return s;
}

inline json loss_to_json(const LossWeights& w) {
  return {{"depth", w.depth}, {"rel", w.rel}, {"seq", w.seq}, {"alpha", w.alpha}, {"huber_delta", w.huber_delta}};
}

inline LossWeights loss_from_json(const json& j) {
  LossWeights w;
  w.depth = j.value("depth", w.depth);
  w.rel = j.value("rel", w.rel);
  w.seq = j.value("seq", w.seq);
  w.alpha = j.value("alpha", w.alpha);
  w.huber_delta = j.value("huber_delta", w.huber_delta);
  return w;
}

inline json train_to_json(const TrainConfig& t) {
  return {{"steps", t.steps},
          {"lr", t.lr},
          {"finetune_steps", t.finetune_steps},
          {"lr_finetune", t.lr_finetune},
          {"batch_frames", {t.min_frames, t.max_frames}},
          {"seed", t.seed},
          {"grad_clip", t.grad_clip},
          {"loss", loss_to_json(t.loss)},
          {"depth_source", to_string(t.depth_source)},
          {"checkpoint_every", t.checkpoint_every}};
}

inline TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.steps = j.value("steps", t.steps);
  t.lr = j.value("lr", t.lr);
  t.finetune_steps = j.value("finetune_steps", t.finetune_steps);
  t.lr_finetune = j.value("lr_finetune", t.lr_finetune);
  if (j.contains("batch_frames")) {
    const json& b = j["batch_frames"];
    if (b.is_number_integer()) {
      t.min_frames = t.max_frames = b.get<int>();
    } else if (b.is_array() && b.size() == 2) {
      t.min_frames = b[0].get<int>();
      t.max_frames = b[1].get<int>();
    } else {
      throw ConfigError("batch_frames must be an integer or [min, max]");
    }
  }
  t.seed = j.value("seed", t.seed);
  t.grad_clip = j.value("grad_clip", t.grad_clip);
  if (j.contains("loss")) t.loss = loss_from_json(j["loss"]);
  t.depth_source = parse_depth_source(j.value("depth_source", to_string(t.depth_source)));
  t.checkpoint_every = j.value("checkpoint_every", t.checkpoint_every);
  return t;
}

inline void RunConfig::validate() const {
  model.validate();
  train.loss.validate();
  if (scene.image_width != model.image_width || scene.image_height != model.image_height) {
    throw ConfigError("scene and model image sizes differ");
  }
  if (train.steps < 0 || train.finetune_steps < 0) throw ConfigError("step counts must be non-negative");
  if (!(train.lr > 0) || !(train.lr_finetune > 0)) throw ConfigError("learning rates must be positive");
  if (train.min_frames < 3 || train.max_frames > 10 || train.min_frames > train.max_frames) {
    throw ConfigError("batch_frames must lie within [3, 10]");
  }
  if (train.max_frames > model.max_frames) throw ConfigError("batch_frames exceeds model.max_frames");
  for (int f : eval.frames) {
    if (f < 1 || f > model.max_frames) throw ConfigError("eval.frames entries must be in [1, max_frames]");
  }
  if (bench.frames.empty() || bench.windows.empty() || bench.modes.empty()) {
    throw ConfigError("bench grid must not be empty");
  }
  for (int f : bench.frames) {
    if (f < 1 || f > model.max_frames) throw ConfigError("bench.frames entries must be in [1, max_frames]");
  }
  for (int w : bench.windows) {
    if (w < 1 || w % 2 == 0) throw ConfigError("bench.windows entries must be odd and >= 1");
  }
  for (const auto& m : bench.modes) {
    if (m != "window" && m != "global") throw ConfigError("bench.modes entries must be 'window' or 'global'");
  }
  if (bench.cameras < 1 || bench.runs < 1 || bench.warmup < 0) throw ConfigError("bad bench counts");
  if (scene.kind == "random" && (scene.train_scenes < 0 || scene.eval_scenes < 0 ||
                                 scene.train_scenes + scene.eval_scenes < 1 || scene.options.num_frames < 1)) {
    throw ConfigError("random scenes need at least one scene and one frame");
  }
}

inline json run_config_to_json(const RunConfig& c) {
  return {{"scene", scene_config_to_json(c.scene)},
          {"model", model_to_json(c.model)},
          {"train", train_to_json(c.train)},
          {"eval", {{"frames", c.eval.frames}, {"alignment", to_string(c.eval.alignment)}}},
          {"bench", {{"frames", c.bench.frames},
                     {"windows", c.bench.windows},
                     {"modes", c.bench.modes},
                     {"cameras", c.bench.cameras},
                     {"runs", c.bench.runs},
                     {"warmup", c.bench.warmup}}}};
}

inline RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  try {
    if (j.contains("scene")) c.scene = scene_config_from_json(j["scene"]);
    if (j.contains("model")) c.model = model_from_json(j["model"]);
    if (j.contains("train")) c.train = train_from_json(j["train"]);
    if (j.contains("eval")) {
      const json& e = j["eval"];
      if (e.contains("frames")) {
        c.eval.frames = e["frames"].is_array() ? e["frames"].get<std::vector<int>>()
                                               : std::vector<int>{e["frames"].get<int>()};
      }
      c.eval.alignment = parse_alignment(e.value("alignment", to_string(c.eval.alignment)));
    }
    if (j.contains("bench")) {
      const json& b = j["bench"];
      c.bench.frames = b.value("frames", c.bench.frames);
      c.bench.windows = b.value("windows", c.bench.windows);
      c.bench.modes = b.value("modes", c.bench.modes);
      c.bench.cameras = b.value("cameras", c.bench.cameras);
      c.bench.runs = b.value("runs", c.bench.runs);
      c.bench.warmup = b.value("warmup", c.bench.warmup);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.model_json = model_to_json(c.model);
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(io::read_json(path));
}

}  // namespace mcamvggt

#endif  // MCAMVGGT_CONFIG_HPP_
