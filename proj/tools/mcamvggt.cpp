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

// Command-line entry point: generate | train | eval | bench | ablation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcamvggt/bench.hpp"
#include "mcamvggt/checkpoint.hpp"
#include "mcamvggt/config.hpp"
#include "mcamvggt/dataset.hpp"
#include "mcamvggt/evaluation.hpp"
#include "mcamvggt/io.hpp"
#include "mcamvggt/train.hpp"

namespace fs = std::filesystem;
using namespace mcamvggt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitCompat = 5;

struct Options {
  std::string config;
  std::string out = ".";
  std::string dataset;
  std::string checkpoint;
  std::string resume;
  std::string export_ply;
  std::string alignment;
  std::optional<int> frames;
  std::optional<std::uint64_t> seed;
};

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

std::vector<SceneData> load_scenes(const Dataset& ds, const std::string& split, DepthSource source) {
  std::vector<SceneData> out;
  for (const auto* s : split == "eval" ? ds.eval_scenes() : ds.split(split)) {
    out.push_back(build_scene_data(s->spec, s->frames, source));
  }
  return out;
}

std::vector<const SceneData*> pointers(const std::vector<SceneData>& v) {
  std::vector<const SceneData*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

void check_dataset(const Dataset& ds, const ModelConfig& m) {
  if (ds.image_width != m.image_width || ds.image_height != m.image_height) {
    throw FingerprintMismatch("dataset image size " + std::to_string(ds.image_width) + "x" +
                              std::to_string(ds.image_height) + " does not match the model");
  }
}

int cmd_generate(const Options& o) {
  RunConfig cfg = load_run_config(o.config);
  if (o.seed) cfg.scene.seed = *o.seed;
  const Dataset ds = generate_dataset(cfg.scene);
  write_dataset(ds, o.out);
  for (const auto& s : ds.scenes) {
    std::size_t points = 0;
    for (const auto& f : s.frames) points += f.sparse_points.size();
    std::printf("%-12s %-5s frames=%zu cameras=%zu lidar_points=%zu\n", s.spec.name.c_str(), s.split.c_str(),
                s.frames.size(), s.spec.rig.size(), points);
  }
  return kExitOk;
}

int cmd_train(const Options& o) {
  RunConfig cfg = load_run_config(o.config);
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.dataset.empty()) throw ConfigError("train needs --dataset");
  const Dataset ds = read_dataset(o.dataset);
  check_dataset(ds, cfg.model);
  const std::vector<SceneData> scenes = load_scenes(ds, "train", cfg.train.depth_source);
  make_dir(o.out);
  DriveModel<float> model(cfg.model);
  Trainer trainer(model, cfg.train, pointers(scenes));
  if (!o.resume.empty()) {
    const CheckpointInfo info = load_checkpoint(o.resume, model, &trainer.optimizer().moments());
    trainer.set_step(info.step);
  }
  const fs::path ckpt = fs::path(o.out) / "checkpoint.bin";
  std::ofstream log(fs::path(o.out) / "train_log.jsonl", o.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw IoError("cannot open training log in " + o.out);
  try {
    trainer.run([&](const TrainRecord& r) {
      log << r.to_json().dump() << '\n';
      log.flush();
      if (cfg.train.checkpoint_every > 0 && (r.step + 1) % cfg.train.checkpoint_every == 0) {
        save_checkpoint(ckpt, model, r.step + 1, &trainer.optimizer().moments());
      }
    });
  } catch (const NonFinite& e) {
    json diag = trainer.last_failure();
    diag["error"] = "non_finite";
    diag["message"] = e.what();
    log << diag.dump() << '\n';
    throw;
  }
  save_checkpoint(ckpt, model, trainer.step(), &trainer.optimizer().moments());
  std::printf("trained %d steps, checkpoint %s\n", trainer.step(), ckpt.c_str());
  return kExitOk;
}

int cmd_eval(const Options& o) {
  RunConfig cfg = load_run_config(o.config);
  if (o.dataset.empty() || o.checkpoint.empty()) throw ConfigError("eval needs --dataset and --checkpoint");
  if (!o.alignment.empty()) cfg.eval.alignment = parse_alignment(o.alignment);
  if (o.frames) cfg.eval.frames = {*o.frames};
  DriveModel<float> model(cfg.model);
  const CheckpointInfo info = load_checkpoint(o.checkpoint, model);
  const Dataset ds = read_dataset(o.dataset);
  check_dataset(ds, cfg.model);
  const std::vector<SceneData> scenes = load_scenes(ds, "eval", DepthSource::kRender);
  const Predictor predictor = model_predictor(model);
  json reports = json::array();
  for (int k : cfg.eval.frames) {
    MetricsReport r = evaluate(predictor, pointers(scenes), k, cfg.eval.alignment);
    r.variant = to_string(cfg.model.variant);
    r.fingerprint = info.fingerprint;
    reports.push_back(r.to_json());
    std::printf("%s frames=%d auc30=%.4f auc15=%.4f abs_rel=%.4f delta3=%.4f total_ms=%.1f\n", r.variant.c_str(),
                r.frames, r.auc30, r.auc15, r.abs_rel, r.delta3, r.latency_ms.total);
  }
  make_dir(o.out);
  io::write_json(fs::path(o.out) / "metrics.json", reports.size() == 1 ? reports[0] : reports);
  if (!o.export_ply.empty()) {
    const SceneData& scene = scenes.front();
    const int n = std::min(cfg.eval.frames.front(), scene.num_frames());
    double scale = 0.0;
    const auto points = export_points(predictor, scene, 0, n, &scale);
    io::write_ply(o.export_ply, points);
    std::printf("wrote %zu points (scale %.4f) to %s\n", points.size(), scale, o.export_ply.c_str());
  }
  return kExitOk;
}

int cmd_bench(const Options& o) {
  RunConfig cfg = load_run_config(o.config);
  if (o.frames) cfg.bench.frames = {*o.frames};
  const auto rows = bench_attention(cfg.model, cfg.bench);
  make_dir(o.out);
  io::write_json(fs::path(o.out) / "bench.json", bench_to_json(rows));
  std::fputs(bench_table(rows).c_str(), stdout);
  return kExitOk;
}

// Expects <out>/<variant>/checkpoint.bin for all three variants.
int cmd_ablation(const Options& o) {
  RunConfig cfg = load_run_config(o.config);
  if (o.dataset.empty()) throw ConfigError("ablation needs --dataset");
  if (!o.alignment.empty()) cfg.eval.alignment = parse_alignment(o.alignment);
  const int frames = o.frames ? *o.frames : cfg.eval.frames.front();
  const Dataset ds = read_dataset(o.dataset);
  check_dataset(ds, cfg.model);
  const std::vector<SceneData> scenes = load_scenes(ds, "eval", DepthSource::kRender);
  std::map<Variant, fs::path> ckpts;
  for (Variant v : {Variant::kBaselineTva, Variant::kRelPoseEmbed, Variant::kFull}) {
    ckpts[v] = fs::path(o.out) / to_string(v) / "checkpoint.bin";
  }
  const auto reports = run_ablation(ckpts, pointers(scenes), frames, cfg.eval.alignment);
  json out = json::array();
  for (const auto& r : reports) {
    out.push_back(r.to_json());
    std::printf("%-15s auc30=%.4f auc15=%.4f abs_rel=%.4f delta3=%.4f\n", r.variant.c_str(), r.auc30, r.auc15,
                r.abs_rel, r.delta3);
  }
  io::write_json(fs::path(o.out) / "ablation.json", out);
  return kExitOk;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const FingerprintMismatch*>(&e)) return kExitCompat;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const MissingCheckpoint*>(&e)) return kExitIo;
  if (dynamic_cast<const NonFinite*>(&e) || dynamic_cast<const NoValidPixels*>(&e) ||
      dynamic_cast<const NoValidCameras*>(&e) || dynamic_cast<const InvalidQuaternion*>(&e) ||
      dynamic_cast<const DegenerateRig*>(&e)) {
    return kExitNumeric;
  }
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-camera visual geometry transformer toolkit"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&o](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--seed", o.seed, "Override the command's seed");
  };
  auto* gen = app.add_subcommand("generate", "Render a synthetic dataset");
  add_common(gen);
  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train);
  train->add_option("--dataset", o.dataset, "Dataset directory")->required();
  train->add_option("--resume", o.resume, "Checkpoint to resume from");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--dataset", o.dataset, "Dataset directory")->required();
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  eval->add_option("--frames", o.frames, "Frames per evaluation window");
  eval->add_option("--alignment", o.alignment, "least_squares | scale_head")
      ->check(CLI::IsMember({"least_squares", "scale_head"}));
  eval->add_option("--export-ply", o.export_ply, "Write the first evaluation window as a PLY cloud");
  auto* bench = app.add_subcommand("bench", "Time windowed and global attention");
  add_common(bench);
  bench->add_option("--frames", o.frames, "Single frame count instead of the configured set");
  auto* abl = app.add_subcommand("ablation", "Compare trained variants stored under --out/<variant>/");
  add_common(abl);
  abl->add_option("--dataset", o.dataset, "Dataset directory")->required();
  abl->add_option("--frames", o.frames, "Frames per evaluation window");
  abl->add_option("--alignment", o.alignment, "least_squares | scale_head")
      ->check(CLI::IsMember({"least_squares", "scale_head"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*bench) return cmd_bench(o);
    if (*abl) return cmd_ablation(o);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
  return kExitConfig;
}
