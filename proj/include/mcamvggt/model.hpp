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

#ifndef MCAMVGGT_MODEL_HPP_
#define MCAMVGGT_MODEL_HPP_

#include <chrono>
#include <vector>

#include "mcamvggt/autograd.hpp"
#include "mcamvggt/heads.hpp"
#include "mcamvggt/mca.hpp"
#include "mcamvggt/model_config.hpp"
#include "mcamvggt/nn.hpp"
#include "mcamvggt/tva.hpp"

namespace mcamvggt {

template <typename T>
struct ModelInput {
  int frames = 0;
  int cameras = 0;
  std::vector<Var<T>> images;  // index frame * cameras + camera, each (H*W) x 3
  Matrix<T> camera_vectors;    // cameras x 10, normalized rig encoding

  const Var<T>& image(int frame, int camera) const {
    return images[static_cast<std::size_t>(frame) * cameras + camera];
  }
};

struct StageTimes {
  double tva_ms = 0.0;
  double mca_ms = 0.0;
  double heads_ms = 0.0;
  double total_ms = 0.0;
};

template <typename T>
struct ModelOutput {
  Var<T> seq;  // frames x 10
  Var<T> rel;  // cameras x 10
  DepthOutput<T> depth;
  std::vector<CameraTokens<T>> tva;
  TokenGrid<T> tokens;  // what the heads read
  AttentionStats attention;
  StageTimes times;
};

template <typename T>
class DriveModel {
 public:
  explicit DriveModel(const ModelConfig& cfg) : cfg_(cfg), store_(cfg.seed) {
    cfg.validate();
    tva_ = TvaBackbone<T>(store_, cfg);
    seq_head_ = PoseHead<T>(store_, "heads.seq", cfg.dim);
    rel_head_ = PoseHead<T>(store_, "heads.rel", cfg.dim);
    depth_head_ = DepthHead<T>(store_, cfg);
    if (cfg.variant != Variant::kBaselineTva) rel_embed_ = RelPoseEmbed<T>(store_, cfg.dim);
    if (cfg.variant == Variant::kFull) mca_ = McaStage<T>(store_, cfg);
  }

  // global_mca swaps the windowed routing for one attention over all frames.
  ModelOutput<T> forward(const ModelInput<T>& in, bool global_mca = false) const {
    using Clock = std::chrono::steady_clock;
    auto ms = [](Clock::time_point a, Clock::time_point b) {
      return std::chrono::duration<double, std::milli>(b - a).count();
    };
    validate_input(in);
    ModelOutput<T> out;
    const auto t0 = Clock::now();
    std::vector<std::vector<Var<T>>> videos(in.cameras);
    for (int j = 0; j < in.cameras; ++j) {
      for (int i = 0; i < in.frames; ++i) videos[j].push_back(in.image(i, j));
    }
    out.tva = tva_.run(videos);
    const auto t1 = Clock::now();
    if (cfg_.variant == Variant::kBaselineTva) {
      out.tokens = grid_from_tva(out.tva, in.frames, cfg_.patches());
    } else {
      const Var<T> rel_tokens = rel_embed_(Var<T>::constant(in.camera_vectors));
      out.tokens = init_tokens(out.tva, rel_tokens, in.frames, cfg_.patches());
      if (cfg_.variant == Variant::kFull) out.tokens = mca_.run(out.tokens, &out.attention, global_mca);
    }
    const auto t2 = Clock::now();
    const PoseTokens<T> pose = aggregate_pose_tokens(out.tokens.layers.back(), out.tokens.layout);
    out.seq = seq_head_(pose.seq_agg);
    out.rel = rel_head_(pose.rel_agg);
    out.depth = depth_head_(out.tokens);
    const auto t3 = Clock::now();
    out.times = {ms(t0, t1), ms(t1, t2), ms(t2, t3), ms(t0, t3)};
    return out;
  }

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore<T>& parameters() { return store_; }
  const nn::ParameterStore<T>& parameters() const { return store_; }
  const TvaBackbone<T>& tva() const { return tva_; }
  const McaStage<T>& mca() const { return mca_; }
  McaStage<T>& mca() { return mca_; }
  const RelPoseEmbed<T>& rel_embed() const { return rel_embed_; }
  const PoseHead<T>& seq_head() const { return seq_head_; }
  const PoseHead<T>& rel_head() const { return rel_head_; }
  const DepthHead<T>& depth_head() const { return depth_head_; }

  // Copies values parameter by parameter (names and shapes must match).
  template <typename U>
  void copy_parameters_from(const DriveModel<U>& other) {
    for (auto& [name, p] : store_.all()) {
      const auto src = other.parameters().get(name);
      if (src.rows() != p.rows() || src.cols() != p.cols()) {
        throw ShapeError("parameter '" + name + "' shape differs");
      }
      p.mutable_value() = src.value().template cast<T>();
    }
  }

 private:
  void validate_input(const ModelInput<T>& in) const {
    if (in.frames < 1 || in.cameras < 1) throw ShapeError("model input needs >= 1 frame and camera");
    if (static_cast<int>(in.images.size()) != in.frames * in.cameras) {
      throw ShapeError("model input image count is not frames * cameras");
    }
    if (in.frames > cfg_.max_frames) throw ShapeError("more frames than max_frames");
    if (cfg_.variant != Variant::kBaselineTva &&
        (in.camera_vectors.rows() != in.cameras || in.camera_vectors.cols() != CameraVector10::kSize)) {
      throw ShapeError("camera vectors must be cameras x 10");
    }
  }

  ModelConfig cfg_;
  nn::ParameterStore<T> store_;
  TvaBackbone<T> tva_;
  PoseHead<T> seq_head_;
  PoseHead<T> rel_head_;
  DepthHead<T> depth_head_;
  RelPoseEmbed<T> rel_embed_;
  McaStage<T> mca_;
};

}  // namespace mcamvggt

#endif  // MCAMVGGT_MODEL_HPP_
