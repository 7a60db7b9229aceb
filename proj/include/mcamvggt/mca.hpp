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

#ifndef MCAMVGGT_MCA_HPP_
#define MCAMVGGT_MCA_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mcamvggt/autograd.hpp"
#include "mcamvggt/geometry.hpp"
#include "mcamvggt/model_config.hpp"
#include "mcamvggt/nn.hpp"
#include "mcamvggt/tva.hpp"

namespace mcamvggt {

// Row layout of a multi-camera token grid: frame-major, then camera, then
// token within the image.
struct GridLayout {
  int frames = 0;
  int cameras = 0;
  int tokens_per_image = 0;
  int rel_offset = -1;  // -1 when no relative pose token is present
  int seq_offset = 0;
  int patch_offset = 1;

  Eigen::Index image_row(int frame, int camera) const {
    return (static_cast<Eigen::Index>(frame) * cameras + camera) * tokens_per_image;
  }
  Eigen::Index frame_rows() const { return static_cast<Eigen::Index>(cameras) * tokens_per_image; }
  Eigen::Index total_rows() const { return frame_rows() * frames; }
  int patches() const { return tokens_per_image - patch_offset; }
};

// One matrix per selected layer, all sharing `layout`.
template <typename T>
struct TokenGrid {
  GridLayout layout;
  std::vector<Var<T>> layers;
};

// Per-center participant frames: clamp(i - r .. i + r), r = (w - 1) / 2.
struct WindowPlan {
  int frames = 0;
  int window = 1;
  std::vector<std::vector<int>> participants;

  static WindowPlan make(int frames, int window) {
    if (frames < 1) throw ShapeError("window plan needs at least one frame");
    if (window < 1 || window % 2 == 0) throw ConfigError("window must be odd and >= 1");
    WindowPlan plan;
    plan.frames = frames;
    plan.window = window;
    const int r = (window - 1) / 2;
    for (int i = 0; i < frames; ++i) {
      std::vector<int> p;
      for (int f = std::max(0, i - r); f <= std::min(frames - 1, i + r); ++f) p.push_back(f);
      plan.participants.push_back(std::move(p));
    }
    return plan;
  }

  // Token pairs scored by the full attention of every center pass.
  long long token_pairs(int tokens_per_frame) const {
    long long total = 0;
    for (const auto& p : participants) {
      const long long n = static_cast<long long>(p.size()) * tokens_per_frame;
      total += n * n;
    }
    return total;
  }
};

struct AttentionStats {
  long long passes = 0;
  long long token_pairs = 0;
};

// Layout conversion for the TVA-only variant: (1 + P) tokens per image.
template <typename T>
TokenGrid<T> grid_from_tva(const std::vector<CameraTokens<T>>& cams, int frames, int patches) {
  TokenGrid<T> grid;
  grid.layout = {frames, static_cast<int>(cams.size()), 1 + patches, -1, 0, 1};
  const int per = 1 + patches;
  for (std::size_t l = 0; l < cams.front().layers.size(); ++l) {
    std::vector<Var<T>> parts;
    for (int i = 0; i < frames; ++i) {
      for (const auto& cam : cams) parts.push_back(ag::slice_rows(cam.layers[l], i * per, per));
    }
    grid.layers.push_back(ag::concat_rows(parts));
  }
  return grid;
}

// Token initialization: every image becomes [rel(j); seq(i,j); patches(i,j)].
// rel_tokens is M x d; the same row is attached to every frame of camera j.
template <typename T>
TokenGrid<T> init_tokens(const std::vector<CameraTokens<T>>& cams, const Var<T>& rel_tokens,
                         int frames, int patches) {
  const int cameras = static_cast<int>(cams.size());
  if (rel_tokens.rows() != cameras) throw ShapeError("one relative pose token per camera is required");
  TokenGrid<T> grid;
  grid.layout = {frames, cameras, 2 + patches, 0, 1, 2};
  std::vector<Var<T>> rel_rows;
  for (int j = 0; j < cameras; ++j) rel_rows.push_back(ag::slice_rows(rel_tokens, j, 1));
  const int per = 1 + patches;
  for (std::size_t l = 0; l < cams.front().layers.size(); ++l) {
    std::vector<Var<T>> parts;
    for (int i = 0; i < frames; ++i) {
      for (int j = 0; j < cameras; ++j) {
        parts.push_back(rel_rows[j]);
        parts.push_back(ag::slice_rows(cams[j].layers[l], i * per, per));
      }
    }
    grid.layers.push_back(ag::concat_rows(parts));
  }
  return grid;
}

// One block over each window; only the center frame's outputs are kept.
// Every pass reads `tokens` as given, so passes are order independent.
template <typename T>
Var<T> window_attention(const Var<T>& tokens, const GridLayout& layout, const WindowPlan& plan,
                        const nn::Block<T>& block, AttentionStats* stats = nullptr) {
  if (tokens.rows() != layout.total_rows()) throw ShapeError("token grid does not match its layout");
  if (plan.frames != layout.frames) throw ShapeError("window plan frame count differs from grid");
  const Eigen::Index per_frame = layout.frame_rows();
  std::vector<Var<T>> centers;
  centers.reserve(layout.frames);
  for (int i = 0; i < layout.frames; ++i) {
    const auto& part = plan.participants[i];
    const int first = part.front();
    const Eigen::Index count = static_cast<Eigen::Index>(part.size()) * per_frame;
    const Var<T> window = ag::slice_rows(tokens, first * per_frame, count);
    const Var<T> updated = block(window);
    centers.push_back(ag::slice_rows(updated, (i - first) * per_frame, per_frame));
    if (stats != nullptr) {
      ++stats->passes;
      stats->token_pairs += static_cast<long long>(count) * count;
    }
  }
  return ag::concat_rows(centers);
}

// Reference routing: a single block over every token of every frame.
template <typename T>
Var<T> global_attention(const Var<T>& tokens, const nn::Block<T>& block,
                        AttentionStats* stats = nullptr) {
  if (stats != nullptr) {
    ++stats->passes;
    stats->token_pairs += static_cast<long long>(tokens.rows()) * tokens.rows();
  }
  return block(tokens);
}

template <typename T>
struct PoseTokens {
  Var<T> seq_agg;  // N x d, mean over cameras
  Var<T> rel_agg;  // M x d, mean over frames
};

// Without a relative pose token (TVA-only), the per-camera aggregate falls
// back to the camera's sequential pose tokens.
template <typename T>
PoseTokens<T> aggregate_pose_tokens(const Var<T>& tokens, const GridLayout& layout) {
  std::vector<std::vector<Eigen::Index>> seq_groups(layout.frames);
  std::vector<std::vector<Eigen::Index>> rel_groups(layout.cameras);
  const int rel = layout.rel_offset >= 0 ? layout.rel_offset : layout.seq_offset;
  for (int i = 0; i < layout.frames; ++i) {
    for (int j = 0; j < layout.cameras; ++j) {
      seq_groups[i].push_back(layout.image_row(i, j) + layout.seq_offset);
      rel_groups[j].push_back(layout.image_row(i, j) + rel);
    }
  }
  return {ag::gather_mean_rows(tokens, std::move(seq_groups)),
          ag::gather_mean_rows(tokens, std::move(rel_groups))};
}

// 10 -> d -> d MLP over camera vectors.
template <typename T>
class RelPoseEmbed {
 public:
  RelPoseEmbed() = default;
  RelPoseEmbed(nn::ParameterStore<T>& store, int dim)
      : mlp_(store, "rel_embed", CameraVector10::kSize, dim, dim) {}

  // camera_vectors: M x 10.
  Var<T> operator()(const Var<T>& camera_vectors) const {
    if (camera_vectors.cols() != CameraVector10::kSize) throw ShapeError("camera vectors must be M x 10");
    return mlp_(camera_vectors);
  }

  const nn::Mlp<T>& mlp() const { return mlp_; }

 private:
  nn::Mlp<T> mlp_;
};

// Dedicated block per selected layer.
template <typename T>
class McaStage {
 public:
  McaStage() = default;
  McaStage(nn::ParameterStore<T>& store, const ModelConfig& cfg) : window_(cfg.window) {
    const double residual_gain = 1.0 / std::sqrt(2.0 * 4);
    for (int l = 0; l < 4; ++l) {
      blocks_.emplace_back(store, "mca.block" + std::to_string(l), cfg.dim, cfg.heads,
                           cfg.dim * cfg.mlp_ratio, residual_gain);
    }
  }

  TokenGrid<T> run(const TokenGrid<T>& grid, AttentionStats* stats = nullptr,
                   bool global = false) const {
    TokenGrid<T> out;
    out.layout = grid.layout;
    const WindowPlan plan = WindowPlan::make(grid.layout.frames, window_);
    for (std::size_t l = 0; l < grid.layers.size(); ++l) {
      out.layers.push_back(global ? global_attention(grid.layers[l], blocks_[l], stats)
                                  : window_attention(grid.layers[l], grid.layout, plan, blocks_[l], stats));
    }
    return out;
  }

  const nn::Block<T>& block(int l) const { return blocks_[l]; }
  int window() const { return window_; }
  void set_window(int w) { window_ = w; }

 private:
  int window_ = 3;
  std::vector<nn::Block<T>> blocks_;
};

}  // namespace mcamvggt

#endif  // MCAMVGGT_MCA_HPP_
