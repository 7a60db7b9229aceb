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

#ifndef MCAMVGGT_TVA_HPP_
#define MCAMVGGT_TVA_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "mcamvggt/autograd.hpp"
#include "mcamvggt/model_config.hpp"
#include "mcamvggt/nn.hpp"

namespace mcamvggt {

using ag::Matrix;
using ag::Var;

// Rows of `image` ((H*W) x 3, row-major pixels) regrouped as one row per
// patch: P x (p*p*3), patches row-major over the grid, pixels row-major inside.
template <typename T>
Var<T> patch_pixels(const Var<T>& image, int height, int width, int patch) {
  if (height % patch != 0 || width % patch != 0) {
    throw ShapeError("image size is not divisible by the patch size");
  }
  if (image.rows() != static_cast<Eigen::Index>(height) * width || image.cols() != 3) {
    throw ShapeError("image must be (H*W) x 3");
  }
  const int gh = height / patch;
  const int gw = width / patch;
  const Eigen::Index cols = static_cast<Eigen::Index>(patch) * patch * 3;
  std::vector<Eigen::Index> index;
  index.reserve(static_cast<std::size_t>(gh) * gw * cols);
  for (int py = 0; py < gh; ++py) {
    for (int px = 0; px < gw; ++px) {
      for (int y = 0; y < patch; ++y) {
        for (int x = 0; x < patch; ++x) {
          const Eigen::Index pixel = static_cast<Eigen::Index>(py * patch + y) * width + px * patch + x;
          for (int c = 0; c < 3; ++c) index.push_back(pixel * 3 + c);
        }
      }
    }
  }
  return ag::gather_elements(image, std::move(index), static_cast<Eigen::Index>(gh) * gw, cols);
}

// Captured token sequences of one camera: one (N*(1+P)) x d matrix per
// selected layer. Frame i occupies rows [i*(1+P), (i+1)*(1+P)); row 0 of each
// frame is its sequential pose token.
template <typename T>
struct CameraTokens {
  std::vector<Var<T>> layers;
};

// Patch embedding plus the per-camera temporal transformer. One set of
// weights serves every camera.
template <typename T>
class TvaBackbone {
 public:
  TvaBackbone() = default;
  TvaBackbone(nn::ParameterStore<T>& store, const ModelConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    patch_embed_ = nn::Linear<T>(store, "tva.patch_embed", cfg.patch_pixels(), cfg.dim);
    patch_pos_ = store.normal("tva.patch_pos", cfg.patches(), cfg.dim, 0.1);
    seq_token_ = store.normal("tva.seq_token", 1, cfg.dim, 0.1);
    temporal_ = store.normal("tva.temporal", cfg.max_frames, cfg.dim, 0.1);
    const double residual_gain = 1.0 / std::sqrt(2.0 * cfg.layers);
    for (int l = 0; l < cfg.layers; ++l) {
      blocks_.emplace_back(store, "tva.block" + std::to_string(l), cfg.dim, cfg.heads,
                           cfg.dim * cfg.mlp_ratio, residual_gain);
    }
  }

  // Linear patch projection, no positional encoding: P x d.
  Var<T> patchify(const Var<T>& image) const {
    return patch_embed_(patch_pixels(image, cfg_.image_height, cfg_.image_width, cfg_.patch_size));
  }

  // [seq token; patches + pos] for every frame, each frame shifted by its
  // temporal embedding row.
  Var<T> embed_video(const std::vector<Var<T>>& frames) const {
    if (static_cast<int>(frames.size()) > cfg_.max_frames) {
      throw ShapeError("video longer than max_frames");
    }
    std::vector<Var<T>> parts;
    parts.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const Var<T> patches = ag::add(patchify(frames[i]), patch_pos_);
      const Var<T> tokens = ag::concat_rows<T>({seq_token_, patches});
      parts.push_back(ag::add_row(tokens, ag::slice_rows(temporal_, static_cast<Eigen::Index>(i), 1)));
    }
    return ag::concat_rows(parts);
  }

  // Runs one camera's video through all blocks; `frames` holds that camera's
  // images in time order.
  CameraTokens<T> run_camera(const std::vector<Var<T>>& frames) const {
    CameraTokens<T> out;
    Var<T> x = embed_video(frames);
    std::size_t next = 0;
    for (int l = 0; l < cfg_.layers; ++l) {
      x = blocks_[l](x);
      if (next < 4 && cfg_.selected_layers[next] == l + 1) {
        out.layers.push_back(x);
        ++next;
      }
    }
    return out;
  }

  // images[j][i]: camera j, frame i. Cameras never exchange information here.
  std::vector<CameraTokens<T>> run(const std::vector<std::vector<Var<T>>>& images) const {
    std::vector<CameraTokens<T>> out;
    out.reserve(images.size());
    for (const auto& video : images) out.push_back(run_camera(video));
    return out;
  }

  const ModelConfig& config() const { return cfg_; }
  const nn::Linear<T>& patch_embed() const { return patch_embed_; }

 private:
  ModelConfig cfg_;
  nn::Linear<T> patch_embed_;
  Var<T> patch_pos_;
  Var<T> seq_token_;
  Var<T> temporal_;
  std::vector<nn::Block<T>> blocks_;
};

}  // namespace mcamvggt

#endif  // MCAMVGGT_TVA_HPP_
