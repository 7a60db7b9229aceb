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

#ifndef MCAMVGGT_MODEL_CONFIG_HPP_
#define MCAMVGGT_MODEL_CONFIG_HPP_

#include <array>
#include <cstdint>
#include <string>

#include "mcamvggt/errors.hpp"

namespace mcamvggt {

// Which parts of the pipeline are active.
//  kBaselineTva:   per-camera attention only, heads read TVA tokens.
//  kRelPoseEmbed:  adds the relative pose token, no cross-camera attention.
//  kFull:          relative pose token + windowed multi-camera attention.
enum class Variant { kBaselineTva, kRelPoseEmbed, kFull };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBaselineTva:
      return "baseline_tva";
    case Variant::kRelPoseEmbed:
      return "rel_pose_embed";
    case Variant::kFull:
      return "full";
  }
  return "full";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "baseline_tva") return Variant::kBaselineTva;
  if (s == "rel_pose_embed") return Variant::kRelPoseEmbed;
  if (s == "full") return Variant::kFull;
  throw ConfigError("unknown model variant '" + s + "'");
}

struct ModelConfig {
  int image_width = 56;
  int image_height = 28;
  int patch_size = 14;
  int dim = 128;
  int layers = 8;
  int heads = 4;
  std::array<int, 4> selected_layers = {2, 4, 6, 8};  // 1-based, ascending
  int window = 3;
  int mlp_ratio = 2;
  int max_frames = 64;
  int head_channels = 16;
  Variant variant = Variant::kFull;
  std::uint64_t seed = 0;

  int grid_width() const { return image_width / patch_size; }
  int grid_height() const { return image_height / patch_size; }
  int patches() const { return grid_width() * grid_height(); }
  int patch_pixels() const { return patch_size * patch_size * 3; }
  // Tokens per image after the relative pose token is injected.
  int tokens_per_image() const { return variant == Variant::kBaselineTva ? 1 + patches() : 2 + patches(); }

  void validate() const {
    if (patch_size <= 0 || image_width <= 0 || image_height <= 0) {
      throw ConfigError("image and patch sizes must be positive");
    }
    if (image_width % patch_size != 0 || image_height % patch_size != 0) {
      throw ShapeError("image size must be divisible by patch_size");
    }
    if (dim <= 0 || heads <= 0 || dim % heads != 0) throw ConfigError("dim must be divisible by heads");
    if (layers < 1) throw ConfigError("layers must be >= 1");
    for (int i = 0; i < 4; ++i) {
      if (selected_layers[i] < 1 || selected_layers[i] > layers) {
        throw ConfigError("selected_layers must lie in [1, layers]");
      }
      if (i > 0 && selected_layers[i] <= selected_layers[i - 1]) {
        throw ConfigError("selected_layers must be strictly ascending");
      }
    }
    if (window < 1 || window % 2 == 0) throw ConfigError("window must be odd and >= 1");
    if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be >= 1");
    if (max_frames < 1) throw ConfigError("max_frames must be >= 1");
    if (head_channels < 2 || head_channels % 2 != 0) throw ConfigError("head_channels must be even and >= 2");
  }
};

}  // namespace mcamvggt

#endif  // MCAMVGGT_MODEL_CONFIG_HPP_
