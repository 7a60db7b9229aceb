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

#ifndef MCAMVGGT_HEADS_HPP_
#define MCAMVGGT_HEADS_HPP_

#include <string>
#include <vector>

#include "mcamvggt/autograd.hpp"
#include "mcamvggt/geometry.hpp"
#include "mcamvggt/mca.hpp"
#include "mcamvggt/model_config.hpp"
#include "mcamvggt/nn.hpp"

namespace mcamvggt {

// Token -> 10-D camera vector. A fixed +1 on the quaternion w slot makes a
// zero network output decode to the identity rotation.
template <typename T>
class PoseHead {
 public:
  PoseHead() = default;
  PoseHead(nn::ParameterStore<T>& store, const std::string& name, int dim) {
    norm_ = nn::LayerNorm<T>(store, name + ".norm", dim);
    mlp_ = nn::Mlp<T>(store, name + ".mlp", dim, dim, CameraVector10::kSize, 0.1);
    Matrix<T> bias = Matrix<T>::Zero(1, CameraVector10::kSize);
    bias(0, CameraVector10::kQuaternion) = T(1);
    quaternion_bias_ = Var<T>::constant(std::move(bias));
  }

  // tokens: E x d -> E x 10.
  Var<T> operator()(const Var<T>& tokens) const {
    return ag::add_row(mlp_(norm_(tokens)), quaternion_bias_);
  }

  const nn::Mlp<T>& mlp() const { return mlp_; }

 private:
  nn::LayerNorm<T> norm_;
  nn::Mlp<T> mlp_;
  Var<T> quaternion_bias_;
};

template <typename T>
struct DepthOutput {
  Var<T> depth;       // (B*H*W) x 1, softplus
  Var<T> confidence;  // (B*H*W) x 1, softplus + sigma_min
  int images = 0;
  int height = 0;
  int width = 0;
};

// Reduced DPT decoder. Each selected layer's patch tokens are reassembled into
// the patch grid and projected to a common width; the deepest layer seeds a
// coarse-to-fine chain of four (upsample x2, add, residual 3x3 conv) stages,
// after which the map is resized to the input resolution and read out as
// (depth, confidence).
template <typename T>
class DepthHead {
 public:
  static constexpr double kSigmaMin = 1e-3;

  DepthHead() = default;
  DepthHead(nn::ParameterStore<T>& store, const ModelConfig& cfg) : cfg_(cfg) {
    const int c = cfg.head_channels;
    for (int l = 0; l < 4; ++l) {
      proj_.emplace_back(store, "heads.depth.proj" + std::to_string(l), cfg.dim, c);
      mix_.emplace_back(store, "heads.depth.mix" + std::to_string(l), 9 * c, c, 0.5);
    }
    out_conv_ = nn::Linear<T>(store, "heads.depth.out_conv", 9 * c, c / 2);
    out_linear_ = nn::Linear<T>(store, "heads.depth.out", c / 2, 2, 0.1);
  }

  DepthOutput<T> operator()(const TokenGrid<T>& grid) const {
    if (grid.layers.size() != 4) throw ShapeError("depth head needs exactly 4 captured layers");
    const GridLayout& lay = grid.layout;
    const int images = lay.frames * lay.cameras;
    const int gh = cfg_.grid_height();
    const int gw = cfg_.grid_width();
    const int p = cfg_.patches();
    if (lay.patches() != p) throw ShapeError("token grid patch count differs from the model config");

    std::vector<Eigen::Index> rows;
    rows.reserve(static_cast<std::size_t>(images) * p);
    for (int i = 0; i < lay.frames; ++i) {
      for (int j = 0; j < lay.cameras; ++j) {
        for (int k = 0; k < p; ++k) rows.push_back(lay.image_row(i, j) + lay.patch_offset + k);
      }
    }
    std::vector<Var<T>> reassembled;
    for (int l = 0; l < 4; ++l) reassembled.push_back(proj_[l](ag::gather_rows(grid.layers[l], rows)));

    int h = gh;
    int w = gw;
    Var<T> x = residual_conv(reassembled[3], mix_[0], images, h, w);
    for (int s = 1; s < 4; ++s) {
      x = ag::resize_bilinear(x, images, h, w, 2 * h, 2 * w);
      h *= 2;
      w *= 2;
      x = ag::add(x, ag::resize_bilinear(reassembled[3 - s], images, gh, gw, h, w));
      x = residual_conv(x, mix_[s], images, h, w);
    }
    const int H = cfg_.image_height;
    const int W = cfg_.image_width;
    x = ag::resize_bilinear(x, images, h, w, H, W);
    const Var<T> feat = ag::gelu(out_conv_(ag::im2col3x3(x, images, H, W)));
    const Var<T> raw = out_linear_(feat);
    DepthOutput<T> out;
    out.depth = ag::softplus(ag::slice_cols(raw, 0, 1));
    out.confidence = ag::add_scalar(ag::softplus(ag::slice_cols(raw, 1, 1)), T(kSigmaMin));
    out.images = images;
    out.height = H;
    out.width = W;
    return out;
  }

 private:
  static Var<T> residual_conv(const Var<T>& x, const nn::Linear<T>& conv, int images, int h, int w) {
    return ag::add(x, conv(ag::im2col3x3(ag::gelu(x), images, h, w)));
  }

  ModelConfig cfg_;
  std::vector<nn::Linear<T>> proj_;
  std::vector<nn::Linear<T>> mix_;
  nn::Linear<T> out_conv_;
  nn::Linear<T> out_linear_;
};

inline CameraVector10 row_to_camera_vector(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  CameraVector10 v;
  for (int k = 0; k < CameraVector10::kSize; ++k) v.values[k] = row[k];
  return v;
}

template <typename T>
std::vector<CameraVector10> to_camera_vectors(const Matrix<T>& g) {
  std::vector<CameraVector10> out;
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    out.push_back(row_to_camera_vector(g.row(r).template cast<double>()));
  }
  return out;
}

// Global pose of camera j at frame i: G_seq(i) * G_rel(j).
inline PoseSE3 compose_global(const PoseSE3& seq, const PoseSE3& rel) { return compose_pose(seq, rel); }

// Frame-major global poses for N sequential and M relative predictions.
inline std::vector<PoseSE3> compose_global_all(const std::vector<PoseSE3>& seq,
                                               const std::vector<PoseSE3>& rel) {
  std::vector<PoseSE3> out;
  out.reserve(seq.size() * rel.size());
  for (const auto& s : seq) {
    for (const auto& r : rel) out.push_back(compose_global(s, r));
  }
  return out;
}

// Metric scale from predicted normalized rig translations. The calibrated
// translations are taken relative to the rig's normalization origin, i.e. in
// the same frame the normalized targets live in.
inline double scale_head(const std::vector<Vec3>& predicted_rel_translations, const CameraRig& rig) {
  const RigNormalization norm = compute_rig_normalization(rig);
  std::vector<Vec3> real;
  real.reserve(rig.size());
  for (const auto& c : rig.cameras) real.push_back(c.extrinsic.translation() - norm.origin());
  return estimate_scale(real, predicted_rel_translations);
}

}  // namespace mcamvggt

#endif  // MCAMVGGT_HEADS_HPP_
