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

#ifndef MCAMVGGT_LOSSES_HPP_
#define MCAMVGGT_LOSSES_HPP_

#include <cmath>
#include <vector>

#include "mcamvggt/autograd.hpp"
#include "mcamvggt/errors.hpp"
#include "mcamvggt/geometry.hpp"

namespace mcamvggt {

struct LossWeights {
  double depth = 0.1;  // lambda_1
  double rel = 1.0;    // lambda_2
  double seq = 1.0;    // lambda_3
  double alpha = 0.5;  // uncertainty coefficient
  double huber_delta = 0.1;

  void validate() const {
    if (!(depth > 0 && rel > 0 && seq > 0 && alpha > 0 && huber_delta > 0)) {
      throw ConfigError("loss weights must all be positive");
    }
  }
};

template <typename T>
inline T huber(T e, T delta) {
  const T a = std::abs(e);
  return a <= delta ? T(0.5) * e * e : delta * (a - T(0.5) * delta);
}

template <typename T>
inline T huber_derivative(T e, T delta) {
  if (std::abs(e) <= delta) return e;
  return e > T(0) ? delta : -delta;
}

// Sum over entities and components of Huber(pred - gt).
template <typename T>
ag::Var<T> pose_loss(const ag::Var<T>& pred, const ag::Matrix<T>& gt, T delta) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw LengthMismatch("pose_loss: prediction and target shapes differ");
  }
  ag::Matrix<T> out(1, 1);
  T total = T(0);
  for (Eigen::Index i = 0; i < gt.size(); ++i) total += huber(pred.value().data()[i] - gt.data()[i], delta);
  out(0, 0) = total;
  ag::Node<T>* pn = pred.get();
  return ag::make_op<T>(std::move(out), {&pred}, [pn, gt, delta](ag::Node<T>& self) {
    pn->ensure_grad();
    const T g = self.grad(0, 0);
    for (Eigen::Index i = 0; i < gt.size(); ++i) {
      pn->grad.data()[i] += g * huber_derivative(pn->value.data()[i] - gt.data()[i], delta);
    }
  });
}

// Confidence-weighted depth loss summed over images, each image averaged
// over its valid ground-truth pixels:
//   c |d_hat - d| + c (|dx_hat - dx| + |dy_hat - dy|) - alpha log c
// with forward differences taken only between two valid pixels.
// depth and confidence are (B*H*W) x 1 in image-major, row-major order.
template <typename T>
ag::Var<T> depth_loss(const ag::Var<T>& depth, const ag::Var<T>& confidence,
                      const std::vector<DepthMap>& gt, T alpha) {
  if (gt.empty()) throw NoValidPixels("depth_loss: no ground-truth maps");
  const int w = gt.front().width;
  const int h = gt.front().height;
  const Eigen::Index hw = static_cast<Eigen::Index>(w) * h;
  if (depth.rows() != hw * static_cast<Eigen::Index>(gt.size()) || depth.cols() != 1 ||
      confidence.rows() != depth.rows() || confidence.cols() != 1) {
    throw ShapeError("depth_loss: prediction shape does not match ground truth");
  }
  std::vector<T> inv_count(gt.size(), T(0));
  bool any = false;
  for (std::size_t b = 0; b < gt.size(); ++b) {
    if (gt[b].width != w || gt[b].height != h) throw ShapeError("depth_loss: ground-truth sizes differ");
    const std::size_t n = gt[b].valid_count();
    if (n > 0) {
      inv_count[b] = T(1) / T(n);
      any = true;
    }
  }
  if (!any) throw NoValidPixels("depth_loss: every ground-truth mask is empty");

  const auto& d = depth.value();
  const auto& c = confidence.value();
  T total = T(0);
  for (std::size_t b = 0; b < gt.size(); ++b) {
    if (inv_count[b] == T(0)) continue;
    const Eigen::Index base = static_cast<Eigen::Index>(b) * hw;
    const DepthMap& g = gt[b];
    T acc = T(0);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const std::size_t p = g.index(u, v);
        if (!g.valid[p]) continue;
        const T dp = d(base + p, 0);
        const T cp = c(base + p, 0);
        T term = std::abs(dp - T(g.depth[p]));
        if (u + 1 < w && g.valid[p + 1]) {
          term += std::abs((d(base + p + 1, 0) - dp) - T(g.depth[p + 1] - g.depth[p]));
        }
        if (v + 1 < h && g.valid[p + w]) {
          term += std::abs((d(base + p + w, 0) - dp) - T(g.depth[p + w] - g.depth[p]));
        }
        acc += cp * term - alpha * std::log(cp);
      }
    }
    total += acc * inv_count[b];
  }
  ag::Matrix<T> out(1, 1);
  out(0, 0) = total;
  ag::Node<T>* dn = depth.get();
  ag::Node<T>* cn = confidence.get();
  auto sign = [](T x) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); };
  return ag::make_op<T>(std::move(out), {&depth, &confidence},
                        [dn, cn, gt, inv_count, alpha, w, h, hw, sign](ag::Node<T>& self) {
    const T g0 = self.grad(0, 0);
    if (dn->requires_grad) dn->ensure_grad();
    if (cn->requires_grad) cn->ensure_grad();
    const auto& d = dn->value;
    const auto& c = cn->value;
    for (std::size_t b = 0; b < gt.size(); ++b) {
      if (inv_count[b] == T(0)) continue;
      const Eigen::Index base = static_cast<Eigen::Index>(b) * hw;
      const DepthMap& g = gt[b];
      const T wgt = g0 * inv_count[b];
      for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
          const std::size_t p = g.index(u, v);
          if (!g.valid[p]) continue;
          const T dp = d(base + p, 0);
          const T cp = c(base + p, 0);
          const T e0 = dp - T(g.depth[p]);
          T term = std::abs(e0);
          T dd_p = cp * sign(e0);
          if (u + 1 < w && g.valid[p + 1]) {
            const T e = (d(base + p + 1, 0) - dp) - T(g.depth[p + 1] - g.depth[p]);
            term += std::abs(e);
            if (dn->requires_grad) dn->grad(base + p + 1, 0) += wgt * cp * sign(e);
            dd_p -= cp * sign(e);
          }
          if (v + 1 < h && g.valid[p + w]) {
            const T e = (d(base + p + w, 0) - dp) - T(g.depth[p + w] - g.depth[p]);
            term += std::abs(e);
            if (dn->requires_grad) dn->grad(base + p + w, 0) += wgt * cp * sign(e);
            dd_p -= cp * sign(e);
          }
          if (dn->requires_grad) dn->grad(base + p, 0) += wgt * dd_p;
          if (cn->requires_grad) cn->grad(base + p, 0) += wgt * (term - alpha / cp);
        }
      }
    }
  });
}

template <typename T>
ag::Var<T> total_loss(const ag::Var<T>& depth_l, const ag::Var<T>& rel_l, const ag::Var<T>& seq_l,
                      const LossWeights& weights) {
  for (const auto* v : {&depth_l, &rel_l, &seq_l}) {
    if (!std::isfinite(static_cast<double>(v->item()))) throw NonFinite("loss term is not finite");
  }
  return ag::add_scalars<T>({ag::scale(depth_l, T(weights.depth)), ag::scale(rel_l, T(weights.rel)),
                             ag::scale(seq_l, T(weights.seq))});
}

}  // namespace mcamvggt

#endif  // MCAMVGGT_LOSSES_HPP_
