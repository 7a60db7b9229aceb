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

#ifndef MCAMVGGT_METRICS_HPP_
#define MCAMVGGT_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcamvggt/errors.hpp"
#include "mcamvggt/geometry.hpp"

namespace mcamvggt {

inline constexpr double kRadToDeg = 180.0 / M_PI;

inline double rotation_angle_deg(const Mat3& r) {
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * kRadToDeg;
}

inline double direction_angle_deg(const Vec3& a, const Vec3& b) {
  const double na = a.norm(), nb = b.norm();
  if (na < 1e-9 || nb < 1e-9) return 0.0;
  return std::acos(std::clamp(a.dot(b) / (na * nb), -1.0, 1.0)) * kRadToDeg;
}

// max(rotation error, translation-direction error) in degrees for every
// ordered pair (a, b), a != b, of relative poses G_a^-1 G_b.
inline std::vector<double> pair_errors(const std::vector<PoseSE3>& pred, const std::vector<PoseSE3>& gt) {
  if (pred.size() != gt.size()) throw LengthMismatch("pose lists differ in length");
  if (pred.size() < 2) throw LengthMismatch("pose AUC needs at least two poses");
  std::vector<double> errs;
  errs.reserve(pred.size() * (pred.size() - 1));
  for (std::size_t a = 0; a < pred.size(); ++a) {
    const PoseSE3 pa = pred[a].inverse(), ga = gt[a].inverse();
    for (std::size_t b = 0; b < pred.size(); ++b) {
      if (a == b) continue;
      const PoseSE3 rp = pa * pred[b];
      const PoseSE3 rg = ga * gt[b];
      const double rot = rotation_angle_deg(rp.rotation().transpose() * rg.rotation());
      const double trans = direction_angle_deg(rp.translation(), rg.translation());
      errs.push_back(std::max(rot, trans));
    }
  }
  return errs;
}

// Mean over integer thresholds 1..tau_max of the fraction of pairs whose
// error is below the threshold.
inline double auc_from_errors(const std::vector<double>& errs, int tau_max) {
  if (tau_max < 1) throw ConfigError("tau_max must be >= 1");
  if (errs.empty()) return 0.0;
  double acc = 0.0;
  for (int tau = 1; tau <= tau_max; ++tau) {
    const auto hits = std::count_if(errs.begin(), errs.end(), [tau](double e) { return e < tau; });
    acc += static_cast<double>(hits) / static_cast<double>(errs.size());
  }
  return acc / tau_max;
}

inline double pose_auc(const std::vector<PoseSE3>& pred, const std::vector<PoseSE3>& gt, int tau_max) {
  return auc_from_errors(pair_errors(pred, gt), tau_max);
}

struct DepthScores {
  double abs_rel = 0.0;
  double delta3 = 0.0;
  double scale = 1.0;  // alignment factor that was applied
  std::size_t pixels = 0;
};

inline constexpr double kDelta3 = 1.25 * 1.25 * 1.25;

// Least-squares scale s* = sum(p g) / sum(p p) over pixels valid in gt.
inline double least_squares_scale(const std::vector<const DepthMap*>& pred, const std::vector<const DepthMap*>& gt) {
  double num = 0.0, den = 0.0;
  for (std::size_t b = 0; b < gt.size(); ++b) {
    for (std::size_t k = 0; k < gt[b]->size(); ++k) {
      if (!gt[b]->valid[k]) continue;
      num += pred[b]->depth[k] * gt[b]->depth[k];
      den += pred[b]->depth[k] * pred[b]->depth[k];
    }
  }
  if (den <= 0.0) throw NoValidPixels("least-squares alignment has no usable pixels");
  return num / den;
}

// Pools every gt-valid pixel of every map. A non-positive `scale` requests
// least-squares alignment; otherwise the given scale is applied.
inline DepthScores depth_metrics(const std::vector<const DepthMap*>& pred, const std::vector<const DepthMap*>& gt,
                                 double scale) {
  if (pred.size() != gt.size()) throw LengthMismatch("depth map lists differ in length");
  for (std::size_t b = 0; b < gt.size(); ++b) {
    if (pred[b]->width != gt[b]->width || pred[b]->height != gt[b]->height) {
      throw ShapeError("predicted and ground-truth depth maps differ in shape");
    }
  }
  std::size_t n = 0;
  for (const auto* g : gt) n += g->valid_count();
  if (n == 0) throw NoValidPixels("ground truth has no valid pixels");
  DepthScores s;
  s.scale = scale > 0.0 ? scale : least_squares_scale(pred, gt);
  double rel = 0.0, hit = 0.0;
  for (std::size_t b = 0; b < gt.size(); ++b) {
    for (std::size_t k = 0; k < gt[b]->size(); ++k) {
      if (!gt[b]->valid[k]) continue;
      const double p = s.scale * pred[b]->depth[k];
      const double g = gt[b]->depth[k];
      rel += std::abs(p - g) / g;
      const double ratio = (p > 0.0) ? std::max(p / g, g / p) : std::numeric_limits<double>::infinity();
      hit += ratio < kDelta3 ? 1.0 : 0.0;
    }
  }
  s.abs_rel = rel / static_cast<double>(n);
  s.delta3 = hit / static_cast<double>(n);
  s.pixels = n;
  return s;
}

inline DepthScores depth_metrics(const DepthMap& pred, const DepthMap& gt, double scale) {
  return depth_metrics(std::vector<const DepthMap*>{&pred}, std::vector<const DepthMap*>{&gt}, scale);
}

struct LatencyMs {
  double tva = 0.0;
  double mca = 0.0;
  double heads = 0.0;
  double total = 0.0;
};

struct MetricsReport {
  std::string variant;
  int frames = 0;
  int cameras = 0;
  double auc30 = 0.0;
  double auc15 = 0.0;
  double abs_rel = 0.0;
  double delta3 = 0.0;
  LatencyMs latency_ms;
  std::string fingerprint;
  std::string alignment;

  nlohmann::json to_json() const {
    return {{"variant", variant},
            {"frames", frames},
            {"cameras", cameras},
            {"auc30", auc30},
            {"auc15", auc15},
            {"abs_rel", abs_rel},
            {"delta3", delta3},
            {"latency_ms", {{"tva", latency_ms.tva},
                            {"mca", latency_ms.mca},
                            {"heads", latency_ms.heads},
                            {"total", latency_ms.total}}},
            {"fingerprint", fingerprint},
            {"alignment", alignment}};
  }

  bool finite() const {
    for (double v : {auc30, auc15, abs_rel, delta3, latency_ms.tva, latency_ms.mca, latency_ms.heads,
                     latency_ms.total}) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

}  // namespace mcamvggt

#endif  // MCAMVGGT_METRICS_HPP_
