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

#ifndef MCAMVGGT_EVALUATION_HPP_
#define MCAMVGGT_EVALUATION_HPP_

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mcamvggt/checkpoint.hpp"
#include "mcamvggt/config.hpp"
#include "mcamvggt/heads.hpp"
#include "mcamvggt/metrics.hpp"
#include "mcamvggt/model.hpp"
#include "mcamvggt/pipeline.hpp"

namespace mcamvggt {

// Decoded predictions for one window, in the normalized frame of its first
// frame. Depth is in normalized units.
struct WindowPrediction {
  std::vector<PoseSE3> seq;
  std::vector<PoseSE3> rel;
  std::vector<DepthMap> depth;  // frame-major
  StageTimes times;

  std::vector<Vec3> rel_translations() const {
    std::vector<Vec3> t;
    for (const auto& r : rel) t.push_back(r.translation());
    return t;
  }
};

using Predictor = std::function<WindowPrediction(const SceneData&, int start, int count)>;

template <typename T>
Predictor model_predictor(const DriveModel<T>& model) {
  return [&model](const SceneData& scene, int start, int count) {
    ag::NoGradGuard guard;
    const ModelOutput<T> out = model.forward(make_input<T>(scene, start, count));
    WindowPrediction p;
    for (const auto& v : to_camera_vectors<T>(out.seq.value())) p.seq.push_back(decode_pose_slots(v));
    for (const auto& v : to_camera_vectors<T>(out.rel.value())) p.rel.push_back(decode_pose_slots(v));
    const int hw = out.depth.height * out.depth.width;
    for (int b = 0; b < out.depth.images; ++b) {
      DepthMap d(out.depth.width, out.depth.height);
      for (int k = 0; k < hw; ++k) {
        d.depth[k] = static_cast<double>(out.depth.depth.value()(b * hw + k, 0));
        d.valid[k] = 1;
      }
      p.depth.push_back(std::move(d));
    }
    p.times = out.times;
    return p;
  };
}

// Replays ground truth through the decode path: a perfect model.
inline Predictor oracle_predictor() {
  return [](const SceneData& scene, int start, int count) {
    const WindowTargets t = make_targets(scene, start, count);
    WindowPrediction p;
    for (Eigen::Index i = 0; i < t.seq_g.rows(); ++i) p.seq.push_back(decode_pose_slots(row_to_camera_vector(t.seq_g.row(i))));
    for (Eigen::Index j = 0; j < t.rel_g.rows(); ++j) p.rel.push_back(decode_pose_slots(row_to_camera_vector(t.rel_g.row(j))));
    p.depth = t.depth;
    return p;
  };
}

struct WindowEvaluation {
  std::vector<double> pair_errors;
  DepthScores depth;
  double scale = 0.0;  // scale head estimate, metres per normalized unit
  StageTimes times;
};

inline WindowEvaluation evaluate_window(const Predictor& predictor, const SceneData& scene, int start, int count,
                                        Alignment alignment) {
  const WindowTargets t = make_targets(scene, start, count);
  const WindowPrediction p = predictor(scene, start, count);
  WindowEvaluation e;
  e.pair_errors = pair_errors(compose_global_all(p.seq, p.rel), t.global);
  e.scale = scale_head(p.rel_translations(), scene.spec.rig);
  std::vector<const DepthMap*> pred, gt;
  for (std::size_t k = 0; k < t.depth_metric.size(); ++k) {
    if (t.depth_metric[k].valid_count() == 0) continue;
    pred.push_back(&p.depth[k]);
    gt.push_back(&t.depth_metric[k]);
  }
  e.depth = depth_metrics(pred, gt, alignment == Alignment::kScaleHead ? e.scale : 0.0);
  e.times = p.times;
  return e;
}

// Evaluates the first `frames` frames of every scene. Pose AUC pools all
// image pairs; depth scores and latency are averaged over scenes.
inline MetricsReport evaluate(const Predictor& predictor, const std::vector<const SceneData*>& scenes, int frames,
                              Alignment alignment) {
  if (scenes.empty()) throw EmptyScene("no evaluation scenes");
  MetricsReport r;
  r.frames = frames;
  r.cameras = static_cast<int>(scenes.front()->spec.rig.size());
  r.alignment = to_string(alignment);
  std::vector<double> errs;
  for (const auto* scene : scenes) {
    const int n = std::min(frames, scene->num_frames());
    const WindowEvaluation e = evaluate_window(predictor, *scene, 0, n, alignment);
    errs.insert(errs.end(), e.pair_errors.begin(), e.pair_errors.end());
    r.abs_rel += e.depth.abs_rel / scenes.size();
    r.delta3 += e.depth.delta3 / scenes.size();
    r.latency_ms.tva += e.times.tva_ms / scenes.size();
    r.latency_ms.mca += e.times.mca_ms / scenes.size();
    r.latency_ms.heads += e.times.heads_ms / scenes.size();
    r.latency_ms.total += e.times.total_ms / scenes.size();
  }
  r.auc30 = auc_from_errors(errs, 30);
  r.auc15 = auc_from_errors(errs, 15);
  if (!r.finite()) throw NonFinite("evaluation produced a non-finite metric");
  return r;
}

// Metric-scale point cloud of one window in the normalized frame of its
// first frame: depth_to_points with poses from compose_global and the scale
// head applied to depth and translation alike.
inline std::vector<Vec3> export_points(const Predictor& predictor, const SceneData& scene, int start, int count,
                                       double* scale_out = nullptr) {
  const WindowPrediction p = predictor(scene, start, count);
  const double s = scale_head(p.rel_translations(), scene.spec.rig);
  if (scale_out != nullptr) *scale_out = s;
  const std::vector<PoseSE3> global = compose_global_all(p.seq, p.rel);
  const int m = static_cast<int>(scene.spec.rig.size());
  std::vector<Vec3> points;
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < m; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * m + j;
      // Restrict to pixels that hit geometry so sky does not smear the cloud.
      DepthMap d = p.depth[k];
      d.valid = scene.supervision[start + i][j].valid;
      const PoseSE3 pose(global[k].rotation(), global[k].translation() * s);
      const auto pts = depth_to_points(d, scene.spec.rig.cameras[j].intrinsics, pose, s);
      points.insert(points.end(), pts.begin(), pts.end());
    }
  }
  return points;
}

// Evaluates one checkpoint per variant on identical data.
inline std::vector<MetricsReport> run_ablation(const std::map<Variant, std::filesystem::path>& checkpoints,
                                               const std::vector<const SceneData*>& scenes, int frames,
                                               Alignment alignment) {
  std::vector<MetricsReport> out;
  for (Variant v : {Variant::kBaselineTva, Variant::kRelPoseEmbed, Variant::kFull}) {
    auto it = checkpoints.find(v);
    if (it == checkpoints.end() || !std::filesystem::exists(it->second)) {
      throw MissingCheckpoint("no checkpoint for variant " + to_string(v));
    }
    CheckpointInfo info;
    const DriveModel<float> model = model_from_checkpoint<float>(it->second, &info);
    if (info.model.variant != v) throw FingerprintMismatch("checkpoint variant differs from " + to_string(v));
    MetricsReport r = evaluate(model_predictor(model), scenes, frames, alignment);
    r.variant = to_string(v);
    r.fingerprint = info.fingerprint;
    out.push_back(r);
  }
  return out;
}

}  // namespace mcamvggt

#endif  // MCAMVGGT_EVALUATION_HPP_
