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

#ifndef MCAMVGGT_PIPELINE_HPP_
#define MCAMVGGT_PIPELINE_HPP_

#include <string>
#include <vector>

#include "mcamvggt/geometry.hpp"
#include "mcamvggt/model.hpp"
#include "mcamvggt/synthetic.hpp"

namespace mcamvggt {

enum class DepthSource { kRender, kEnhanced };

inline DepthSource parse_depth_source(const std::string& s) {
  if (s == "render") return DepthSource::kRender;
  if (s == "enhanced") return DepthSource::kEnhanced;
  throw ConfigError("depth_source must be 'render' or 'enhanced', got '" + s + "'");
}

inline std::string to_string(DepthSource s) { return s == DepthSource::kRender ? "render" : "enhanced"; }

// A rendered scene plus the depth supervision chosen for it.
struct SceneData {
  SceneSpec spec;
  std::vector<FrameBundle> frames;
  std::vector<std::vector<DepthMap>> supervision;  // [frame][camera], metres

  int num_frames() const { return static_cast<int>(frames.size()); }
};

inline SceneData build_scene_data(SceneSpec spec, std::vector<FrameBundle> frames, DepthSource source,
                                  int kernel = 3) {
  SceneData data{std::move(spec), std::move(frames), {}};
  if (source == DepthSource::kRender) {
    for (const auto& f : data.frames) {
      std::vector<DepthMap> maps;
      for (const auto& c : f.cameras) maps.push_back(c.depth);
      data.supervision.push_back(std::move(maps));
    }
    return data;
  }
  const AggregatedCloud cloud = aggregate_sparse_points(data.frames, data.spec.dynamic_objects);
  for (int i = 0; i < data.num_frames(); ++i) {
    const std::vector<Vec3> points = cloud.at_frame(i);
    std::vector<DepthMap> maps;
    for (std::size_t j = 0; j < data.spec.rig.size(); ++j) {
      maps.push_back(densify_depth(project_points_to_depth(points, data.spec.rig.cameras[j].intrinsics,
                                                           data.frames[i].cameras[j].cam_to_world),
                                   kernel));
    }
    data.supervision.push_back(std::move(maps));
  }
  return data;
}

// Ground truth for a contiguous window of frames, expressed in the
// normalized rig frame of the window's first frame.
struct WindowTargets {
  int frames = 0;
  int cameras = 0;
  RigNormalization norm;
  ag::Matrix<double> seq_g;  // frames x 10
  ag::Matrix<double> rel_g;  // cameras x 10
  std::vector<PoseSE3> seq;
  std::vector<PoseSE3> rel;
  std::vector<PoseSE3> global;          // frame-major
  std::vector<DepthMap> depth;          // frame-major, normalized units
  std::vector<DepthMap> depth_metric;   // frame-major, metres
  std::vector<CameraIntrinsics> intrinsics;

  // Metres per normalized unit.
  double metric_scale() const { return 1.0 / norm.factor; }
};

inline PoseSE3 scale_translation(const PoseSE3& p, double k) { return {p.rotation(), p.translation() * k}; }

inline WindowTargets make_targets(const SceneData& scene, int start, int count) {
  const CameraRig& rig = scene.spec.rig;
  if (start < 0 || count < 1 || start + count > scene.num_frames()) {
    throw ShapeError("frame window is outside the scene");
  }
  WindowTargets t;
  t.frames = count;
  t.cameras = static_cast<int>(rig.size());
  t.norm = compute_rig_normalization(rig);
  const double k = t.norm.factor;
  const PoseSE3 to_body = translation_pose(t.norm.origin());
  const PoseSE3 body0_inv = (scene.frames[start].ego_pose * to_body).inverse();

  t.rel_g.resize(t.cameras, CameraVector10::kSize);
  for (int j = 0; j < t.cameras; ++j) {
    const RigCamera& cam = rig.cameras[j];
    const PoseSE3 rel(cam.extrinsic.rotation(), t.norm.apply(cam.extrinsic.translation()));
    t.rel.push_back(rel);
    t.intrinsics.push_back(cam.intrinsics);
    const CameraVector10 v = encode_camera_vector(rel, cam.intrinsics);
    for (int c = 0; c < CameraVector10::kSize; ++c) t.rel_g(j, c) = v.values[c];
  }
  t.seq_g.setZero(count, CameraVector10::kSize);
  for (int i = 0; i < count; ++i) {
    const PoseSE3 body = body0_inv * (scene.frames[start + i].ego_pose * to_body);
    const PoseSE3 seq = scale_translation(body, k);
    t.seq.push_back(seq);
    CameraVector10 v;
    write_pose_slots(seq, v);
    for (int c = 0; c < CameraVector10::kSize; ++c) t.seq_g(i, c) = v.values[c];
    for (int j = 0; j < t.cameras; ++j) {
      t.global.push_back(compose_pose(seq, t.rel[j]));
      DepthMap metric = scene.supervision[start + i][j];
      DepthMap normalized = metric;
      for (auto& d : normalized.depth) d *= k;
      t.depth_metric.push_back(std::move(metric));
      t.depth.push_back(std::move(normalized));
    }
  }
  return t;
}

template <typename T>
ag::Matrix<T> image_matrix(const Image& img) {
  ag::Matrix<T> m(static_cast<Eigen::Index>(img.width) * img.height, 3);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<T>(img.rgb[k]);
  return m;
}

template <typename T>
ModelInput<T> make_input(const SceneData& scene, int start, int count) {
  ModelInput<T> in;
  in.frames = count;
  in.cameras = static_cast<int>(scene.spec.rig.size());
  const RigNormalization norm = compute_rig_normalization(scene.spec.rig);
  in.camera_vectors.resize(in.cameras, CameraVector10::kSize);
  for (int j = 0; j < in.cameras; ++j) {
    const RigCamera& cam = scene.spec.rig.cameras[j];
    const CameraVector10 v = encode_camera_vector(
        PoseSE3(cam.extrinsic.rotation(), norm.apply(cam.extrinsic.translation())), cam.intrinsics);
    for (int c = 0; c < CameraVector10::kSize; ++c) in.camera_vectors(j, c) = static_cast<T>(v.values[c]);
  }
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < in.cameras; ++j) {
      in.images.push_back(Var<T>::constant(image_matrix<T>(scene.frames[start + i].cameras[j].image)));
    }
  }
  return in;
}

}  // namespace mcamvggt

#endif  // MCAMVGGT_PIPELINE_HPP_
