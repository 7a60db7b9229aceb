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

#ifndef MCAMVGGT_SYNTHETIC_HPP_
#define MCAMVGGT_SYNTHETIC_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mcamvggt/errors.hpp"
#include "mcamvggt/geometry.hpp"
#include "mcamvggt/parallel.hpp"

namespace mcamvggt {

// Analytic scene element with a single flat color.
struct Primitive {
  enum class Kind { kPlane, kBox };

  Kind kind = Kind::kPlane;
  // Local -> world. A plane is the local z = 0 plane; a box is centered at the
  // local origin.
  PoseSE3 pose;
  // Plane: x/y half sizes, non-positive means unbounded. Box: half extents.
  Vec3 half_extents = Vec3::Zero();
  Vec3 color = Vec3::Constant(0.5);
};

struct DynamicObject {
  Vec3 half_extents = Vec3::Constant(1.0);
  std::vector<PoseSE3> poses;  // box -> world, one per frame
  Vec3 color = Vec3(0.8, 0.2, 0.2);
};

struct SceneSpec {
  std::string name = "scene";
  CameraRig rig;
  std::vector<PoseSE3> ego_trajectory;  // ego -> world, one per frame
  std::vector<Primitive> static_geometry;
  std::vector<DynamicObject> dynamic_objects;
  std::uint64_t rng_seed = 0;
  int lidar_rays = 4096;
  double lidar_height = 1.8;
  double lidar_max_range = 80.0;
  double lidar_min_elevation_deg = -30.0;
  double lidar_max_elevation_deg = 10.0;

  int num_frames() const { return static_cast<int>(ego_trajectory.size()); }

  void validate() const {
    rig.validate();
    if (ego_trajectory.empty()) throw ConfigError("scene needs at least one frame");
    for (const auto& obj : dynamic_objects) {
      if (obj.poses.size() != ego_trajectory.size()) {
        throw ConfigError("dynamic object pose count differs from frame count");
      }
    }
    if (lidar_rays < 0) throw ConfigError("lidar_rays must be non-negative");
  }
};

// Interleaved H x W x 3 image with values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.f) {}
};

struct CameraFrame {
  std::string camera_id;
  Image image;
  DepthMap depth;
  PoseSE3 cam_to_world;
};

struct FrameBundle {
  int frame_index = 0;
  PoseSE3 ego_pose;
  std::vector<CameraFrame> cameras;
  std::vector<Vec3> sparse_points;  // world frame
};

namespace detail {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal = Vec3::UnitZ();
  Vec3 color = Vec3::Zero();
};

constexpr double kMinHitDistance = 1e-9;

// dir need not be unit length; t is measured in multiples of dir.
inline void intersect_plane(const Primitive& p, const Vec3& origin, const Vec3& dir,
                            Hit& best) {
  const Mat3& r = p.pose.rotation();
  const Vec3 o = r.transpose() * (origin - p.pose.translation());
  const Vec3 d = r.transpose() * dir;
  if (std::abs(d.z()) < 1e-15) return;
  const double t = -o.z() / d.z();
  if (t <= kMinHitDistance || t >= best.t) return;
  const Vec3 q = o + t * d;
  if (p.half_extents.x() > 0.0 && std::abs(q.x()) > p.half_extents.x()) return;
  if (p.half_extents.y() > 0.0 && std::abs(q.y()) > p.half_extents.y()) return;
  best.t = t;
  best.normal = r.col(2);
  best.color = p.color;
}

inline void intersect_box(const PoseSE3& pose, const Vec3& half, const Vec3& color,
                          const Vec3& origin, const Vec3& dir, Hit& best) {
  const Mat3& r = pose.rotation();
  const Vec3 o = r.transpose() * (origin - pose.translation());
  const Vec3 d = r.transpose() * dir;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = 0;
  double near_sign = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (std::abs(o[a]) > half[a]) return;
      continue;
    }
    double t0 = (-half[a] - o[a]) / d[a];
    double t1 = (half[a] - o[a]) / d[a];
    double sign = -1.0;
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1.0;
    }
    if (t0 > t_near) {
      t_near = t0;
      near_axis = a;
      near_sign = sign;
    }
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return;
  }
  // Rays starting inside a box are ignored.
  if (t_near <= kMinHitDistance || t_near >= best.t) return;
  best.t = t_near;
  best.normal = near_sign * r.col(near_axis);
  best.color = color;
}

inline Hit cast_ray(const SceneSpec& spec, int frame, const Vec3& origin, const Vec3& dir) {
  Hit hit;
  for (const auto& p : spec.static_geometry) {
    if (p.kind == Primitive::Kind::kPlane) {
      intersect_plane(p, origin, dir, hit);
    } else {
      intersect_box(p.pose, p.half_extents, p.color, origin, dir, hit);
    }
  }
  for (const auto& obj : spec.dynamic_objects) {
    intersect_box(obj.poses[frame], obj.half_extents, obj.color, origin, dir, hit);
  }
  return hit;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline Vec3 shade(const Hit& hit, const Vec3& dir) {
  static const Vec3 kLight = Vec3(0.4, 0.3, 0.866).normalized();
  Vec3 n = hit.normal;
  if (n.dot(dir) > 0.0) n = -n;
  const double lambert = std::max(0.0, n.dot(kLight));
  return (hit.color * (0.55 + 0.45 * lambert)).cwiseMin(1.0).cwiseMax(0.0);
}

inline Vec3 sky_color(const Vec3& world_dir) {
  const double up = std::clamp(world_dir.normalized().z(), 0.0, 1.0);
  return Vec3(0.55, 0.7, 0.9) * (1.0 - 0.3 * up);
}

}  // namespace detail

// Per-frame stream so frames can be rendered independently.
inline std::mt19937_64 frame_rng(std::uint64_t seed, int frame_index) {
  return std::mt19937_64(
      detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(frame_index) + 1)));
}

inline CameraFrame render_camera(const SceneSpec& spec, int frame, const RigCamera& cam,
                                 const PoseSE3& ego_pose) {
  const CameraIntrinsics& k = cam.intrinsics;
  CameraFrame out;
  out.camera_id = cam.camera_id;
  out.cam_to_world = compose_pose(ego_pose, cam.extrinsic);
  out.image = Image(k.width, k.height);
  out.depth = DepthMap(k.width, k.height);
  const Mat3& r = out.cam_to_world.rotation();
  const Vec3& origin = out.cam_to_world.translation();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      // Unit z component, so the hit parameter is the depth itself.
      const Vec3 dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const Vec3 dir = r * dir_cam;
      const detail::Hit hit = detail::cast_ray(spec, frame, origin, dir);
      const std::size_t idx = out.depth.index(u, v);
      Vec3 color;
      if (std::isfinite(hit.t)) {
        out.depth.depth[idx] = hit.t;
        out.depth.valid[idx] = 1;
        color = detail::shade(hit, dir);
      } else {
        color = detail::sky_color(dir);
      }
      for (int c = 0; c < 3; ++c) out.image.rgb[idx * 3 + c] = static_cast<float>(color[c]);
    }
  }
  return out;
}

// Surface samples along random rays from the lidar origin on the ego.
inline std::vector<Vec3> sample_lidar(const SceneSpec& spec, int frame) {
  std::mt19937_64 rng = frame_rng(spec.rng_seed, frame);
  std::uniform_real_distribution<double> azimuth(0.0, 2.0 * M_PI);
  const double lo = std::sin(spec.lidar_min_elevation_deg * M_PI / 180.0);
  const double hi = std::sin(spec.lidar_max_elevation_deg * M_PI / 180.0);
  std::uniform_real_distribution<double> sin_elev(lo, hi);
  const PoseSE3& ego = spec.ego_trajectory[frame];
  const Vec3 origin = ego * Vec3(0.0, 0.0, spec.lidar_height);
  std::vector<Vec3> points;
  points.reserve(spec.lidar_rays);
  for (int n = 0; n < spec.lidar_rays; ++n) {
    const double a = azimuth(rng);
    const double s = sin_elev(rng);
    const double c = std::sqrt(1.0 - s * s);
    const Vec3 dir = ego.rotation() * Vec3(c * std::cos(a), c * std::sin(a), s);
    const detail::Hit hit = detail::cast_ray(spec, frame, origin, dir);
    if (std::isfinite(hit.t) && hit.t <= spec.lidar_max_range) {
      points.push_back(origin + hit.t * dir);
    }
  }
  return points;
}

inline FrameBundle render_frame(const SceneSpec& spec, int frame) {
  FrameBundle bundle;
  bundle.frame_index = frame;
  bundle.ego_pose = spec.ego_trajectory[frame];
  for (const auto& cam : spec.rig.cameras) {
    bundle.cameras.push_back(render_camera(spec, frame, cam, bundle.ego_pose));
  }
  bundle.sparse_points = sample_lidar(spec, frame);
  return bundle;
}

// Deterministic in spec.rng_seed regardless of the worker count.
inline std::vector<FrameBundle> generate_scene(const SceneSpec& spec,
                                               int workers = worker_count()) {
  spec.validate();
  if (spec.static_geometry.empty() && spec.dynamic_objects.empty()) {
    throw EmptyScene("scene '" + spec.name + "' has no primitives");
  }
  std::vector<FrameBundle> frames(spec.num_frames());
  parallel_for(spec.num_frames(), [&](int i) { frames[i] = render_frame(spec, i); }, workers);
  return frames;
}

inline bool inside_box(const Vec3& world, const PoseSE3& box_pose, const Vec3& half,
                       double tol = 1e-9) {
  const Vec3 local = box_pose.inverse() * world;
  return (local.cwiseAbs() - half).maxCoeff() <= tol;
}

// Static points stay put; points on a dynamic object are re-posed into every
// frame through the object's per-frame box pose.
struct AggregatedCloud {
  std::vector<Vec3> static_points;
  std::vector<std::vector<Vec3>> dynamic_points;  // per frame

  std::vector<Vec3> at_frame(int frame) const {
    std::vector<Vec3> out = static_points;
    if (frame < static_cast<int>(dynamic_points.size())) {
      out.insert(out.end(), dynamic_points[frame].begin(), dynamic_points[frame].end());
    }
    return out;
  }

  std::vector<Vec3> all() const {
    std::vector<Vec3> out = static_points;
    for (const auto& d : dynamic_points) out.insert(out.end(), d.begin(), d.end());
    return out;
  }
};

inline AggregatedCloud aggregate_sparse_points(const std::vector<FrameBundle>& frames,
                                               const std::vector<DynamicObject>& dynamic_objects) {
  AggregatedCloud cloud;
  const int n = static_cast<int>(frames.size());
  cloud.dynamic_points.resize(n);
  for (int i = 0; i < n; ++i) {
    for (const Vec3& p : frames[i].sparse_points) {
      const DynamicObject* owner = nullptr;
      for (const auto& obj : dynamic_objects) {
        if (inside_box(p, obj.poses[i], obj.half_extents, 1e-6)) {
          owner = &obj;
          break;
        }
      }
      if (owner == nullptr) {
        cloud.static_points.push_back(p);
        continue;
      }
      const Vec3 local = owner->poses[i].inverse() * p;
      for (int f = 0; f < n; ++f) cloud.dynamic_points[f].push_back(owner->poses[f] * local);
    }
  }
  return cloud;
}

// Nearest-depth-wins splatting to the closest pixel center.
inline DepthMap project_points_to_depth(const std::vector<Vec3>& world_points,
                                        const CameraIntrinsics& intrinsics,
                                        const PoseSE3& cam_to_world) {
  DepthMap out(intrinsics.width, intrinsics.height);
  const PoseSE3 world_to_cam = cam_to_world.inverse();
  for (const Vec3& w : world_points) {
    const Vec3 p = world_to_cam * w;
    if (p.z() <= 1e-9) continue;
    const long u = std::lround(intrinsics.fx * p.x() / p.z() + intrinsics.cx);
    const long v = std::lround(intrinsics.fy * p.y() / p.z() + intrinsics.cy);
    if (u < 0 || v < 0 || u >= intrinsics.width || v >= intrinsics.height) continue;
    const std::size_t idx = out.index(static_cast<int>(u), static_cast<int>(v));
    if (!out.valid[idx] || p.z() < out.depth[idx]) {
      out.depth[idx] = p.z();
      out.valid[idx] = 1;
    }
  }
  return out;
}

// Fills invalid pixels from the nearest originally valid pixel inside a
// kernel x kernel window (Euclidean pixel distance, ties to the smaller depth).
inline DepthMap densify_depth(const DepthMap& sparse, int kernel = 3) {
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("densify kernel must be odd and >= 1");
  const int r = kernel / 2;
  DepthMap out = sparse;
  for (int v = 0; v < sparse.height; ++v) {
    for (int u = 0; u < sparse.width; ++u) {
      const std::size_t idx = sparse.index(u, v);
      if (sparse.valid[idx]) continue;
      int best_d2 = std::numeric_limits<int>::max();
      double best_depth = 0.0;
      for (int dv = -r; dv <= r; ++dv) {
        for (int du = -r; du <= r; ++du) {
          const int uu = u + du;
          const int vv = v + dv;
          if (uu < 0 || vv < 0 || uu >= sparse.width || vv >= sparse.height) continue;
          const std::size_t n = sparse.index(uu, vv);
          if (!sparse.valid[n]) continue;
          const int d2 = du * du + dv * dv;
          if (d2 < best_d2 || (d2 == best_d2 && sparse.depth[n] < best_depth)) {
            best_d2 = d2;
            best_depth = sparse.depth[n];
          }
        }
      }
      if (best_d2 != std::numeric_limits<int>::max()) {
        out.depth[idx] = best_depth;
        out.valid[idx] = 1;
      }
    }
  }
  return out;
}

// Two-step ground-truth enhancement for frame `frame` of `frames`: aggregate
// the lidar analogue over all frames, splat into each camera, densify.
inline std::vector<DepthMap> enhanced_depth(const std::vector<FrameBundle>& frames,
                                            const std::vector<DynamicObject>& dynamic_objects,
                                            const CameraRig& rig, int frame, int kernel = 3) {
  const AggregatedCloud cloud = aggregate_sparse_points(frames, dynamic_objects);
  const std::vector<Vec3> points = cloud.at_frame(frame);
  std::vector<DepthMap> out;
  for (std::size_t j = 0; j < rig.size(); ++j) {
    out.push_back(densify_depth(
        project_points_to_depth(points, rig.cameras[j].intrinsics,
                                frames[frame].cameras[j].cam_to_world),
        kernel));
  }
  return out;
}

}  // namespace mcamvggt

#endif  // MCAMVGGT_SYNTHETIC_HPP_
