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

#ifndef MCAMVGGT_SCENE_BUILDER_HPP_
#define MCAMVGGT_SCENE_BUILDER_HPP_

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mcamvggt/geometry.hpp"
#include "mcamvggt/synthetic.hpp"

namespace mcamvggt {

inline Mat3 yaw_rotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

// Camera (x right, y down, z forward) -> ego (x forward, y left, z up) for a
// camera looking along the ego heading.
inline Mat3 camera_to_ego_base() {
  Mat3 r;
  r << 0, 0, 1,
      -1, 0, 0,
      0, -1, 0;
  return r;
}

inline CameraIntrinsics intrinsics_from_fov(int width, int height, double fov_h_deg) {
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.fx = width / (2.0 * std::tan(fov_h_deg * M_PI / 360.0));
  k.fy = k.fx;
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  return k;
}

// Six-camera surround layout modeled on a typical driving rig.
inline CameraRig nuscenes_like_rig(int width, int height) {
  struct Mount {
    const char* id;
    double x, y, z, yaw_deg, fov_deg;
  };
  static const Mount kMounts[] = {
      {"CAM_FRONT", 1.70, 0.00, 1.51, 0.0, 64.0},
      {"CAM_FRONT_RIGHT", 1.52, -0.49, 1.51, -55.0, 64.0},
      {"CAM_BACK_RIGHT", 1.04, -0.48, 1.49, -110.0, 64.0},
      {"CAM_BACK", 0.03, 0.00, 1.57, 180.0, 90.0},
      {"CAM_BACK_LEFT", 1.04, 0.48, 1.49, 110.0, 64.0},
      {"CAM_FRONT_LEFT", 1.52, 0.49, 1.51, 55.0, 64.0},
  };
  CameraRig rig;
  for (const auto& m : kMounts) {
    RigCamera cam;
    cam.camera_id = m.id;
    cam.extrinsic = PoseSE3(yaw_rotation(m.yaw_deg * M_PI / 180.0) * camera_to_ego_base(),
                            Vec3(m.x, m.y, m.z));
    cam.intrinsics = intrinsics_from_fov(width, height, m.fov_deg);
    rig.cameras.push_back(cam);
  }
  return rig;
}

struct RandomSceneOptions {
  int num_frames = 20;
  int num_static_boxes = 24;
  int num_dynamic_objects = 2;
  double speed_min = 0.6;  // meters per frame
  double speed_max = 1.6;
  double yaw_rate_max_deg = 2.0;  // per frame, symmetric
  int lidar_rays = 4096;
};

// Straight-ish road with buildings on both sides and vehicles in the lanes.
inline SceneSpec make_random_scene(const std::string& name, const CameraRig& rig,
                                   const RandomSceneOptions& opt, std::uint64_t seed) {
  std::mt19937_64 rng(detail::splitmix64(seed));
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  SceneSpec spec;
  spec.name = name;
  spec.rig = rig;
  spec.rng_seed = seed;
  spec.lidar_rays = opt.lidar_rays;

  const double speed = uniform(opt.speed_min, opt.speed_max);
  const double yaw_rate = uniform(-opt.yaw_rate_max_deg, opt.yaw_rate_max_deg) * M_PI / 180.0;
  double yaw = 0.0;
  Vec3 pos = Vec3::Zero();
  for (int i = 0; i < opt.num_frames; ++i) {
    spec.ego_trajectory.emplace_back(yaw_rotation(yaw), pos);
    pos += speed * Vec3(std::cos(yaw), std::sin(yaw), 0.0);
    yaw += yaw_rate;
  }

  Primitive ground;
  ground.kind = Primitive::Kind::kPlane;
  ground.color = Vec3(0.35, 0.35, 0.38);
  spec.static_geometry.push_back(ground);

  // Road-side boxes sampled along an extended path so that the first and last
  // frames also see structure behind and ahead of the ego.
  const double path_len = speed * opt.num_frames;
  for (int b = 0; b < opt.num_static_boxes; ++b) {
    const double s = uniform(-25.0, path_len + 25.0);
    const double side = (b % 2 == 0) ? 1.0 : -1.0;
    const double along_yaw = yaw_rate * std::clamp(s / speed, 0.0, double(opt.num_frames));
    const Vec3 half(uniform(1.5, 4.0), uniform(1.0, 3.0), uniform(1.5, 5.0));
    const double lateral = side * (uniform(6.0, 14.0) + half.y());
    // Position along the curved path, approximated by integrating the heading.
    Vec3 base = Vec3::Zero();
    double h = 0.0;
    const int steps = static_cast<int>(std::abs(s) / 0.5) + 1;
    const double ds = s / steps;
    for (int k = 0; k < steps; ++k) {
      base += ds * Vec3(std::cos(h), std::sin(h), 0.0);
      h = yaw_rate * std::clamp((k + 1) * ds / speed, 0.0, double(opt.num_frames));
    }
    Primitive box;
    box.kind = Primitive::Kind::kBox;
    box.half_extents = half;
    box.pose = PoseSE3(yaw_rotation(along_yaw + uniform(-0.2, 0.2)),
                       base + lateral * Vec3(-std::sin(along_yaw), std::cos(along_yaw), 0.0) +
                           Vec3(0, 0, half.z()));
    box.color = Vec3(uniform(0.15, 0.95), uniform(0.15, 0.95), uniform(0.15, 0.95));
    spec.static_geometry.push_back(box);
  }

  for (int d = 0; d < opt.num_dynamic_objects; ++d) {
    DynamicObject car;
    car.half_extents = Vec3(2.2, 0.95, 0.8);
    car.color = Vec3(uniform(0.5, 1.0), uniform(0.0, 0.4), uniform(0.0, 0.4));
    const double lane = (d % 2 == 0) ? 3.5 : -3.5;
    const double start = uniform(8.0, 25.0) * ((d % 2 == 0) ? 1.0 : -1.0);
    const double car_speed = speed * uniform(0.6, 1.4);
    for (int i = 0; i < opt.num_frames; ++i) {
      const PoseSE3& ego = spec.ego_trajectory[i];
      // Cars follow the ego heading at a lane offset so they stay in view.
      const double along = start + (car_speed - speed) * i;
      const Vec3 offset(along, lane, car.half_extents.z());
      car.poses.emplace_back(ego.rotation(), ego * offset);
    }
    spec.dynamic_objects.push_back(car);
  }
  return spec;
}

}  // namespace mcamvggt

#endif  // MCAMVGGT_SCENE_BUILDER_HPP_
