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

#ifndef MCAMVGGT_GEOMETRY_HPP_
#define MCAMVGGT_GEOMETRY_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "mcamvggt/errors.hpp"

namespace mcamvggt {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Nearest rotation in the Frobenius sense (polar decomposition).
inline Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

// Rigid transform x -> R x + t. Poses in this library are camera-to-world
// (or camera-to-ego) unless a name says otherwise.
class PoseSE3 {
 public:
  PoseSE3() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  PoseSE3(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static PoseSE3 identity() { return {}; }

  static PoseSE3 from_matrix(const Mat4& m) {
    return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
  }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Mat4 as_matrix() const {
    Mat4 m = Mat4::Zero();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    m(3, 3) = 1.0;
    return m;
  }

  PoseSE3 inverse() const {
    const Mat3 rt = rotation_.transpose();
    return {rt, -(rt * translation_)};
  }

  Vec3 operator*(const Vec3& p) const { return rotation_ * p + translation_; }

  bool is_valid(double tol = 1e-9) const { return is_rotation(rotation_, tol); }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

// Matrix product a·b. The rotation block is re-projected onto SO(3) once
// round-off pushes it more than 1e-9 away.
inline PoseSE3 compose_pose(const PoseSE3& a, const PoseSE3& b) {
  Mat3 r = a.rotation() * b.rotation();
  const Vec3 t = a.rotation() * b.translation() + a.translation();
  if (!is_rotation(r)) r = nearest_rotation(r);
  return {r, t};
}

inline PoseSE3 operator*(const PoseSE3& a, const PoseSE3& b) {
  return compose_pose(a, b);
}

inline PoseSE3 translation_pose(const Vec3& t) { return {Mat3::Identity(), t}; }

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  int width = 1;
  int height = 1;

  bool is_valid() const {
    return fx > 0.0 && fy > 0.0 && cx > 0.0 && cx < width && cy > 0.0 &&
           cy < height;
  }
};

struct RigCamera {
  std::string camera_id;
  PoseSE3 extrinsic;  // camera -> ego
  CameraIntrinsics intrinsics;
};

// Fixed multi-camera calibration. Extrinsics never change within a scene.
struct CameraRig {
  std::vector<RigCamera> cameras;

  std::size_t size() const { return cameras.size(); }

  void validate() const {
    if (cameras.empty()) throw ConfigError("camera rig has no cameras");
    std::set<std::string> ids;
    for (const auto& c : cameras) {
      if (!ids.insert(c.camera_id).second) {
        throw ConfigError("duplicate camera id '" + c.camera_id + "'");
      }
      if (!c.intrinsics.is_valid()) {
        throw ConfigError("invalid intrinsics for camera '" + c.camera_id + "'");
      }
      if (!c.extrinsic.is_valid(1e-6)) {
        throw ConfigError("extrinsic of camera '" + c.camera_id +
                          "' is not a rigid transform");
      }
    }
  }
};

// Rig translations are centered on their centroid and scaled by one factor,
// 0.1 / std, where std is pooled over all 3M centered scalars. The output
// therefore has pooled mean 0 and pooled std 0.1, and is unchanged when the
// whole rig is shifted.
struct RigNormalization {
  static constexpr double kTargetStd = 0.1;

  Vec3 centroid = Vec3::Zero();
  double std = 0.0;
  double factor = 1.0;

  Vec3 apply(const Vec3& t) const { return (t - centroid) * factor; }
  // Ego-frame point that becomes the origin of the normalized rig frame.
  Vec3 origin() const { return centroid; }
};

inline RigNormalization compute_rig_normalization(const CameraRig& rig) {
  if (rig.cameras.empty()) throw DegenerateRig("rig has no cameras");
  Vec3 centroid = Vec3::Zero();
  for (const auto& c : rig.cameras) centroid += c.extrinsic.translation();
  centroid /= static_cast<double>(rig.size());
  double sq = 0.0;
  for (const auto& c : rig.cameras) sq += (c.extrinsic.translation() - centroid).squaredNorm();
  const double std = std::sqrt(sq / (3.0 * static_cast<double>(rig.size())));
  if (std < 1e-12) {
    throw DegenerateRig("all rig cameras are co-located (pooled std < 1e-12)");
  }
  return {centroid, std, RigNormalization::kTargetStd / std};
}

inline std::vector<Vec3> normalize_rig_translations(const CameraRig& rig) {
  const RigNormalization norm = compute_rig_normalization(rig);
  std::vector<Vec3> out;
  out.reserve(rig.size());
  for (const auto& c : rig.cameras) out.push_back(norm.apply(c.extrinsic.translation()));
  return out;
}

// Layout: t_norm[3], quaternion (w, x, y, z)[4], fov_h, fov_v, aspect.
struct CameraVector10 {
  static constexpr int kSize = 10;
  static constexpr int kTranslation = 0;
  static constexpr int kQuaternion = 3;
  static constexpr int kFovH = 7;
  static constexpr int kFovV = 8;
  static constexpr int kAspect = 9;

  std::array<double, kSize> values{};

  Vec3 translation() const { return {values[0], values[1], values[2]}; }
  Eigen::Vector4d quaternion() const {
    return {values[3], values[4], values[5], values[6]};
  }
  double fov_h() const { return values[kFovH]; }
  double fov_v() const { return values[kFovV]; }
  double aspect() const { return values[kAspect]; }
};

inline Eigen::Vector4d rotation_to_quaternion(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  Eigen::Vector4d v(q.w(), q.x(), q.y(), q.z());
  if (v[0] < 0.0) v = -v;
  return v;
}

inline Mat3 quaternion_to_rotation(const Eigen::Vector4d& q) {
  const double norm = q.norm();
  if (!(norm > 1e-6)) throw InvalidQuaternion("quaternion norm underflows");
  const Eigen::Vector4d u = q / norm;
  return Eigen::Quaterniond(u[0], u[1], u[2], u[3]).toRotationMatrix();
}

inline void write_pose_slots(const PoseSE3& pose, CameraVector10& v) {
  const Eigen::Vector4d q = rotation_to_quaternion(pose.rotation());
  for (int i = 0; i < 3; ++i) v.values[i] = pose.translation()[i];
  for (int i = 0; i < 4; ++i) v.values[3 + i] = q[i];
}

inline CameraVector10 encode_camera_vector(const PoseSE3& extrinsic,
                                           const CameraIntrinsics& intrinsics) {
  CameraVector10 v;
  write_pose_slots(extrinsic, v);
  v.values[CameraVector10::kFovH] =
      2.0 * std::atan(intrinsics.width / (2.0 * intrinsics.fx));
  v.values[CameraVector10::kFovV] =
      2.0 * std::atan(intrinsics.height / (2.0 * intrinsics.fy));
  v.values[CameraVector10::kAspect] = intrinsics.fx / intrinsics.fy;
  return v;
}

// Pose part of a camera vector. The quaternion is normalized first.
inline PoseSE3 decode_pose_slots(const CameraVector10& v) {
  return {quaternion_to_rotation(v.quaternion()), v.translation()};
}

// The principal point is not part of the 10-D encoding; the decoder places it
// at the image center.
inline std::pair<PoseSE3, CameraIntrinsics> decode_camera_vector(
    const CameraVector10& v, int width, int height) {
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.fx = width / (2.0 * std::tan(v.fov_h() / 2.0));
  k.fy = height / (2.0 * std::tan(v.fov_v() / 2.0));
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  return {decode_pose_slots(v), k};
}

// Mean over cameras of |t_real| / |t_pred|; cameras whose predicted
// translation is shorter than 1e-9 do not vote.
inline double estimate_scale(std::span<const Vec3> t_real,
                             std::span<const Vec3> t_pred_norm) {
  if (t_real.size() != t_pred_norm.size()) {
    throw LengthMismatch("estimate_scale: translation lists differ in length");
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < t_real.size(); ++j) {
    const double denom = t_pred_norm[j].norm();
    if (denom <= 1e-9) continue;
    sum += t_real[j].norm() / denom;
    ++used;
  }
  if (used == 0) throw NoValidCameras("estimate_scale: no camera has a usable prediction");
  return sum / static_cast<double>(used);
}

// Per-pixel depth along the optical axis. Pixel (u, v) is column u, row v.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;
  std::vector<double> confidence;  // empty when absent

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w),
        height(h),
        depth(static_cast<std::size_t>(w) * h, 0.0),
        valid(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width + u;
  }
  std::size_t size() const { return depth.size(); }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto m : valid) n += m ? 1 : 0;
    return n;
  }
};

// Back-projects every valid pixel to world coordinates, row-major order.
inline std::vector<Vec3> depth_to_points(const DepthMap& depth,
                                         const CameraIntrinsics& intrinsics,
                                         const PoseSE3& cam_to_world,
                                         double scale = 1.0) {
  std::vector<Vec3> points;
  points.reserve(depth.valid_count());
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const std::size_t idx = depth.index(u, v);
      if (!depth.valid[idx]) continue;
      const double d = scale * depth.depth[idx];
      const Vec3 p_cam(d * (u - intrinsics.cx) / intrinsics.fx,
                       d * (v - intrinsics.cy) / intrinsics.fy, d);
      points.push_back(cam_to_world * p_cam);
    }
  }
  return points;
}

struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

inline PixelDepth project_point(const Vec3& world, const CameraIntrinsics& intrinsics,
                                const PoseSE3& cam_to_world) {
  const Vec3 p = cam_to_world.inverse() * world;
  return {intrinsics.fx * p.x() / p.z() + intrinsics.cx,
          intrinsics.fy * p.y() / p.z() + intrinsics.cy, p.z()};
}

}  // namespace mcamvggt

#endif  // MCAMVGGT_GEOMETRY_HPP_
