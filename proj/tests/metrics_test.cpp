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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mcamvggt/metrics.hpp"
#include "test_util.hpp"

namespace mcamvggt {
namespace {

using testing::random_pose;

Mat3 axis_rotation(const Vec3& axis, double deg) {
  return Eigen::AngleAxisd(deg * M_PI / 180.0, axis.normalized()).toRotationMatrix();
}

TEST(PoseAuc, PerfectPredictionScoresOne) {
  std::mt19937_64 rng(1);
  std::vector<PoseSE3> gt;
  for (int k = 0; k < 5; ++k) gt.push_back(random_pose(rng));
  EXPECT_DOUBLE_EQ(pose_auc(gt, gt, 30), 1.0);
  EXPECT_DOUBLE_EQ(pose_auc(gt, gt, 15), 1.0);
}

TEST(PoseAuc, UniformErrorOfTenAndAHalfDegrees) {
  // Rotating the second camera about the baseline direction leaves every
  // translation direction intact, so each ordered pair errs by exactly 10.5.
  const std::vector<PoseSE3> gt = {PoseSE3(), PoseSE3(Mat3::Identity(), Vec3(1, 0, 0))};
  const std::vector<PoseSE3> pred = {PoseSE3(), PoseSE3(axis_rotation(Vec3::UnitX(), 10.5), Vec3(1, 0, 0))};
  for (double e : pair_errors(pred, gt)) EXPECT_NEAR(e, 10.5, 1e-9);
  EXPECT_NEAR(pose_auc(pred, gt, 30), 20.0 / 30.0, 1e-12);
  EXPECT_NEAR(pose_auc(pred, gt, 15), 5.0 / 15.0, 1e-12);
}

// Relative poses via 4x4 matrices, angles via axis-angle and atan2.
double brute_force_auc(const std::vector<PoseSE3>& pred, const std::vector<PoseSE3>& gt, int tau_max) {
  std::vector<double> errs;
  for (std::size_t a = 0; a < pred.size(); ++a) {
    for (std::size_t b = 0; b < pred.size(); ++b) {
      if (a == b) continue;
      const Mat4 rp = pred[a].as_matrix().inverse() * pred[b].as_matrix();
      const Mat4 rg = gt[a].as_matrix().inverse() * gt[b].as_matrix();
      const Mat3 dr = rp.block<3, 3>(0, 0).transpose() * rg.block<3, 3>(0, 0);
      const double rot = Eigen::AngleAxisd(dr).angle() * 180.0 / M_PI;
      const Vec3 tp = rp.block<3, 1>(0, 3), tg = rg.block<3, 1>(0, 3);
      double trans = 0.0;
      if (tp.norm() >= 1e-9 && tg.norm() >= 1e-9) trans = std::atan2(tp.cross(tg).norm(), tp.dot(tg)) * 180.0 / M_PI;
      errs.push_back(std::max(rot, trans));
    }
  }
  double sum = 0.0;
  for (int tau = 1; tau <= tau_max; ++tau) {
    int hits = 0;
    for (double e : errs) hits += e < tau ? 1 : 0;
    sum += static_cast<double>(hits) / errs.size();
  }
  return sum / tau_max;
}

std::vector<PoseSE3> perturb(std::mt19937_64& rng, const std::vector<PoseSE3>& gt, double deg, double shift) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<PoseSE3> out;
  for (const auto& g : gt) {
    const Vec3 axis(n(rng), n(rng), n(rng));
    out.emplace_back(axis_rotation(axis, std::abs(n(rng)) * deg) * g.rotation(),
                     g.translation() + shift * Vec3(n(rng), n(rng), n(rng)));
  }
  return out;
}

TEST(PoseAuc, MatchesBruteForce) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PoseSE3> gt;
    for (int k = 0; k < 4; ++k) gt.push_back(random_pose(rng));
    const auto pred = perturb(rng, gt, 8.0, 0.5);
    for (int tau : {15, 30}) EXPECT_NEAR(pose_auc(pred, gt, tau), brute_force_auc(pred, gt, tau), 1e-12);
  }
}

TEST(PoseAuc, InvariantToGlobalRigidTransformAndPredictionScale) {
  std::mt19937_64 rng(3);
  std::vector<PoseSE3> gt;
  for (int k = 0; k < 6; ++k) gt.push_back(random_pose(rng));
  const auto pred = perturb(rng, gt, 6.0, 0.3);
  const double base = pose_auc(pred, gt, 30);
  const PoseSE3 t = random_pose(rng);
  std::vector<PoseSE3> pred_t, gt_t, pred_s;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    pred_t.push_back(t * pred[k]);
    gt_t.push_back(t * gt[k]);
    pred_s.emplace_back(pred[k].rotation(), pred[k].translation() * 3.7);
  }
  EXPECT_NEAR(pose_auc(pred_t, gt_t, 30), base, 1e-12);
  EXPECT_NEAR(pose_auc(pred_s, gt, 30), base, 1e-12);
}

TEST(PoseAuc, DegeneratePairsAndErrors) {
  const std::vector<PoseSE3> same = {PoseSE3(), PoseSE3()};
  const std::vector<PoseSE3> rotated = {PoseSE3(), PoseSE3(axis_rotation(Vec3::UnitZ(), 2.5), Vec3::Zero())};
  for (double e : pair_errors(rotated, same)) EXPECT_NEAR(e, 2.5, 1e-9);
  EXPECT_THROW(pose_auc({PoseSE3()}, {PoseSE3()}, 30), LengthMismatch);
  EXPECT_THROW(pose_auc(same, {PoseSE3()}, 30), LengthMismatch);
  EXPECT_EQ(pair_errors(std::vector<PoseSE3>(4), std::vector<PoseSE3>(4)).size(), 12u);
}

DepthMap ramp(int w, int h, double scale = 1.0) {
  DepthMap d(w, h);
  for (std::size_t p = 0; p < d.size(); ++p) {
    d.depth[p] = scale * (1.0 + 0.1 * static_cast<double>(p));
    d.valid[p] = p % 7 != 3;
  }
  return d;
}

TEST(DepthMetrics, ClosedFormExamples) {
  const DepthMap gt = ramp(6, 4);
  for (double s : {1.0, -1.0}) {
    const DepthScores r = depth_metrics(gt, gt, s);
    EXPECT_NEAR(r.abs_rel, 0.0, 1e-15);
    EXPECT_EQ(r.delta3, 1.0);
  }
  const DepthMap pred = ramp(6, 4, 1.2);
  const DepthScores fixed = depth_metrics(pred, gt, 1.0);
  EXPECT_NEAR(fixed.abs_rel, 0.2, 1e-12);
  EXPECT_EQ(fixed.delta3, 1.0);
  const DepthScores ls = depth_metrics(pred, gt, 0.0);
  EXPECT_NEAR(ls.scale, 1.0 / 1.2, 1e-12);
  EXPECT_NEAR(ls.abs_rel, 0.0, 1e-12);
  EXPECT_EQ(ls.pixels, gt.valid_count());
}

TEST(DepthMetrics, DeltaThresholdAndInvalidPixels) {
  DepthMap gt(2, 1), pred(2, 1);
  gt.depth = {1.0, 1.0};
  gt.valid = {1, 1};
  pred.depth = {1.95, 1.96};  // 1.25^3 = 1.953125
  EXPECT_EQ(depth_metrics(pred, gt, 1.0).delta3, 0.5);
  pred.depth = {1.0, 1e6};
  gt.valid = {1, 0};
  EXPECT_EQ(depth_metrics(pred, gt, 1.0).abs_rel, 0.0);
  gt.valid = {0, 0};
  EXPECT_THROW(depth_metrics(pred, gt, 1.0), NoValidPixels);
  EXPECT_THROW(depth_metrics(pred, DepthMap(3, 1), 1.0), ShapeError);
}

TEST(DepthMetrics, LeastSquaresIgnoresPredictionScale) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.8, 1.25);
  const DepthMap gt = ramp(5, 5);
  DepthMap pred = gt;
  for (auto& d : pred.depth) d *= u(rng);
  const DepthScores a = depth_metrics(pred, gt, 0.0);
  for (auto& d : pred.depth) d *= 17.0;
  const DepthScores b = depth_metrics(pred, gt, 0.0);
  EXPECT_NEAR(a.abs_rel, b.abs_rel, 1e-12);
  EXPECT_EQ(a.delta3, b.delta3);
}

TEST(DepthMetrics, PoolsPixelsAcrossMaps) {
  const DepthMap g1 = ramp(3, 2), g2 = ramp(4, 4, 2.0);
  const DepthMap p1 = ramp(3, 2, 1.1), p2 = ramp(4, 4, 2.0);
  const DepthScores r = depth_metrics({&p1, &p2}, {&g1, &g2}, 1.0);
  const double n = static_cast<double>(g1.valid_count() + g2.valid_count());
  EXPECT_NEAR(r.abs_rel, 0.1 * g1.valid_count() / n, 1e-12);
}

TEST(MetricsReport, JsonSchemaAndFiniteness) {
  MetricsReport m;
  m.variant = "full";
  m.frames = 6;
  m.cameras = 6;
  m.auc30 = 0.5;
  const auto j = m.to_json();
  for (const char* k : {"variant", "frames", "cameras", "auc30", "auc15", "abs_rel", "delta3", "latency_ms"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  for (const char* k : {"tva", "mca", "heads", "total"}) EXPECT_TRUE(j["latency_ms"].contains(k)) << k;
  EXPECT_TRUE(m.finite());
  m.abs_rel = NAN;
  EXPECT_FALSE(m.finite());
}

}  // namespace
}  // namespace mcamvggt
