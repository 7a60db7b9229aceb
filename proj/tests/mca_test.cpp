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

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "mcamvggt/bench.hpp"
#include "mcamvggt/mca.hpp"
#include "test_util.hpp"

namespace mcamvggt {
namespace {

using testing::MatD;
using testing::random_matrix;
using testing::tiny_config;
using testing::VarD;

bool bit_equal(const MatD& a, const MatD& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

// Stand-in for TVA output: `layers` random token sequences per camera.
std::vector<CameraTokens<double>> random_tva(std::mt19937_64& rng, int cameras, int frames, int patches, int dim,
                                             int layers = 4) {
  std::vector<CameraTokens<double>> out(cameras);
  for (auto& c : out) {
    for (int l = 0; l < layers; ++l) c.layers.push_back(VarD::constant(random_matrix(rng, frames * (1 + patches), dim)));
  }
  return out;
}

MatD camera_vector_row(const CameraVector10& v) {
  MatD m(1, CameraVector10::kSize);
  for (int k = 0; k < CameraVector10::kSize; ++k) m(0, k) = v.values[k];
  return m;
}

TEST(RelPoseEmbed, ZeroWeightsGiveZeroToken) {
  nn::ParameterStore<double> store(1);
  const RelPoseEmbed<double> embed(store, 8);
  for (auto& [name, p] : store.all()) p.mutable_value().setZero();
  std::mt19937_64 rng(1);
  EXPECT_TRUE((embed(VarD::constant(random_matrix(rng, 3, 10))).value().array() == 0.0).all());
}

TEST(RelPoseEmbed, EqualCalibrationGivesEqualTokens) {
  nn::ParameterStore<double> store(2);
  const RelPoseEmbed<double> embed(store, 8);
  const CameraIntrinsics k{20, 20, 14, 7, 28, 14};
  const PoseSE3 pose(Mat3::Identity(), Vec3(0.1, -0.05, 0.02));
  const MatD row = camera_vector_row(encode_camera_vector(pose, k));
  const MatD out = embed(VarD::constant(ag::concat_rows<double>({VarD::constant(row), VarD::constant(row)}).value()))
                       .value();
  EXPECT_TRUE(bit_equal(out.row(0), out.row(1)));
  EXPECT_THROW(embed(VarD::constant(MatD::Zero(2, 9))), ShapeError);
}

TEST(RelPoseEmbed, FieldOfViewPerturbationChangesTokenAsJacobianPredicts) {
  nn::ParameterStore<double> store(3);
  const RelPoseEmbed<double> embed(store, 8);
  const CameraIntrinsics k{20, 18, 14, 7, 28, 14};
  const MatD v = camera_vector_row(encode_camera_vector(PoseSE3(), k));
  MatD bumped = v;
  bumped(0, CameraVector10::kFovH) += 1e-3;
  const MatD a = embed(VarD::constant(v)).value();
  const MatD b = embed(VarD::constant(bumped)).value();
  EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 1e-7);
  // Jacobian column for fov_h via reverse mode against a central difference.
  MatD lower = v;
  lower(0, CameraVector10::kFovH) -= 1e-3;
  const MatD c = embed(VarD::constant(lower)).value();
  for (Eigen::Index col = 0; col < a.cols(); ++col) {
    const VarD x = VarD::leaf(v);
    ag::backward(ag::slice_cols(embed(x), col, 1));
    EXPECT_NEAR(x.grad()(0, CameraVector10::kFovH), (b(0, col) - c(0, col)) / 2e-3, 1e-6);
  }
  const auto r = testing::gradcheck([&](const auto& x) { return testing::project(embed(x[0]), 4); }, {v});
  EXPECT_LT(r.max_relative, 1e-6);
}

TEST(InitTokens, LayoutPlacementAndTimeInvariance) {
  std::mt19937_64 rng(4);
  const int cameras = 2, frames = 6, patches = 3, dim = 8;
  const auto tva = random_tva(rng, cameras, frames, patches, dim);
  const VarD rel = VarD::constant(random_matrix(rng, cameras, dim));
  const TokenGrid<double> g = init_tokens(tva, rel, frames, patches);
  EXPECT_EQ(g.layout.tokens_per_image, 2 + patches);
  EXPECT_EQ(g.layers.size(), 4u);
  for (const auto& layer : g.layers) {
    const MatD& m = layer.value();
    EXPECT_EQ(m.rows(), frames * cameras * (2 + patches));
    for (int i = 0; i < frames; ++i) {
      for (int j = 0; j < cameras; ++j) {
        const Eigen::Index r = g.layout.image_row(i, j);
        EXPECT_TRUE(bit_equal(m.row(r), rel.value().row(j)));
        EXPECT_TRUE(bit_equal(m.row(r), m.row(g.layout.image_row(0, j))));
      }
    }
  }
  // Sequential and patch tokens follow in TVA order.
  const MatD& m = g.layers[2].value();
  const MatD& src = tva[1].layers[2].value();
  EXPECT_TRUE(bit_equal(m.block(g.layout.image_row(5, 1) + 1, 0, 1 + patches, dim), src.block(5 * (1 + patches), 0, 1 + patches, dim)));
  EXPECT_THROW(init_tokens(tva, VarD::constant(random_matrix(rng, 3, dim)), frames, patches), ShapeError);
}

TEST(WindowPlan, ClampsAtBoundariesAndCoversEveryCenterOnce) {
  const WindowPlan p = WindowPlan::make(5, 3);
  EXPECT_EQ(p.participants[0], (std::vector<int>{0, 1}));
  EXPECT_EQ(p.participants[2], (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(p.participants[4], (std::vector<int>{3, 4}));
  for (int n = 1; n <= 7; ++n) {
    for (int w : {1, 3, 5, 7}) {
      const WindowPlan q = WindowPlan::make(n, w);
      ASSERT_EQ(static_cast<int>(q.participants.size()), n);
      for (int i = 0; i < n; ++i) {
        const auto& part = q.participants[i];
        EXPECT_TRUE(std::find(part.begin(), part.end(), i) != part.end());
        EXPECT_LE(static_cast<int>(part.size()), w);
        for (int f : part) {
          EXPECT_GE(f, 0);
          EXPECT_LT(f, n);
          EXPECT_LE(std::abs(f - i), (w - 1) / 2);
        }
      }
    }
  }
  EXPECT_THROW(WindowPlan::make(4, 2), ConfigError);
  EXPECT_THROW(WindowPlan::make(0, 3), ShapeError);
}

struct Fixture {
  nn::ParameterStore<double> store{5};
  nn::Block<double> block{store, "b", 8, 2, 16, 0.5};
};

GridLayout layout_for(int frames, int cameras, int patches) { return {frames, cameras, 2 + patches, 0, 1, 2}; }

TEST(WindowAttention, SingleFrameEqualsGlobal) {
  Fixture f;
  std::mt19937_64 rng(6);
  const GridLayout lay = layout_for(1, 3, 2);
  const VarD tokens = VarD::constant(random_matrix(rng, lay.total_rows(), 8));
  const MatD w = window_attention(tokens, lay, WindowPlan::make(1, 3), f.block).value();
  EXPECT_TRUE(bit_equal(w, global_attention(tokens, f.block).value()));
}

TEST(WindowAttention, WideWindowEqualsGlobal) {
  Fixture f;
  std::mt19937_64 rng(7);
  for (int n = 1; n <= 4; ++n) {
    const GridLayout lay = layout_for(n, 2, 3);
    const VarD tokens = VarD::constant(random_matrix(rng, lay.total_rows(), 8));
    const MatD w = window_attention(tokens, lay, WindowPlan::make(n, 2 * n - 1), f.block).value();
    EXPECT_LT(testing::max_abs_diff(w, global_attention(tokens, f.block).value()), 1e-5);
  }
}

// Dense oracle: one masked pass where frame-i queries see exactly the frames
// of window i.
MatD dense_masked(const VarD& tokens, const GridLayout& lay, const WindowPlan& plan, const nn::Block<double>& block) {
  const Eigen::Index n = lay.total_rows(), per = lay.frame_rows();
  nn::AttentionMask mask(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& part = plan.participants[r / per];
    for (Eigen::Index c = 0; c < n; ++c) {
      mask(r, c) = std::find(part.begin(), part.end(), static_cast<int>(c / per)) != part.end();
    }
  }
  return block(tokens, &mask).value();
}

TEST(WindowAttention, MatchesDenseMaskOracle) {
  Fixture f;
  std::mt19937_64 rng(8);
  for (int n = 1; n <= 6; ++n) {
    for (int m = 1; m <= 3; ++m) {
      for (int w : {1, 3, 5}) {
        const GridLayout lay = layout_for(n, m, 2);
        const VarD tokens = VarD::constant(random_matrix(rng, lay.total_rows(), 8));
        const WindowPlan plan = WindowPlan::make(n, w);
        const MatD got = window_attention(tokens, lay, plan, f.block).value();
        EXPECT_LT(testing::max_abs_diff(got, dense_masked(tokens, lay, plan, f.block)), 1e-5)
            << "N=" << n << " M=" << m << " w=" << w;
      }
    }
  }
}

TEST(WindowAttention, CenterPassOrderDoesNotMatter) {
  Fixture f;
  std::mt19937_64 rng(9);
  const GridLayout lay = layout_for(5, 2, 2);
  const VarD tokens = VarD::constant(random_matrix(rng, lay.total_rows(), 8));
  const WindowPlan plan = WindowPlan::make(5, 3);
  const MatD forward = window_attention(tokens, lay, plan, f.block).value();
  // Reverse-order passes, each writing into a running copy while reading the
  // snapshot.
  MatD running = tokens.value();
  const Eigen::Index per = lay.frame_rows();
  for (int i = 4; i >= 0; --i) {
    const auto& part = plan.participants[i];
    const VarD win = ag::slice_rows(tokens, part.front() * per, static_cast<Eigen::Index>(part.size()) * per);
    running.middleRows(i * per, per) = f.block(win).value().middleRows((i - part.front()) * per, per);
  }
  EXPECT_TRUE(bit_equal(forward, running));
}

TEST(WindowAttention, PassCountIsLinearInFrames) {
  Fixture f;
  std::mt19937_64 rng(10);
  long long pairs[2] = {0, 0};
  for (int k = 0; k < 2; ++k) {
    const int n = k == 0 ? 4 : 8;
    const GridLayout lay = layout_for(n, 2, 2);
    AttentionStats stats;
    window_attention(VarD::constant(random_matrix(rng, lay.total_rows(), 8)), lay, WindowPlan::make(n, 3), f.block,
                     &stats);
    EXPECT_EQ(stats.passes, n);
    pairs[k] = stats.token_pairs;
    // Interior windows hold 3 frames, the two boundary ones 2.
    const long long full = 3LL * lay.frame_rows(), edge = 2LL * lay.frame_rows();
    EXPECT_EQ(stats.token_pairs, (n - 2) * full * full + 2 * edge * edge);
    EXPECT_EQ(stats.token_pairs, WindowPlan::make(n, 3).token_pairs(static_cast<int>(lay.frame_rows())));
  }
  EXPECT_LT(pairs[1], 2.5 * pairs[0]);
}

TEST(Aggregate, MeansOverCamerasAndFrames) {
  std::mt19937_64 rng(11);
  const GridLayout lay = layout_for(3, 2, 1);
  const MatD t = random_matrix(rng, lay.total_rows(), 4);
  const PoseTokens<double> p = aggregate_pose_tokens(VarD::constant(t), lay);
  ASSERT_EQ(p.seq_agg.rows(), 3);
  ASSERT_EQ(p.rel_agg.rows(), 2);
  for (int i = 0; i < 3; ++i) {
    const MatD u = t.row(lay.image_row(i, 0) + 1), v = t.row(lay.image_row(i, 1) + 1);
    EXPECT_LT(testing::max_abs_diff(p.seq_agg.value().row(i), (u + v) / 2.0), 1e-15);
  }
  for (int j = 0; j < 2; ++j) {
    MatD s = MatD::Zero(1, 4);
    for (int i = 0; i < 3; ++i) s += t.row(lay.image_row(i, j));
    EXPECT_LT(testing::max_abs_diff(p.rel_agg.value().row(j), s / 3.0), 1e-15);
  }
}

TEST(Aggregate, SingleCameraAndIdenticalTokens) {
  std::mt19937_64 rng(12);
  const GridLayout one = layout_for(2, 1, 1);
  const MatD t = random_matrix(rng, one.total_rows(), 4);
  const PoseTokens<double> p = aggregate_pose_tokens(VarD::constant(t), one);
  for (int i = 0; i < 2; ++i) EXPECT_TRUE(bit_equal(p.seq_agg.value().row(i), t.row(one.image_row(i, 0) + 1)));
  const GridLayout three = layout_for(1, 3, 1);
  MatD same = random_matrix(rng, three.total_rows(), 4);
  for (int j = 1; j < 3; ++j) same.row(three.image_row(0, j) + 1) = same.row(1);
  EXPECT_LT(testing::max_abs_diff(aggregate_pose_tokens(VarD::constant(same), three).seq_agg.value(), same.row(1)),
            1e-15);
}

TEST(McaStage, ShapesAndDegenerateSingleImage) {
  ModelConfig cfg = tiny_config();
  nn::ParameterStore<double> store(13);
  const McaStage<double> mca(store, cfg);
  std::mt19937_64 rng(13);
  const int p = cfg.patches();
  {
    const auto tva = random_tva(rng, 3, 4, p, cfg.dim);
    const TokenGrid<double> g = init_tokens(tva, VarD::constant(random_matrix(rng, 3, cfg.dim)), 4, p);
    AttentionStats stats;
    const TokenGrid<double> out = mca.run(g, &stats);
    ASSERT_EQ(out.layers.size(), 4u);
    EXPECT_EQ(stats.passes, 4 * 4);
    const PoseTokens<double> agg = aggregate_pose_tokens(out.layers.back(), out.layout);
    EXPECT_EQ(agg.seq_agg.rows(), 4);
    EXPECT_EQ(agg.rel_agg.rows(), 3);
  }
  {
    const auto tva = random_tva(rng, 1, 1, p, cfg.dim);
    const TokenGrid<double> g = init_tokens(tva, VarD::constant(random_matrix(rng, 1, cfg.dim)), 1, p);
    AttentionStats stats;
    const TokenGrid<double> out = mca.run(g, &stats);
    EXPECT_EQ(stats.passes, 4);
    EXPECT_EQ(stats.token_pairs, 4LL * (2 + p) * (2 + p));
    for (int l = 0; l < 4; ++l) EXPECT_TRUE(bit_equal(out.layers[l].value(), mca.block(l)(g.layers[l]).value()));
  }
}

TEST(McaStage, LayersUseDistinctWeights) {
  ModelConfig cfg = tiny_config();
  nn::ParameterStore<double> store(14);
  const McaStage<double> mca(store, cfg);
  std::set<std::string> names;
  for (const auto& [name, p] : store.all()) names.insert(name.substr(0, name.find('.', 4)));
  EXPECT_EQ(names, (std::set<std::string>{"mca.block0", "mca.block1", "mca.block2", "mca.block3"}));
  std::mt19937_64 rng(14);
  const VarD x = VarD::constant(random_matrix(rng, 5, cfg.dim));
  EXPECT_GT(testing::max_abs_diff(mca.block(0)(x).value(), mca.block(1)(x).value()), 1e-9);
}

TEST(TokenPairs, WindowedCostGrowsLinearlyInFrames) {
  const int tpi = 6, m = 6;
  const double w16 = window_token_pairs(16, m, tpi, 3), w32 = window_token_pairs(32, m, tpi, 3);
  EXPECT_NEAR(w32 / w16, 2.0, 0.1);
  // Per center pass at most w * M * (2 + P) tokens.
  EXPECT_LE(w16, 16.0 * std::pow(3.0 * m * tpi, 2));
}

TEST(TokenPairs, GlobalRoutingScoresEveryPairOnce) {
  ModelConfig cfg = tiny_config();
  nn::ParameterStore<double> store(15);
  const McaStage<double> mca(store, cfg);
  std::mt19937_64 rng(15);
  const int p = cfg.patches();
  const auto tva = random_tva(rng, 2, 4, p, cfg.dim);
  const TokenGrid<double> g = init_tokens(tva, VarD::constant(random_matrix(rng, 2, cfg.dim)), 4, p);
  AttentionStats stats;
  mca.run(g, &stats, true);
  EXPECT_EQ(stats.passes, 4);
  EXPECT_EQ(stats.token_pairs, 4 * static_cast<long long>(std::pow(4.0 * 2 * (2 + p), 2)));
}

}  // namespace
}  // namespace mcamvggt
