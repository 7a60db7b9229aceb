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

#include "gradcheck.hpp"
#include "mcamvggt/autograd.hpp"

namespace mcamvggt {
namespace {

using testing::gradcheck;
using testing::MatD;
using testing::project;
using testing::random_matrix;
using testing::VarD;

constexpr double kTol = 1e-6;

TEST(Autograd, ElementwiseAndLinearOps) {
  std::mt19937_64 rng(1);
  const MatD a = random_matrix(rng, 3, 4), b = random_matrix(rng, 3, 4), w = random_matrix(rng, 4, 5);
  const MatD row = random_matrix(rng, 1, 4);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::matmul(x[0], x[1]), 1); }, {a, w}).max_relative, kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::add(x[0], x[1]), 2); }, {a, b}).max_relative, kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::sub(x[0], x[1]), 3); }, {a, b}).max_relative, kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::mul(x[0], x[1]), 4); }, {a, b}).max_relative, kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::scale(x[0], 2.5), 5); }, {a}).max_relative, kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::add_row(x[0], x[1]), 6); }, {a, row}).max_relative,
            kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::add_scalar(x[0], 0.7), 7); }, {a}).max_relative, kTol);
}

TEST(Autograd, Activations) {
  std::mt19937_64 rng(2);
  MatD a = random_matrix(rng, 4, 5);
  // Keep relu inputs away from the kink.
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    if (std::abs(a.data()[k]) < 0.05) a.data()[k] = 0.3;
  }
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::relu(x[0]), 1); }, {a}).max_relative, kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::gelu(x[0]), 2); }, {a}).max_relative, kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::softplus(x[0]), 3); }, {a}).max_relative, kTol);
}

TEST(Autograd, SoftplusIsPositiveAndStable) {
  MatD a(1, 4);
  a << -800.0, -5.0, 5.0, 800.0;
  const MatD y = ag::softplus(VarD::constant(a)).value();
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    EXPECT_TRUE(std::isfinite(y(0, k)));
    EXPECT_GE(y(0, k), 0.0);
  }
  EXPECT_NEAR(y(0, 3), 800.0, 1e-9);
  EXPECT_NEAR(y(0, 1), std::log1p(std::exp(-5.0)), 1e-15);
}

TEST(Autograd, Reductions) {
  std::mt19937_64 rng(3);
  const MatD a = random_matrix(rng, 3, 3), b = random_matrix(rng, 2, 2);
  EXPECT_LT(gradcheck([](const auto& x) { return ag::sum(ag::mul(x[0], x[0])); }, {a}).max_relative, kTol);
  EXPECT_LT(gradcheck(
                [](const auto& x) {
                  return ag::add_scalars<double>({ag::sum(x[0]), ag::scale(ag::sum(ag::mul(x[1], x[1])), 3.0)});
                },
                {a, b})
                .max_relative,
            kTol);
}

TEST(Autograd, LayerNormMatchesDirectFormulaAndGradients) {
  std::mt19937_64 rng(4);
  const MatD x = random_matrix(rng, 5, 8), g = random_matrix(rng, 1, 8), b = random_matrix(rng, 1, 8);
  const MatD y = ag::layer_norm(VarD::constant(x), VarD::constant(g), VarD::constant(b)).value();
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      EXPECT_NEAR(y(r, c), (x(r, c) - mean) / std::sqrt(var + 1e-5) * g(0, c) + b(0, c), 1e-12);
    }
  }
  EXPECT_LT(gradcheck([](const auto& v) { return project(ag::layer_norm(v[0], v[1], v[2]), 9); }, {x, g, b})
                .max_relative,
            1e-5);
}

TEST(Autograd, RowAndColumnPlumbing) {
  std::mt19937_64 rng(5);
  const MatD a = random_matrix(rng, 4, 3), b = random_matrix(rng, 2, 3), c = random_matrix(rng, 4, 2);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::concat_rows<double>({x[0], x[1], x[0]}), 1); }, {a, b})
                .max_relative,
            kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::concat_cols<double>({x[0], x[1]}), 2); }, {a, c})
                .max_relative,
            kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::slice_rows(x[0], 1, 2), 3); }, {a}).max_relative, kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::slice_cols(x[0], 1, 2), 4); }, {a}).max_relative, kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::gather_rows<double>(x[0], {3, 0, 3}), 5); }, {a})
                .max_relative,
            kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::gather_mean_rows<double>(x[0], {{0, 1}, {2}, {1, 2, 3}}), 6); },
                      {a})
                .max_relative,
            kTol);
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::gather_elements<double>(x[0], {0, 5, -1, 11, 5, 2}, 2, 3), 7); },
                      {a})
                .max_relative,
            kTol);
}

TEST(Autograd, GatherValues) {
  MatD a(2, 2);
  a << 1, 2, 3, 4;
  const MatD g = ag::gather_elements<double>(VarD::constant(a), {3, -1, 0}, 1, 3).value();
  EXPECT_EQ(g(0, 0), 4.0);
  EXPECT_EQ(g(0, 1), 0.0);
  EXPECT_EQ(g(0, 2), 1.0);
  const MatD m = ag::gather_mean_rows<double>(VarD::constant(a), {{0, 1}}).value();
  EXPECT_EQ(m(0, 0), 2.0);
  EXPECT_EQ(m(0, 1), 3.0);
}

// Direct per-head softmax attention with an optional mask.
MatD naive_attention(const MatD& q, const MatD& k, const MatD& v, int heads,
                     const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>* mask) {
  const Eigen::Index dh = q.cols() / heads;
  MatD out = MatD::Zero(q.rows(), q.cols());
  for (int h = 0; h < heads; ++h) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      std::vector<double> s(k.rows(), -INFINITY);
      double mx = -INFINITY;
      for (Eigen::Index j = 0; j < k.rows(); ++j) {
        if (mask && !(*mask)(i, j)) continue;
        double dot = 0.0;
        for (Eigen::Index c = 0; c < dh; ++c) dot += q(i, h * dh + c) * k(j, h * dh + c);
        s[j] = dot / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, s[j]);
      }
      double z = 0.0;
      for (auto& x : s) z += (x = std::exp(x - mx));
      for (Eigen::Index j = 0; j < k.rows(); ++j) {
        for (Eigen::Index c = 0; c < dh; ++c) out(i, h * dh + c) += s[j] / z * v(j, h * dh + c);
      }
    }
  }
  return out;
}

TEST(Autograd, AttentionMatchesNaiveLoops) {
  std::mt19937_64 rng(6);
  const MatD q = random_matrix(rng, 5, 8), k = random_matrix(rng, 7, 8), v = random_matrix(rng, 7, 8);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask(5, 7);
  std::bernoulli_distribution keep(0.6);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng);
  for (Eigen::Index i = 0; i < 5; ++i) mask(i, i) = true;
  const MatD full = ag::attention(VarD::constant(q), VarD::constant(k), VarD::constant(v), 2).value();
  EXPECT_LT((full - naive_attention(q, k, v, 2, nullptr)).cwiseAbs().maxCoeff(), 1e-12);
  const MatD masked = ag::attention(VarD::constant(q), VarD::constant(k), VarD::constant(v), 2, &mask).value();
  EXPECT_LT((masked - naive_attention(q, k, v, 2, &mask)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Autograd, AttentionGradients) {
  std::mt19937_64 rng(7);
  const MatD q = random_matrix(rng, 4, 6), k = random_matrix(rng, 5, 6), v = random_matrix(rng, 5, 6);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask(4, 5);
  mask.setConstant(true);
  mask(0, 1) = mask(2, 4) = mask(3, 0) = false;
  EXPECT_LT(gradcheck([](const auto& x) { return project(ag::attention(x[0], x[1], x[2], 3), 1); }, {q, k, v})
                .max_relative,
            1e-5);
  EXPECT_LT(gradcheck([&mask](const auto& x) { return project(ag::attention(x[0], x[1], x[2], 2, &mask), 2); },
                      {q, k, v})
                .max_relative,
            1e-5);
}

TEST(Autograd, Im2colValuesAndGradients) {
  std::mt19937_64 rng(8);
  const MatD x = random_matrix(rng, 2 * 3 * 4, 2);
  const MatD cols = ag::im2col3x3(VarD::constant(x), 2, 3, 4).value();
  ASSERT_EQ(cols.cols(), 18);
  for (int b = 0; b < 2; ++b) {
    for (int y = 0; y < 3; ++y) {
      for (int xx = 0; xx < 4; ++xx) {
        const Eigen::Index row = (b * 3 + y) * 4 + xx;
        for (int t = 0; t < 9; ++t) {
          const int yy = y + t / 3 - 1, xs = xx + t % 3 - 1;
          for (int c = 0; c < 2; ++c) {
            const double expect = (yy < 0 || yy >= 3 || xs < 0 || xs >= 4) ? 0.0 : x((b * 3 + yy) * 4 + xs, c);
            EXPECT_EQ(cols(row, t * 2 + c), expect);
          }
        }
      }
    }
  }
  EXPECT_LT(gradcheck([](const auto& v) { return project(ag::im2col3x3(v[0], 2, 3, 4), 1); }, {x}).max_relative,
            kTol);
}

TEST(Autograd, BilinearResize) {
  std::mt19937_64 rng(9);
  MatD x = random_matrix(rng, 2 * 2 * 3, 2);
  // Identity resize.
  EXPECT_LT((ag::resize_bilinear(VarD::constant(x), 2, 2, 3, 2, 3).value() - x).cwiseAbs().maxCoeff(), 1e-15);
  // Constant images stay constant at any size.
  const MatD c = MatD::Constant(2 * 2 * 3, 2, 1.75);
  const MatD up = ag::resize_bilinear(VarD::constant(c), 2, 2, 3, 5, 7).value();
  EXPECT_EQ(up.rows(), 2 * 5 * 7);
  EXPECT_LT((up.array() - 1.75).abs().maxCoeff(), 1e-15);
  // x2 upsampling of a 1x2 row: half-pixel centers give 3/4 and 1/4 weights.
  MatD row(2, 1);
  row << 0.0, 4.0;
  const MatD r = ag::resize_bilinear(VarD::constant(row), 1, 1, 2, 1, 4).value();
  EXPECT_NEAR(r(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(r(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(r(2, 0), 3.0, 1e-15);
  EXPECT_NEAR(r(3, 0), 4.0, 1e-15);
  EXPECT_LT(gradcheck([](const auto& v) { return project(ag::resize_bilinear(v[0], 2, 2, 3, 4, 6), 1); }, {x})
                .max_relative,
            kTol);
}

TEST(Autograd, NoGradGuardSkipsRecording) {
  const VarD a = VarD::leaf(MatD::Ones(2, 2));
  {
    ag::NoGradGuard guard;
    EXPECT_FALSE(ag::grad_enabled());
    const VarD y = ag::scale(a, 2.0);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(ag::grad_enabled());
  EXPECT_TRUE(ag::scale(a, 2.0).requires_grad());
}

TEST(Autograd, SharedSubexpressionsAccumulate) {
  const VarD a = VarD::leaf(MatD::Constant(1, 1, 3.0));
  const VarD b = ag::mul(a, a);
  const VarD y = ag::add(b, ag::scale(b, 2.0));  // 3 a^2
  ag::backward(y);
  EXPECT_DOUBLE_EQ(a.grad()(0, 0), 18.0);
}

}  // namespace
}  // namespace mcamvggt
