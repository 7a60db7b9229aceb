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

#ifndef MCAMVGGT_BENCH_HPP_
#define MCAMVGGT_BENCH_HPP_

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcamvggt/config.hpp"
#include "mcamvggt/mca.hpp"
#include "mcamvggt/nn.hpp"

namespace mcamvggt {

struct BenchRow {
  std::string mode;  // "window" | "global"
  int frames = 0;
  int window = 0;    // 0 for global mode
  int cameras = 0;
  double median_ms = 0.0;
  std::vector<double> runs_ms;
  long long passes = 0;
  long long token_pairs = 0;  // per selected layer

  nlohmann::json to_json() const {
    return {{"mode", mode},       {"frames", frames},   {"window", window},
            {"cameras", cameras}, {"median_ms", median_ms}, {"runs_ms", runs_ms},
            {"passes", passes},   {"token_pairs", token_pairs}};
  }
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Closed-form window-mode pair count for one layer.
inline long long window_token_pairs(int frames, int cameras, int tokens_per_image, int window) {
  return WindowPlan::make(frames, window).token_pairs(cameras * tokens_per_image);
}

// Times the four MCA blocks over a random token grid of the configured shape.
inline BenchRow bench_one(const McaStage<float>& stage, const ModelConfig& cfg, const std::string& mode, int frames,
                          int window, int cameras, int runs, int warmup) {
  ag::NoGradGuard guard;
  TokenGrid<float> grid;
  grid.layout = {frames, cameras, 2 + cfg.patches(), 0, 1, 2};
  std::mt19937_64 rng(static_cast<std::uint64_t>(frames) * 1315423911ull + window);
  std::normal_distribution<float> dist(0.f, 1.f);
  for (int l = 0; l < 4; ++l) {
    ag::Matrix<float> m(grid.layout.total_rows(), cfg.dim);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
    grid.layers.push_back(Var<float>::constant(std::move(m)));
  }
  McaStage<float> s = stage;
  s.set_window(window > 0 ? window : 1);
  const bool global = mode == "global";
  BenchRow row{mode, frames, global ? 0 : window, cameras, 0.0, {}, 0, 0};
  for (int r = 0; r < warmup + runs; ++r) {
    AttentionStats stats;
    const auto t0 = std::chrono::steady_clock::now();
    const TokenGrid<float> out = s.run(grid, &stats, global);
    const auto t1 = std::chrono::steady_clock::now();
    if (r >= warmup) row.runs_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    row.passes = stats.passes / 4;
    row.token_pairs = stats.token_pairs / 4;
  }
  row.median_ms = median(row.runs_ms);
  return row;
}

// Median latency of `runs` timed repetitions after `warmup` untimed ones, per
// (mode, N, w). Global mode ignores w and is measured once per N.
inline std::vector<BenchRow> bench_attention(const ModelConfig& model_cfg, const BenchConfig& b) {
  ModelConfig cfg = model_cfg;
  cfg.variant = Variant::kFull;
  cfg.validate();
  nn::ParameterStore<float> store(cfg.seed);
  const McaStage<float> stage(store, cfg);
  std::vector<BenchRow> rows;
  for (const auto& mode : b.modes) {
    for (int n : b.frames) {
      if (mode == "global") {
        rows.push_back(bench_one(stage, cfg, mode, n, 0, b.cameras, b.runs, b.warmup));
        continue;
      }
      for (int w : b.windows) rows.push_back(bench_one(stage, cfg, mode, n, w, b.cameras, b.runs, b.warmup));
    }
  }
  return rows;
}

inline nlohmann::json bench_to_json(const std::vector<BenchRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) out.push_back(r.to_json());
  return out;
}

inline std::string bench_table(const std::vector<BenchRow>& rows) {
  std::string s = "mode     frames  window  cameras   median_ms   token_pairs\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-8s %6d  %6s  %7d  %10.2f  %12lld\n", r.mode.c_str(), r.frames,
                  r.window > 0 ? std::to_string(r.window).c_str() : "all", r.cameras, r.median_ms, r.token_pairs);
    s += line;
  }
  return s;
}

}  // namespace mcamvggt

#endif  // MCAMVGGT_BENCH_HPP_
