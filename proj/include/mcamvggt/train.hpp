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

#ifndef MCAMVGGT_TRAIN_HPP_
#define MCAMVGGT_TRAIN_HPP_

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <json.hpp>

#include "mcamvggt/checkpoint.hpp"
#include "mcamvggt/config.hpp"
#include "mcamvggt/heads.hpp"
#include "mcamvggt/losses.hpp"
#include "mcamvggt/model.hpp"
#include "mcamvggt/pipeline.hpp"

namespace mcamvggt {

template <typename T>
struct LossTerms {
  Var<T> total;
  Var<T> depth;
  Var<T> rel;
  Var<T> seq;
};

template <typename T>
LossTerms<T> model_loss(const ModelOutput<T>& out, const WindowTargets& t, const LossWeights& w) {
  LossTerms<T> l;
  l.depth = depth_loss(out.depth.depth, out.depth.confidence, t.depth, static_cast<T>(w.alpha));
  l.rel = pose_loss(out.rel, ag::Matrix<T>(t.rel_g.cast<T>()), static_cast<T>(w.huber_delta));
  l.seq = pose_loss(out.seq, ag::Matrix<T>(t.seq_g.cast<T>()), static_cast<T>(w.huber_delta));
  l.total = total_loss(l.depth, l.rel, l.seq, w);
  return l;
}

// Scale head applied to raw rel-head output; NaN when no camera is usable.
template <typename T>
double predicted_scale(const Var<T>& rel, const CameraRig& rig) {
  std::vector<Vec3> t;
  for (Eigen::Index j = 0; j < rel.rows(); ++j) {
    t.emplace_back(static_cast<double>(rel.value()(j, 0)), static_cast<double>(rel.value()(j, 1)),
                   static_cast<double>(rel.value()(j, 2)));
  }
  try {
    return scale_head(t, rig);
  } catch (const NoValidCameras&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

template <typename T>
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : b1_(beta1), b2_(beta2), eps_(eps) {}

  // Updates every parameter that has a gradient and is not frozen.
  void step(nn::ParameterStore<T>& store, double lr, const std::function<bool(const std::string&)>& frozen = {}) {
    ++state_.updates;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(state_.updates));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(state_.updates));
    for (auto& [name, p] : store.all()) {
      if (p.grad().size() == 0 || (frozen && frozen(name))) continue;
      auto& m = state_.m[name];
      auto& v = state_.v[name];
      if (m.size() == 0) {
        m.setZero(p.rows(), p.cols());
        v.setZero(p.rows(), p.cols());
      }
      const auto& g = p.grad();
      m = T(b1_) * m + T(1.0 - b1_) * g;
      v = T(b2_) * v + T(1.0 - b2_) * g.cwiseProduct(g);
      p.mutable_value().array() -=
          T(lr / c1) * m.array() / ((v.array() / T(c2)).sqrt() + T(eps_));
    }
  }

  AdamMoments<T>& moments() { return state_; }
  const AdamMoments<T>& moments() const { return state_; }

 private:
  double b1_, b2_, eps_;
  AdamMoments<T> state_;
};

struct TrainRecord {
  int step = 0;
  double total = 0.0;
  double depth = 0.0;
  double rel = 0.0;
  double seq = 0.0;
  double scale_pred = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
  int frames = 0;
  std::string scene;

  json to_json() const {
    json j = {{"step", step}, {"total", total}, {"depth", depth}, {"rel", rel},
              {"seq", seq},   {"lr", lr},       {"wall_ms", wall_ms}};
    j["scale_pred"] = std::isfinite(scale_pred) ? json(scale_pred) : json(nullptr);
    return j;
  }
};

// Scales all gradients so their joint L2 norm is at most max_norm.
template <typename T>
double clip_gradients(nn::ParameterStore<T>& store, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : store.all()) {
    if (p.grad().size() != 0) sq += static_cast<double>(p.grad().squaredNorm());
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& [name, p] : store.all()) {
      if (p.grad().size() != 0) p.mutable_grad() *= s;
    }
  }
  return norm;
}

// Single-writer training over a set of scenes. Each step draws a scene and a
// contiguous window of frames from a stream seeded by (seed, step), so a
// resumed run continues exactly where the interrupted one stopped.
class Trainer {
 public:
  Trainer(DriveModel<float>& model, TrainConfig cfg, std::vector<const SceneData*> scenes)
      : model_(model), cfg_(std::move(cfg)), scenes_(std::move(scenes)) {
    if (scenes_.empty()) throw EmptyScene("no training scenes");
    for (const auto* s : scenes_) {
      if (s->num_frames() < 1) throw EmptyScene("training scene '" + s->spec.name + "' has no frames");
    }
  }

  int total_steps() const { return cfg_.steps + cfg_.finetune_steps; }
  int step() const { return step_; }
  void set_step(int s) { step_ = s; }
  Adam<float>& optimizer() { return adam_; }

  bool finetuning() const { return step_ >= cfg_.steps; }
  double current_lr() const { return finetuning() ? cfg_.lr_finetune : cfg_.lr; }

  TrainRecord run_step() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(detail::splitmix64(cfg_.seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(step_)));
    const SceneData& scene = *scenes_[std::uniform_int_distribution<std::size_t>(0, scenes_.size() - 1)(rng)];
    const int hi = std::min(cfg_.max_frames, scene.num_frames());
    const int lo = std::min(cfg_.min_frames, hi);
    const int n = std::uniform_int_distribution<int>(lo, hi)(rng);
    const int start = std::uniform_int_distribution<int>(0, scene.num_frames() - n)(rng);

    const WindowTargets targets = make_targets(scene, start, n);
    const ModelInput<float> input = make_input<float>(scene, start, n);
    model_.parameters().zero_grad();
    const ModelOutput<float> out = model_.forward(input);
    LossTerms<float> loss;
    try {
      loss = model_loss(out, targets, cfg_.loss);
    } catch (const NonFinite&) {
      last_failure_ = {{"step", step_}, {"scene", scene.spec.name}, {"start", start}, {"frames", n}};
      throw;
    }
    ag::backward(loss.total);
    clip_gradients(model_.parameters(), cfg_.grad_clip);
    const bool ft = finetuning();
    adam_.step(model_.parameters(), current_lr(), [ft](const std::string& name) {
      return ft && name.rfind("tva.", 0) == 0;
    });
    TrainRecord r;
    r.step = step_;
    r.total = loss.total.item();
    r.depth = loss.depth.item();
    r.rel = loss.rel.item();
    r.seq = loss.seq.item();
    r.scale_pred = predicted_scale(out.rel, scene.spec.rig);
    r.lr = ft ? cfg_.lr_finetune : cfg_.lr;
    r.frames = n;
    r.scene = scene.spec.name;
    ++step_;
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }

  // Runs the remaining steps; `on_record` sees each record as it completes.
  void run(const std::function<void(const TrainRecord&)>& on_record = {}) {
    while (step_ < total_steps()) {
      const TrainRecord r = run_step();
      if (on_record) on_record(r);
    }
  }

  const json& last_failure() const { return last_failure_; }

 private:
  DriveModel<float>& model_;
  TrainConfig cfg_;
  std::vector<const SceneData*> scenes_;
  Adam<float> adam_;
  int step_ = 0;
  json last_failure_;
};

}  // namespace mcamvggt

#endif  // MCAMVGGT_TRAIN_HPP_
