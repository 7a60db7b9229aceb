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

#include <filesystem>
#include <vector>

#include <gtest/gtest.h>

#include "mcamvggt/checkpoint.hpp"
#include "gradcheck.hpp"
#include "mcamvggt/train.hpp"
#include "test_util.hpp"

namespace mcamvggt {
namespace {

namespace fs = std::filesystem;

TrainConfig quick_train(int steps, double lr = 2e-3) {
  TrainConfig c;
  c.steps = steps;
  c.lr = lr;
  c.min_frames = 2;
  c.max_frames = 4;
  c.seed = 5;
  return c;
}

const SceneData& shared_scene() {
  static const SceneData scene = testing::toy_scene(2, 6, 28, 14, 9);
  return scene;
}

bool same_parameters(const DriveModel<float>& a, const DriveModel<float>& b) {
  const auto& pa = a.parameters().all();
  const auto& pb = b.parameters().all();
  for (std::size_t k = 0; k < pa.size(); ++k) {
    if (!(pa[k].second.value().array() == pb[k].second.value().array()).all()) return false;
  }
  return true;
}

using testing::VarD;

TEST(Adam, FirstStepMovesEachCoordinateByLearningRate) {
  nn::ParameterStore<double> store(1);
  VarD p = store.constant("p", 1, 3, 1.0);
  p.mutable_grad() = (ag::Matrix<double>(1, 3) << 0.5, -2.0, 0.0).finished();
  Adam<double> adam;
  adam.step(store, 0.1);
  EXPECT_NEAR(p.value()(0, 0), 0.9, 1e-6);
  EXPECT_NEAR(p.value()(0, 1), 1.1, 1e-6);
  EXPECT_EQ(p.value()(0, 2), 1.0);
  EXPECT_EQ(adam.moments().updates, 1);
}

TEST(Adam, FrozenParametersAreLeftAlone) {
  nn::ParameterStore<double> store(2);
  VarD a = store.constant("tva.a", 1, 2, 1.0);
  VarD b = store.constant("heads.b", 1, 2, 1.0);
  a.mutable_grad() = ag::Matrix<double>::Ones(1, 2);
  b.mutable_grad() = ag::Matrix<double>::Ones(1, 2);
  Adam<double> adam;
  adam.step(store, 0.1, [](const std::string& n) { return n.rfind("tva.", 0) == 0; });
  EXPECT_EQ(a.value()(0, 0), 1.0);
  EXPECT_LT(b.value()(0, 0), 1.0);
}

TEST(ClipGradients, RescalesToMaxNorm) {
  nn::ParameterStore<double> store(3);
  VarD a = store.constant("a", 1, 2, 0.0);
  a.mutable_grad() = (ag::Matrix<double>(1, 2) << 3.0, 4.0).finished();
  EXPECT_NEAR(clip_gradients(store, 1.0), 5.0, 1e-12);
  EXPECT_NEAR(a.grad().norm(), 1.0, 1e-12);
  EXPECT_NEAR(clip_gradients(store, 10.0), 1.0, 1e-12);
  EXPECT_NEAR(a.grad().norm(), 1.0, 1e-12);
}

TEST(Trainer, LossDecreasesAndRecordsCarryLearningRate) {
  DriveModel<float> model(testing::tiny_config());
  Trainer trainer(model, quick_train(80, 3e-3), {&shared_scene()});
  std::vector<TrainRecord> log;
  trainer.run([&](const TrainRecord& r) { log.push_back(r); });
  ASSERT_EQ(log.size(), 80u);
  double first = 0.0, last = 0.0;
  for (int k = 0; k < 10; ++k) {
    first += log[k].total / 10.0;
    last += log[log.size() - 1 - k].total / 10.0;
  }
  EXPECT_LT(last, 0.8 * first);
  for (const auto& r : log) {
    EXPECT_EQ(r.lr, 3e-3);
    EXPECT_GE(r.frames, 2);
    EXPECT_LE(r.frames, 4);
    EXPECT_NEAR(r.total, 0.1 * r.depth + r.rel + r.seq, 1e-4 * std::max(1.0, r.total));
  }
  const json j = log.back().to_json();
  for (const char* k : {"step", "total", "depth", "rel", "seq", "scale_pred", "lr", "wall_ms"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
}

TEST(Trainer, FinetuneFreezesTemporalBackbone) {
  DriveModel<float> model(testing::tiny_config());
  TrainConfig cfg = quick_train(1);
  cfg.finetune_steps = 2;
  cfg.lr_finetune = 5e-4;
  Trainer trainer(model, cfg, {&shared_scene()});
  const TrainRecord first = trainer.run_step();
  EXPECT_EQ(first.lr, cfg.lr);
  std::map<std::string, ag::Matrix<float>> before;
  for (const auto& [name, p] : model.parameters().all()) before[name] = p.value();
  const TrainRecord second = trainer.run_step();
  EXPECT_EQ(second.lr, 5e-4);
  bool head_moved = false;
  for (const auto& [name, p] : model.parameters().all()) {
    const bool same = (p.value().array() == before[name].array()).all();
    if (name.rfind("tva.", 0) == 0) {
      EXPECT_TRUE(same) << name;
    } else if (!same) {
      head_moved = true;
    }
  }
  EXPECT_TRUE(head_moved);
}

TEST(Trainer, SameSeedSameRun) {
  DriveModel<float> a(testing::tiny_config()), b(testing::tiny_config());
  Trainer ta(a, quick_train(4), {&shared_scene()}), tb(b, quick_train(4), {&shared_scene()});
  for (int k = 0; k < 4; ++k) {
    const TrainRecord ra = ta.run_step(), rb = tb.run_step();
    EXPECT_EQ(ra.total, rb.total);
    EXPECT_EQ(ra.frames, rb.frames);
  }
  EXPECT_TRUE(same_parameters(a, b));
}

TEST(Trainer, ResumeFromCheckpointMatchesUninterruptedRun) {
  const fs::path dir = testing::scratch_dir("resume");
  DriveModel<float> straight(testing::tiny_config());
  Trainer ts(straight, quick_train(6), {&shared_scene()});
  ts.run();

  DriveModel<float> first(testing::tiny_config());
  Trainer t1(first, quick_train(6), {&shared_scene()});
  for (int k = 0; k < 3; ++k) t1.run_step();
  save_checkpoint(dir / "c.bin", first, t1.step(), &t1.optimizer().moments());

  DriveModel<float> resumed(testing::tiny_config());
  Trainer t2(resumed, quick_train(6), {&shared_scene()});
  const CheckpointInfo info = load_checkpoint(dir / "c.bin", resumed, &t2.optimizer().moments());
  t2.set_step(info.step);
  t2.run();
  EXPECT_EQ(t2.step(), 6);
  EXPECT_TRUE(same_parameters(straight, resumed));
  fs::remove_all(dir);
}

TEST(Trainer, RejectsEmptySceneList) {
  DriveModel<float> model(testing::tiny_config());
  EXPECT_THROW(Trainer(model, quick_train(1), {}), EmptyScene);
}

}  // namespace
}  // namespace mcamvggt
