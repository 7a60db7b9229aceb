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
#include <fstream>
#include <iterator>
#include <string>

#include <gtest/gtest.h>

#include "mcamvggt/config.hpp"
#include "mcamvggt/dataset.hpp"
#include "test_util.hpp"

namespace mcamvggt {
namespace {

namespace fs = std::filesystem;

SceneConfig small_config(int frames, int train = 1, int eval = 0) {
  SceneConfig c;
  c.image_width = 28;
  c.image_height = 14;
  c.train_scenes = train;
  c.eval_scenes = eval;
  c.options.num_frames = frames;
  c.options.lidar_rays = 128;
  c.seed = 21;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Dataset, SixCamerasTenFramesGiveSixtyPairs) {
  const fs::path dir = testing::scratch_dir("sixty");
  write_dataset(generate_dataset(small_config(10), 1), dir);
  int images = 0, depths = 0, masks = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    images += name == "image.raw";
    depths += name == "depth.raw";
    masks += name == "mask.raw";
  }
  EXPECT_EQ(images, 60);
  EXPECT_EQ(depths, 60);
  EXPECT_EQ(masks, 60);
  EXPECT_TRUE(fs::exists(dir / "rig.json"));
  EXPECT_TRUE(fs::exists(dir / "scene" / "train_000" / "frames" / "9" / "poses.json"));
  fs::remove_all(dir);
}

TEST(Dataset, RoundTripPreservesFrames) {
  const fs::path dir = testing::scratch_dir("roundtrip");
  const Dataset ds = generate_dataset(small_config(2, 1, 1), 1);
  write_dataset(ds, dir);
  const Dataset back = read_dataset(dir);
  ASSERT_EQ(back.scenes.size(), 2u);
  EXPECT_EQ(back.split("train").size(), 1u);
  EXPECT_EQ(back.eval_scenes().front()->spec.name, "eval_000");
  for (std::size_t s = 0; s < ds.scenes.size(); ++s) {
    const auto& a = ds.scenes[s];
    const auto& b = back.scenes[s];
    EXPECT_EQ(a.spec.name, b.spec.name);
    ASSERT_EQ(a.frames.size(), b.frames.size());
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
      EXPECT_LT((a.frames[i].ego_pose.as_matrix() - b.frames[i].ego_pose.as_matrix()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_EQ(a.frames[i].sparse_points.size(), b.frames[i].sparse_points.size());
      for (std::size_t j = 0; j < a.frames[i].cameras.size(); ++j) {
        const auto& ca = a.frames[i].cameras[j];
        const auto& cb = b.frames[i].cameras[j];
        EXPECT_EQ(ca.image.rgb, cb.image.rgb);
        EXPECT_EQ(ca.depth.valid, cb.depth.valid);
        for (std::size_t k = 0; k < ca.depth.size(); ++k) {
          EXPECT_NEAR(ca.depth.depth[k], cb.depth.depth[k], 1e-6 * std::max(1.0, ca.depth.depth[k]));
        }
      }
    }
  }
  fs::remove_all(dir);
}

TEST(Dataset, SameSeedGivesByteIdenticalFiles) {
  const fs::path a = testing::scratch_dir("det_a"), b = testing::scratch_dir("det_b");
  write_dataset(generate_dataset(small_config(3), 1), a);
  write_dataset(generate_dataset(small_config(3), 4), b);
  int compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(b / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
    ++compared;
  }
  EXPECT_GT(compared, 18);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Dataset, SplitsAndSeedsAreDistinct) {
  const auto specs = scene_specs(small_config(2, 2, 1));
  ASSERT_EQ(specs.size(), 3u);
  EXPECT_EQ(specs[0].second.name, "train_000");
  EXPECT_EQ(specs[2].first, "eval");
  EXPECT_NE(specs[0].second.rng_seed, specs[1].second.rng_seed);
  EXPECT_NE(specs[0].second.rng_seed, specs[2].second.rng_seed);
  SceneConfig bad = small_config(2);
  bad.kind = "explicit";
  EXPECT_THROW(scene_specs(bad), ConfigError);
}

TEST(Dataset, ReadingMissingOrMalformedDataFails) {
  const fs::path dir = testing::scratch_dir("broken");
  EXPECT_THROW(read_dataset(dir), IoError);
  write_dataset(generate_dataset(small_config(1), 1), dir);
  io::write_raw(dir / "scene" / "train_000" / "frames" / "0" / "CAM_FRONT" / "image.raw", {1, 1, 3, {0, 0, 0}});
  EXPECT_THROW(read_dataset(dir), IoError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace mcamvggt
