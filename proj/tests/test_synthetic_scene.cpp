// Copyright 2026 The samgar Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

#include "sam/synthetic_scene.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using sam::GeneratorConfig;
using sam::ProposalMode;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("samgar_test_" + name);
  fs::remove_all(dir);
  return dir;
}

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.frames_per_video = 24;
  c.key_frames = 4;
  c.feature_dim = 8;
  return c;
}

}  // namespace

TEST(SyntheticScene, DefaultShape) {
  GeneratorConfig c;
  sam::SceneGenerator gen(c);
  const auto s = gen.sample_at(sam::Split::train, 0, 4);
  EXPECT_EQ(s.visible.label, 4);
  ASSERT_EQ(s.visible.frames.size(), 72u);
  EXPECT_EQ(std::accumulate(s.hidden.key_frames.begin(), s.hidden.key_frames.end(), 0), 6);
  for (std::size_t t = 0; t < 72; ++t) {
    const auto& f = s.visible.frames[t];
    EXPECT_EQ(f.features.rows(), 14u);
    EXPECT_EQ(f.features.cols(), 32u);
    const int keys = std::accumulate(s.hidden.key_proposals[t].begin(), s.hidden.key_proposals[t].end(), 0);
    EXPECT_EQ(keys, s.hidden.key_frames[t] ? 8 : 0);
  }
  // Key frames are one contiguous block.
  const auto first = std::find(s.hidden.key_frames.begin(), s.hidden.key_frames.end(), 1);
  EXPECT_TRUE(std::all_of(first, first + 6, [](auto b) { return b == 1; }));
}

TEST(SyntheticScene, NoiselessKeysSitOnPrototypes) {
  auto c = small_config();
  c.key_noise_sigma = 1e-300;
  sam::SceneGenerator gen(c);
  const auto s = gen.sample_at(sam::Split::test, 3, 2);
  std::size_t seen = 0;
  for (std::size_t t = 0; t < s.visible.frames.size(); ++t) {
    const auto& f = s.visible.frames[t].features;
    for (std::size_t i = 0; i < f.rows(); ++i) {
      if (!s.hidden.key_proposals[t][i]) continue;
      bool matched = false;
      for (int slot = 0; slot < c.key_proposals_per_frame && !matched; ++slot) {
        const auto p = gen.prototype(2, slot);
        matched = std::equal(p.begin(), p.end(), f.row(i).begin(),
                             [](double a, double b) { return std::abs(a - b) < 1e-12; });
      }
      EXPECT_TRUE(matched);
      ++seen;
    }
  }
  EXPECT_EQ(seen, static_cast<std::size_t>(c.key_frames * c.key_proposals_per_frame));
}

TEST(SyntheticScene, PrototypeNormAndCoherence) {
  GeneratorConfig c;
  sam::SceneGenerator gen(c);
  double cross = 0.0;
  int pairs = 0;
  for (int slot = 0; slot < c.key_proposals_per_frame; ++slot) {
    const auto p = gen.prototype(0, slot);
    EXPECT_NEAR(std::sqrt(std::inner_product(p.begin(), p.end(), p.begin(), 0.0)), c.class_sep, 1e-12);
    for (int other = 0; other < slot; ++other) {
      const auto q = gen.prototype(0, other);
      cross += std::inner_product(p.begin(), p.end(), q.begin(), 0.0) / (c.class_sep * c.class_sep);
      ++pairs;
    }
  }
  // Shared direction makes key prototypes positively correlated on average.
  EXPECT_GT(cross / pairs, 0.1);
}

TEST(SyntheticScene, Deterministic) {
  const auto c = small_config();
  sam::SceneGenerator a(c), b(c);
  const auto sa = a.sample_at(sam::Split::train, 5, 1);
  const auto sb = b.sample_at(sam::Split::train, 5, 1);
  ASSERT_EQ(sa.visible.frames.size(), sb.visible.frames.size());
  for (std::size_t t = 0; t < sa.visible.frames.size(); ++t) {
    EXPECT_EQ(sa.visible.frames[t].features, sb.visible.frames[t].features);
    EXPECT_EQ(sa.visible.frames[t].confidence, sb.visible.frames[t].confidence);
  }
  EXPECT_EQ(sa.hidden.key_proposals, sb.hidden.key_proposals);
  const auto other = a.sample_at(sam::Split::test, 5, 1);
  EXPECT_NE(other.visible.frames[0].features, sa.visible.frames[0].features);
}

TEST(SyntheticScene, KeyBlockMovesWithClass) {
  auto c = small_config();
  c.temporal_jitter = 0;
  sam::SceneGenerator gen(c);
  int prev = -1;
  for (int label = 0; label < c.num_classes; ++label) {
    const int start = gen.key_block_start(label);
    EXPECT_GT(start, prev);
    prev = start;
    const auto s = gen.sample_at(sam::Split::train, 0, label);
    EXPECT_EQ(s.hidden.key_frames[static_cast<std::size_t>(start)], 1);
  }
  EXPECT_EQ(gen.key_block_start(0), 0);
  EXPECT_EQ(gen.key_block_start(c.num_classes - 1), c.frames_per_video - c.key_frames);
}

TEST(SyntheticScene, ProbabilityModeBandsAndCounts) {
  auto c = small_config();
  c.mode = ProposalMode::probability;
  sam::SceneGenerator gen(c);
  bool saw_min = false, saw_max = false;
  for (std::size_t i = 0; i < 40; ++i) {
    const auto s = gen.sample_at(sam::Split::train, i, static_cast<int>(i % 9));
    for (std::size_t t = 0; t < s.visible.frames.size(); ++t) {
      const auto& f = s.visible.frames[t];
      const auto n = static_cast<int>(f.confidence.size());
      EXPECT_GE(n, c.min_proposals);
      EXPECT_LE(n, c.max_proposals);
      saw_min |= n == c.min_proposals;
      saw_max |= n == c.max_proposals;
      for (std::size_t p = 0; p < f.confidence.size(); ++p) {
        if (s.hidden.key_proposals[t][p]) {
          EXPECT_GE(f.confidence[p], 0.7);
          EXPECT_LE(f.confidence[p], 1.0);
        } else {
          EXPECT_GE(f.confidence[p], 0.0);
          EXPECT_LT(f.confidence[p], 0.6);
        }
      }
    }
  }
  EXPECT_TRUE(saw_min);
  EXPECT_TRUE(saw_max);
}

TEST(SyntheticScene, QuantityModeConfidenceIsUninformative) {
  GeneratorConfig c;
  sam::SceneGenerator gen(c);
  double key = 0.0, other = 0.0;
  std::size_t nk = 0, no = 0;
  for (std::size_t i = 0; i < 30; ++i) {
    const auto s = gen.sample_at(sam::Split::train, i, static_cast<int>(i % 9));
    for (std::size_t t = 0; t < s.visible.frames.size(); ++t)
      for (std::size_t p = 0; p < 14; ++p) {
        const double v = s.visible.frames[t].confidence[p];
        EXPECT_GE(v, 0.0);
        EXPECT_LT(v, 1.0);
        (s.hidden.key_proposals[t][p] ? key : other) += v;
        (s.hidden.key_proposals[t][p] ? nk : no) += 1;
      }
  }
  EXPECT_NEAR(key / nk, other / no, 0.05);
}

TEST(SyntheticScene, ClassCountsUniformAndImbalanced) {
  GeneratorConfig c;
  EXPECT_EQ(sam::class_counts(c, 2000), (std::vector<std::size_t>{223, 223, 222, 222, 222, 222, 222, 222, 222}));
  c.imbalance = true;
  EXPECT_EQ(sam::class_counts(c, 7624), (std::vector<std::size_t>{798, 434, 1316, 822, 455, 702, 728, 519, 1850}));
  for (std::size_t total : {9u, 100u, 2000u, 2001u}) {
    const auto counts = sam::class_counts(c, total);
    EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), total);
  }
  c.num_classes = 4;
  EXPECT_THROW(c.validate(), sam::ConfigError);
}

TEST(SyntheticScene, SplitLabelsFollowCounts) {
  GeneratorConfig c;
  const auto labels = sam::split_labels(c, sam::Split::test, 500);
  std::vector<std::size_t> seen(9, 0);
  for (int l : labels) ++seen[static_cast<std::size_t>(l)];
  EXPECT_EQ(seen, sam::class_counts(c, 500));
  EXPECT_NE(labels, sam::split_labels(c, sam::Split::train, 500));
}

TEST(SyntheticScene, InvalidConfigsNameTheField) {
  auto c = small_config();
  c.key_frames = 0;
  try {
    c.validate();
    FAIL();
  } catch (const sam::ConfigError& e) {
    EXPECT_EQ(e.path(), "generator.key_frames");
  }
  sam::SceneGenerator gen(small_config());
  EXPECT_THROW(gen.sample_at(sam::Split::train, 0, 9), std::invalid_argument);
  EXPECT_THROW(gen.sample_at(sam::Split::train, 0, -1), std::invalid_argument);
}

TEST(SyntheticScene, PayloadCarriesNoMasks) {
  auto c = small_config();
  sam::SceneGenerator gen(c);
  const auto s = gen.sample_at(sam::Split::train, 0, 0);
  const auto bytes = sam::encode_sample(s.visible, c).bytes();
  std::size_t expected = 8 * 8;
  for (const auto& f : s.visible.frames) expected += 8 + 8 * f.confidence.size() + 8 * f.features.size();
  EXPECT_EQ(bytes.size(), expected);
}

TEST(SyntheticScene, DatasetRoundTripMatchesGenerator) {
  auto c = small_config();
  c.mode = ProposalMode::probability;
  const auto dir = scratch_dir("roundtrip");
  sam::generate_dataset(c, dir, 18, 9);
  const auto ds = sam::load_dataset(dir, true);
  EXPECT_EQ(ds.train.size(), 18u);
  EXPECT_EQ(ds.test.size(), 9u);
  EXPECT_TRUE(ds.train.has_masks());
  EXPECT_EQ(ds.config.mode, ProposalMode::probability);
  sam::GeneratedSplit live(c, sam::Split::test, 9);
  for (std::size_t i = 0; i < 9; ++i) {
    const auto a = ds.test.sample(i);
    const auto b = live.full(i);
    EXPECT_EQ(a.label, b.visible.label);
    ASSERT_EQ(a.frames.size(), b.visible.frames.size());
    for (std::size_t t = 0; t < a.frames.size(); ++t) {
      EXPECT_EQ(a.frames[t].features, b.visible.frames[t].features);
      EXPECT_EQ(a.frames[t].confidence, b.visible.frames[t].confidence);
    }
    EXPECT_EQ(ds.test.masks(i)->key_proposals, b.hidden.key_proposals);
  }
  EXPECT_FALSE(sam::load_dataset(dir, false).train.has_masks());
  fs::remove_all(dir);
}

TEST(SyntheticScene, CorruptPayloadsAreRejected) {
  const auto c = small_config();
  const auto dir = scratch_dir("corrupt");
  sam::generate_dataset(c, dir, 9, 9);
  {
    std::ofstream out(dir / "train" / "000000.bin", std::ios::binary | std::ios::app);
    out << "x";
  }
  const auto ds = sam::load_dataset(dir, false);
  EXPECT_THROW(ds.train.sample(0), sam::io::IoError);
  fs::resize_file(dir / "train" / "000001.bin", 100);
  EXPECT_THROW(ds.train.sample(1), sam::io::IoError);
  EXPECT_THROW(sam::load_dataset(dir / "missing", false), sam::io::IoError);
  fs::remove_all(dir);
}

TEST(SyntheticScene, MaterializedSplitIsIdentical) {
  const auto c = small_config();
  sam::GeneratedSplit live(c, sam::Split::train, 12);
  const auto stored = sam::materialize(live);
  ASSERT_EQ(stored.size(), 12u);
  EXPECT_TRUE(stored.has_masks());
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(stored.label(i), live.label(i));
    EXPECT_EQ(stored.sample(i).frames[5].features, live.sample(i).frames[5].features);
    EXPECT_EQ(stored.masks(i)->key_frames, live.masks(i)->key_frames);
  }
  const auto bare = sam::materialize(sam::StoredSplit(9, {live.sample(0)}));
  EXPECT_FALSE(bare.has_masks());
}

TEST(SyntheticScene, OracleSeesThePlantedSignal) {
  auto c = small_config();
  sam::GeneratedSplit train(c, sam::Split::train, 90);
  sam::GeneratedSplit test(c, sam::Split::test, 45);
  EXPECT_GE(sam::planted_signal_oracle_accuracy(train, test), 0.95);
  sam::StoredSplit bare(9, {train.sample(0)});
  EXPECT_THROW(sam::planted_signal_oracle_accuracy(bare, test), std::invalid_argument);
}

TEST(SyntheticScene, ConfigJsonRoundTrip) {
  auto c = small_config();
  c.mode = ProposalMode::probability;
  c.imbalance = true;
  c.seed = 77;
  const sam::json j = c;
  const auto back = sam::parse_generator_config(j);
  EXPECT_EQ(sam::json(back), j);
  sam::json bad = j;
  bad["bogus"] = 1;
  EXPECT_THROW(sam::parse_generator_config(bad), sam::ConfigError);
}
