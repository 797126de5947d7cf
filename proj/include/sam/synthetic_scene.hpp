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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sam/binary_io.hpp"
#include "sam/json_fields.hpp"
#include "sam/linalg.hpp"
#include "sam/rng.hpp"

namespace sam {

enum class ProposalMode { quantity, probability };

inline const char* to_string(ProposalMode m) {
  return m == ProposalMode::quantity ? "quantity" : "probability";
}

/// Basketball activity names used when the dataset has nine classes.
inline const std::array<const char*, 9> kNbaClassNames = {
    "2p-succ.",         "2p-fail.-off.",       "2p-fail.-def.",
    "2p-layup-succ.",   "2p-layup-fail.-off.", "2p-layup-fail.-def.",
    "3p-succ.",         "3p-fail.-off.",       "3p-fail.-def."};

/// Training-split clip counts per activity, used as the imbalance profile.
inline const std::array<double, 9> kNbaTrainCounts = {798, 434, 1316, 822, 455,
                                                      702, 728, 519,  1850};

/**
 * Parameters of the synthetic weakly-supervised scene.
 *
 * Key proposals sit near class prototypes; every other proposal is an
 * outlier drawn from one class-independent distribution. Key frames form a
 * contiguous block whose position on the timeline depends on the class.
 */
struct GeneratorConfig {
  int num_classes = 9;
  int feature_dim = 32;
  int frames_per_video = 72;
  int key_frames = 6;
  ProposalMode mode = ProposalMode::quantity;
  int proposals_per_frame = 14;  // quantity mode
  int min_proposals = 10;        // probability mode range, inclusive
  int max_proposals = 21;
  int key_proposals_per_frame = 8;
  double key_noise_sigma = 0.3;
  double outlier_scale = 1.0;
  double class_sep = 2.0;
  /// Weight of the direction shared by every key prototype (0 = unrelated keys).
  double key_coherence = 0.3;
  /// Magnitudes are per coordinate when true (prototype norm class_sep * sqrt(D)),
  /// otherwise per vector (sigma / sqrt(D) per coordinate).
  bool noise_per_coordinate = false;
  /// Max per-video shift of the key block, in frames.
  int temporal_jitter = 3;
  bool imbalance = false;
  std::uint64_t seed = 0;

  int max_frame_proposals() const {
    return mode == ProposalMode::quantity ? proposals_per_frame : max_proposals;
  }

  void validate(const std::string& prefix = "generator") const {
    auto p = [&](const char* f) { return prefix.empty() ? std::string(f) : prefix + "." + f; };
    if (num_classes < 2) throw ConfigError(p("num_classes"), "must be >= 2");
    if (feature_dim < 1) throw ConfigError(p("feature_dim"), "must be >= 1");
    if (frames_per_video < 1) throw ConfigError(p("frames_per_video"), "must be >= 1");
    if (key_frames < 1 || key_frames > frames_per_video) {
      throw ConfigError(p("key_frames"), "must be in [1, frames_per_video]");
    }
    if (key_proposals_per_frame < 1) throw ConfigError(p("key_proposals_per_frame"), "must be >= 1");
    if (mode == ProposalMode::quantity) {
      if (proposals_per_frame < key_proposals_per_frame) {
        throw ConfigError(p("proposals_per_frame"), "must be >= key_proposals_per_frame");
      }
    } else {
      if (min_proposals < key_proposals_per_frame) {
        throw ConfigError(p("min_proposals"), "must be >= key_proposals_per_frame");
      }
      if (max_proposals < min_proposals) throw ConfigError(p("max_proposals"), "must be >= min_proposals");
    }
    if (!(key_noise_sigma > 0)) throw ConfigError(p("key_noise_sigma"), "must be > 0");
    if (!(outlier_scale > 0)) throw ConfigError(p("outlier_scale"), "must be > 0");
    if (!(class_sep > 0)) throw ConfigError(p("class_sep"), "must be > 0");
    if (!(key_coherence >= 0 && key_coherence < 1)) {
      throw ConfigError(p("key_coherence"), "must be in [0, 1)");
    }
    if (temporal_jitter < 0) throw ConfigError(p("temporal_jitter"), "must be >= 0");
    if (imbalance && num_classes != static_cast<int>(kNbaTrainCounts.size())) {
      throw ConfigError(p("imbalance"), "the imbalance profile is defined for 9 classes");
    }
  }

  std::vector<std::string> class_names() const {
    std::vector<std::string> names;
    for (int c = 0; c < num_classes; ++c) {
      names.push_back(num_classes == 9 ? std::string(kNbaClassNames[c]) : "class_" + std::to_string(c));
    }
    return names;
  }
};

inline void to_json(json& j, const GeneratorConfig& c) {
  j = json{{"num_classes", c.num_classes},
           {"feature_dim", c.feature_dim},
           {"frames_per_video", c.frames_per_video},
           {"key_frames", c.key_frames},
           {"mode", to_string(c.mode)},
           {"proposals_per_frame", c.proposals_per_frame},
           {"min_proposals", c.min_proposals},
           {"max_proposals", c.max_proposals},
           {"key_proposals_per_frame", c.key_proposals_per_frame},
           {"key_noise_sigma", c.key_noise_sigma},
           {"outlier_scale", c.outlier_scale},
           {"class_sep", c.class_sep},
           {"key_coherence", c.key_coherence},
           {"noise_per_coordinate", c.noise_per_coordinate},
           {"temporal_jitter", c.temporal_jitter},
           {"imbalance", c.imbalance},
           {"seed", c.seed}};
}

/// Strict parse; unknown keys and wrong types are reported with their path.
inline GeneratorConfig parse_generator_config(const json& j, const std::string& prefix = "generator") {
  GeneratorConfig c;
  FieldReader r(j, prefix);
  r.read("num_classes", c.num_classes);
  r.read("feature_dim", c.feature_dim);
  r.read("frames_per_video", c.frames_per_video);
  r.read("key_frames", c.key_frames);
  std::string mode = to_string(c.mode);
  r.read("mode", mode);
  if (mode == "quantity") {
    c.mode = ProposalMode::quantity;
  } else if (mode == "probability") {
    c.mode = ProposalMode::probability;
  } else {
    throw ConfigError(r.path("mode"), "expected \"quantity\" or \"probability\"");
  }
  r.read("proposals_per_frame", c.proposals_per_frame);
  r.read("min_proposals", c.min_proposals);
  r.read("max_proposals", c.max_proposals);
  r.read("key_proposals_per_frame", c.key_proposals_per_frame);
  r.read("key_noise_sigma", c.key_noise_sigma);
  r.read("outlier_scale", c.outlier_scale);
  r.read("class_sep", c.class_sep);
  r.read("key_coherence", c.key_coherence);
  r.read("noise_per_coordinate", c.noise_per_coordinate);
  r.read("temporal_jitter", c.temporal_jitter);
  r.read("imbalance", c.imbalance);
  r.read("seed", c.seed);
  r.reject_unknown();
  c.validate(prefix);
  return c;
}

/// One frame as the training path sees it: proposal features and detector confidences.
struct FrameData {
  Matrix<double> features;  // n x D
  std::vector<double> confidence;
};

/// The weakly-labelled view of a video: frames plus one class label, nothing else.
struct VideoSample {
  int label = 0;
  std::vector<FrameData> frames;
};

/// Ground truth withheld from training; consumed by evaluation only.
struct SampleMasks {
  std::vector<std::uint8_t> key_frames;                  // length T
  std::vector<std::vector<std::uint8_t>> key_proposals;  // per frame, length n_t
};

struct GeneratedSample {
  VideoSample visible;
  SampleMasks hidden;
};

enum class Split : std::uint64_t { train = 0, test = 1 };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

/**
 * Holds the per-class prototypes for one (config, seed) pair and draws
 * samples from it.
 */
class SceneGenerator {
 public:
  explicit SceneGenerator(GeneratorConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build_prototypes();
  }

  const GeneratorConfig& config() const noexcept { return cfg_; }

  /// Prototype of key slot `slot` for class `label`.
  std::span<const double> prototype(int label, int slot) const {
    return prototypes_[static_cast<std::size_t>(label)].row(static_cast<std::size_t>(slot));
  }

  /// First frame of the key block for a class before per-video jitter.
  int key_block_start(int label) const {
    const int span = cfg_.frames_per_video - cfg_.key_frames;
    if (cfg_.num_classes == 1) return span / 2;
    return static_cast<int>(std::lround(static_cast<double>(label) * span / (cfg_.num_classes - 1)));
  }

  template <typename R>
  GeneratedSample sample(int label, R& rng) const {
    if (label < 0 || label >= cfg_.num_classes) {
      throw std::invalid_argument("generate_sample: invalid class id " + std::to_string(label));
    }
    const auto d = static_cast<std::size_t>(cfg_.feature_dim);
    const double coord = cfg_.noise_per_coordinate ? 1.0 : 1.0 / std::sqrt(static_cast<double>(d));
    std::normal_distribution<double> key_noise(0.0, cfg_.key_noise_sigma * coord);
    std::normal_distribution<double> outlier(0.0, cfg_.outlier_scale * coord);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    GeneratedSample out;
    out.visible.label = label;
    const int t_total = cfg_.frames_per_video;
    const int span = t_total - cfg_.key_frames;
    int start = key_block_start(label);
    if (cfg_.temporal_jitter > 0) {
      std::uniform_int_distribution<int> jitter(-cfg_.temporal_jitter, cfg_.temporal_jitter);
      start = std::clamp(start + jitter(rng), 0, span);
    }
    out.hidden.key_frames.assign(static_cast<std::size_t>(t_total), 0);
    for (int t = start; t < start + cfg_.key_frames; ++t) out.hidden.key_frames[static_cast<std::size_t>(t)] = 1;

    for (int t = 0; t < t_total; ++t) {
      const bool key_frame = out.hidden.key_frames[static_cast<std::size_t>(t)] != 0;
      int n = cfg_.proposals_per_frame;
      if (cfg_.mode == ProposalMode::probability) {
        n = std::uniform_int_distribution<int>(cfg_.min_proposals, cfg_.max_proposals)(rng);
      }
      const int n_key = key_frame ? cfg_.key_proposals_per_frame : 0;
      // slot_of[pos] = prototype slot for key positions, -1 for outliers.
      std::vector<int> slot_of(static_cast<std::size_t>(n), -1);
      for (int s = 0; s < n_key; ++s) slot_of[static_cast<std::size_t>(s)] = s;
      std::shuffle(slot_of.begin(), slot_of.end(), rng);

      FrameData frame{Matrix<double>(static_cast<std::size_t>(n), d), std::vector<double>(static_cast<std::size_t>(n))};
      std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 0);
      for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
        auto row = frame.features.row(i);
        const int slot = slot_of[i];
        if (slot >= 0) {
          const auto proto = prototype(label, slot);
          for (std::size_t c = 0; c < d; ++c) row[c] = proto[c] + key_noise(rng);
          mask[i] = 1;
        } else {
          for (std::size_t c = 0; c < d; ++c) row[c] = outlier(rng);
        }
        frame.confidence[i] = confidence(slot >= 0, unit(rng));
      }
      out.visible.frames.push_back(std::move(frame));
      out.hidden.key_proposals.push_back(std::move(mask));
    }
    return out;
  }

  /// Deterministic sample for (split, index) of this generator's seed.
  GeneratedSample sample_at(Split split, std::size_t index, int label) const {
    auto rng = derive_rng({cfg_.seed, stream::sample, static_cast<std::uint64_t>(split), index});
    return sample(label, rng);
  }

 private:
  // Quantity mode models a detector whose retained boxes are all plausible
  // people: confidence carries no information about which ones matter.
  // Probability mode uses separated bands so thresholding filters outliers.
  double confidence(bool is_key, double u) const {
    if (cfg_.mode == ProposalMode::quantity) return u;
    return is_key ? 0.7 + 0.3 * u : 0.6 * u;
  }

  void build_prototypes() {
    auto rng = derive_rng({cfg_.seed, stream::prototypes});
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto d = static_cast<std::size_t>(cfg_.feature_dim);
    auto random_unit = [&] {
      std::vector<double> v(d);
      double norm = 0.0;
      do {
        norm = 0.0;
        for (auto& x : v) {
          x = gauss(rng);
          norm += x * x;
        }
      } while (norm == 0.0);
      norm = std::sqrt(norm);
      for (auto& x : v) x /= norm;
      return v;
    };
    const auto shared = random_unit();
    const double a = std::sqrt(cfg_.key_coherence);
    const double b = std::sqrt(1.0 - cfg_.key_coherence);
    const double proto_norm =
        cfg_.class_sep * (cfg_.noise_per_coordinate ? std::sqrt(static_cast<double>(d)) : 1.0);
    for (int c = 0; c < cfg_.num_classes; ++c) {
      Matrix<double> protos(static_cast<std::size_t>(cfg_.key_proposals_per_frame), d);
      for (std::size_t s = 0; s < protos.rows(); ++s) {
        const auto u = random_unit();
        double norm = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          protos(s, k) = a * shared[k] + b * u[k];
          norm += protos(s, k) * protos(s, k);
        }
        norm = std::sqrt(norm);
        for (std::size_t k = 0; k < d; ++k) protos(s, k) *= proto_norm / norm;
      }
      prototypes_.push_back(std::move(protos));
    }
  }

  GeneratorConfig cfg_;
  std::vector<Matrix<double>> prototypes_;
};

template <typename R>
GeneratedSample generate_sample(const GeneratorConfig& cfg, int label, R& rng) {
  return SceneGenerator(cfg).sample(label, rng);
}

/// Per-class counts for a split: uniform, or proportional to the imbalance
/// profile by largest remainder (ties to the lower class id).
inline std::vector<std::size_t> class_counts(const GeneratorConfig& cfg, std::size_t total) {
  const auto c = static_cast<std::size_t>(cfg.num_classes);
  std::vector<std::size_t> counts(c, total / c);
  if (!cfg.imbalance) {
    for (std::size_t i = 0; i < total % c; ++i) ++counts[i];
    return counts;
  }
  const double sum = std::accumulate(kNbaTrainCounts.begin(), kNbaTrainCounts.end(), 0.0);
  std::vector<double> rem(c);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < c; ++i) {
    const double exact = static_cast<double>(total) * kNbaTrainCounts[i] / sum;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[order[i % c]];
  return counts;
}

/// Label of every sample in a split, in a seeded order.
inline std::vector<int> split_labels(const GeneratorConfig& cfg, Split split, std::size_t total) {
  const auto counts = class_counts(cfg, total);
  std::vector<int> labels;
  labels.reserve(total);
  for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
  auto rng = derive_rng({cfg.seed, stream::labels, static_cast<std::uint64_t>(split)});
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

/**
 * Random access to one split. The training loop only calls `sample`; masks
 * are for evaluation and may be absent.
 */
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual int num_classes() const = 0;
  virtual int label(std::size_t i) const = 0;
  virtual VideoSample sample(std::size_t i) const = 0;
  virtual std::optional<SampleMasks> masks(std::size_t i) const = 0;
  virtual std::pair<VideoSample, std::optional<SampleMasks>> sample_with_masks(std::size_t i) const {
    return {sample(i), masks(i)};
  }
};

/// Split generated on demand from its (config, seed); nothing is stored.
class GeneratedSplit final : public SampleSource {
 public:
  GeneratedSplit(const GeneratorConfig& cfg, Split split, std::size_t count)
      : gen_(cfg), split_(split), labels_(split_labels(cfg, split, count)) {}

  std::size_t size() const override { return labels_.size(); }
  int num_classes() const override { return gen_.config().num_classes; }
  int label(std::size_t i) const override { return labels_.at(i); }
  VideoSample sample(std::size_t i) const override { return full(i).visible; }
  std::optional<SampleMasks> masks(std::size_t i) const override { return full(i).hidden; }
  std::pair<VideoSample, std::optional<SampleMasks>> sample_with_masks(std::size_t i) const override {
    auto g = full(i);
    return {std::move(g.visible), std::move(g.hidden)};
  }
  GeneratedSample full(std::size_t i) const { return gen_.sample_at(split_, i, labels_.at(i)); }

  const SceneGenerator& generator() const noexcept { return gen_; }

 private:
  SceneGenerator gen_;
  Split split_;
  std::vector<int> labels_;
};

/// Split held in memory (e.g. loaded from disk).
class StoredSplit final : public SampleSource {
 public:
  StoredSplit(int num_classes, std::vector<VideoSample> samples,
              std::optional<std::vector<SampleMasks>> masks = std::nullopt)
      : num_classes_(num_classes), samples_(std::move(samples)), masks_(std::move(masks)) {}

  std::size_t size() const override { return samples_.size(); }
  int num_classes() const override { return num_classes_; }
  int label(std::size_t i) const override { return samples_.at(i).label; }
  VideoSample sample(std::size_t i) const override { return samples_.at(i); }
  std::optional<SampleMasks> masks(std::size_t i) const override {
    if (!masks_) return std::nullopt;
    return masks_->at(i);
  }
  bool has_masks() const noexcept { return masks_.has_value(); }
  const VideoSample& ref(std::size_t i) const { return samples_.at(i); }

 private:
  int num_classes_;
  std::vector<VideoSample> samples_;
  std::optional<std::vector<SampleMasks>> masks_;
};

/// Copies every sample (and masks, if all are present) into memory.
inline StoredSplit materialize(const SampleSource& src) {
  std::vector<VideoSample> samples;
  std::vector<SampleMasks> masks;
  bool all_masks = true;
  samples.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto [s, m] = src.sample_with_masks(i);
    samples.push_back(std::move(s));
    if (m) {
      masks.push_back(std::move(*m));
    } else {
      all_masks = false;
    }
  }
  std::optional<std::vector<SampleMasks>> kept;
  if (all_masks) kept = std::move(masks);
  return StoredSplit(src.num_classes(), std::move(samples), std::move(kept));
}

// ---------------------------------------------------------------------------
// On-disk format
// ---------------------------------------------------------------------------

/// Serialized training view of one sample. Contains no ground-truth masks.
inline io::Writer encode_sample(const VideoSample& s, const GeneratorConfig& cfg) {
  io::Writer w;
  std::int64_t max_n = 0;
  for (const auto& f : s.frames) max_n = std::max<std::int64_t>(max_n, static_cast<std::int64_t>(f.features.rows()));
  const std::int64_t flags = cfg.mode == ProposalMode::probability ? 1 : 0;
  w.header({io::kFeatureMagic, io::kFormatVersion, static_cast<std::int64_t>(s.frames.size()), max_n,
            cfg.feature_dim, s.label, flags, 0});
  for (const auto& f : s.frames) {
    w.i64(static_cast<std::int64_t>(f.features.rows()));
    w.f64s(f.confidence);
    w.f64s(f.features.flat());
  }
  return w;
}

inline VideoSample decode_sample(io::Reader& r) {
  const auto h = r.header();
  io::expect_magic(h, io::kFeatureMagic, r.name());
  const auto t = h[2], max_n = h[3], d = h[4];
  if (t < 0 || max_n < 0 || d < 1) throw io::IoError(r.name() + ": bad header dimensions");
  VideoSample s;
  s.label = static_cast<int>(h[5]);
  for (std::int64_t f = 0; f < t; ++f) {
    const auto n = r.i64();
    if (n < 0 || n > max_n) throw io::IoError(r.name() + ": frame proposal count out of range");
    FrameData frame{Matrix<double>(static_cast<std::size_t>(n), static_cast<std::size_t>(d)),
                    std::vector<double>(static_cast<std::size_t>(n))};
    r.f64s(frame.confidence);
    r.f64s(frame.features.flat());
    s.frames.push_back(std::move(frame));
  }
  if (!r.at_end()) throw io::IoError(r.name() + ": trailing bytes");
  return s;
}

/// Sidecar with every sample's hidden masks, in manifest order.
inline io::Writer encode_masks(const std::vector<SampleMasks>& masks) {
  io::Writer w;
  w.header({io::kMaskMagic, io::kFormatVersion, static_cast<std::int64_t>(masks.size()), 0, 0, 0, 0, 0});
  for (const auto& m : masks) {
    w.i64(static_cast<std::int64_t>(m.key_frames.size()));
    for (auto b : m.key_frames) w.u8(b);
    for (const auto& fm : m.key_proposals) {
      w.i64(static_cast<std::int64_t>(fm.size()));
      for (auto b : fm) w.u8(b);
    }
  }
  return w;
}

inline std::vector<SampleMasks> decode_masks(io::Reader& r) {
  const auto h = r.header();
  io::expect_magic(h, io::kMaskMagic, r.name());
  std::vector<SampleMasks> out(static_cast<std::size_t>(h[2]));
  for (auto& m : out) {
    const auto t = r.i64();
    m.key_frames.resize(static_cast<std::size_t>(t));
    for (auto& b : m.key_frames) b = r.u8();
    for (std::int64_t f = 0; f < t; ++f) {
      std::vector<std::uint8_t> fm(static_cast<std::size_t>(r.i64()));
      for (auto& b : fm) b = r.u8();
      m.key_proposals.push_back(std::move(fm));
    }
  }
  return out;
}

struct DatasetSummary {
  std::vector<std::size_t> train_per_class;
  std::vector<std::size_t> test_per_class;
};

/**
 * Writes manifest.json, one payload per sample under train/ and test/, and
 * the masks sidecar. Train and test come from disjoint generator streams.
 */
inline DatasetSummary generate_dataset(const GeneratorConfig& cfg, const std::filesystem::path& dir,
                                       std::size_t n_train, std::size_t n_test) {
  cfg.validate();
  const auto c = static_cast<std::size_t>(cfg.num_classes);
  if (n_train < c || n_test < c) {
    throw std::invalid_argument("generate_dataset: split sizes must be >= num_classes");
  }
  std::filesystem::create_directories(dir);
  SceneGenerator gen(cfg);
  DatasetSummary summary{class_counts(cfg, n_train), class_counts(cfg, n_test)};

  json samples = json::array();
  std::vector<SampleMasks> masks;
  for (Split split : {Split::train, Split::test}) {
    const std::size_t n = split == Split::train ? n_train : n_test;
    const auto labels = split_labels(cfg, split, n);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = gen.sample_at(split, i, labels[i]);
      char name[32];
      std::snprintf(name, sizeof name, "%06zu.bin", i);
      const std::string rel = std::string(to_string(split)) + "/" + name;
      encode_sample(s.visible, cfg).save(dir / rel);
      samples.push_back({{"split", to_string(split)}, {"index", i}, {"label", labels[i]}, {"file", rel}});
      masks.push_back(std::move(s.hidden));
    }
  }
  encode_masks(masks).save(dir / "masks.sidecar");

  json manifest{{"format", "samgar-dataset"},
                {"version", io::kFormatVersion},
                {"config", cfg},
                {"class_names", cfg.class_names()},
                {"splits",
                 {{"train", {{"count", n_train}, {"per_class", summary.train_per_class}}},
                  {"test", {{"count", n_test}, {"per_class", summary.test_per_class}}}}},
                {"sidecar", "masks.sidecar"},
                {"samples", samples}};
  io::write_text(dir / "manifest.json", manifest.dump(1) + "\n");
  return summary;
}

/// Split backed by payload files, decoded on each access.
class DiskSplit final : public SampleSource {
 public:
  DiskSplit(int num_classes, std::vector<std::filesystem::path> files, std::vector<int> labels,
            std::optional<std::vector<SampleMasks>> masks = std::nullopt)
      : num_classes_(num_classes), files_(std::move(files)), labels_(std::move(labels)), masks_(std::move(masks)) {}

  std::size_t size() const override { return files_.size(); }
  int num_classes() const override { return num_classes_; }
  int label(std::size_t i) const override { return labels_.at(i); }
  VideoSample sample(std::size_t i) const override {
    io::Reader r(files_.at(i));
    auto s = decode_sample(r);
    if (s.label != labels_[i]) throw io::IoError(r.name() + ": label disagrees with the manifest");
    return s;
  }
  std::optional<SampleMasks> masks(std::size_t i) const override {
    if (!masks_) return std::nullopt;
    return masks_->at(i);
  }
  bool has_masks() const noexcept { return masks_.has_value(); }

 private:
  int num_classes_;
  std::vector<std::filesystem::path> files_;
  std::vector<int> labels_;
  std::optional<std::vector<SampleMasks>> masks_;
};

struct LoadedDataset {
  GeneratorConfig config;
  std::vector<std::string> class_names;
  DiskSplit train;
  DiskSplit test;
};

/// Opens a dataset directory. Payloads are read lazily; masks are attached
/// only when requested and the sidecar exists.
inline LoadedDataset load_dataset(const std::filesystem::path& dir, bool with_masks) {
  if (!std::filesystem::exists(dir / "manifest.json")) {
    throw io::IoError("dataset not found: " + (dir / "manifest.json").string());
  }
  const json manifest = json::parse(io::read_text(dir / "manifest.json"));
  if (manifest.value("format", "") != "samgar-dataset") throw io::IoError("not a samgar dataset: " + dir.string());
  if (manifest.value("version", 0) != io::kFormatVersion) throw io::IoError("dataset version mismatch");
  GeneratorConfig cfg = parse_generator_config(manifest.at("config"), "config");

  std::vector<std::filesystem::path> files[2];
  std::vector<int> labels[2];
  for (const auto& rec : manifest.at("samples")) {
    const int k = rec.at("split").get<std::string>() == "train" ? 0 : 1;
    files[k].push_back(dir / rec.at("file").get<std::string>());
    labels[k].push_back(rec.at("label").get<int>());
  }
  std::optional<std::vector<SampleMasks>> train_masks, test_masks;
  const auto sidecar = dir / manifest.value("sidecar", "masks.sidecar");
  if (with_masks && std::filesystem::exists(sidecar)) {
    io::Reader r(sidecar);
    auto all = decode_masks(r);
    if (all.size() != files[0].size() + files[1].size()) throw io::IoError("sidecar sample count mismatch");
    train_masks.emplace(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(files[0].size()));
    test_masks.emplace(all.begin() + static_cast<std::ptrdiff_t>(files[0].size()), all.end());
  }
  auto names = manifest.at("class_names").get<std::vector<std::string>>();
  return {cfg, std::move(names), DiskSplit(cfg.num_classes, std::move(files[0]), std::move(labels[0]), std::move(train_masks)),
          DiskSplit(cfg.num_classes, std::move(files[1]), std::move(labels[1]), std::move(test_masks))};
}

/**
 * Accuracy of a nearest-centroid classifier that sees the hidden masks:
 * each video is represented by the mean of its true key proposals in its
 * true key frames. Establishes that the planted signal is recoverable.
 */
inline double planted_signal_oracle_accuracy(const SampleSource& train, const SampleSource& test) {
  auto represent = [](const VideoSample& s, const SampleMasks& m) {
    std::vector<double> v;
    std::size_t count = 0;
    for (std::size_t t = 0; t < s.frames.size(); ++t) {
      if (!m.key_frames[t]) continue;
      const auto& f = s.frames[t].features;
      if (v.empty()) v.assign(f.cols(), 0.0);
      for (std::size_t i = 0; i < f.rows(); ++i) {
        if (!m.key_proposals[t][i]) continue;
        for (std::size_t c = 0; c < f.cols(); ++c) v[c] += f(i, c);
        ++count;
      }
    }
    for (auto& x : v) x /= static_cast<double>(std::max<std::size_t>(count, 1));
    return v;
  };
  const auto nc = static_cast<std::size_t>(train.num_classes());
  std::vector<std::vector<double>> centroid(nc);
  std::vector<std::size_t> seen(nc, 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto m = train.masks(i);
    if (!m) throw std::invalid_argument("planted_signal_oracle_accuracy: masks required");
    const auto s = train.sample(i);
    const auto v = represent(s, *m);
    auto& cen = centroid[static_cast<std::size_t>(s.label)];
    if (cen.empty()) cen.assign(v.size(), 0.0);
    for (std::size_t c = 0; c < v.size(); ++c) cen[c] += v[c];
    ++seen[static_cast<std::size_t>(s.label)];
  }
  for (std::size_t k = 0; k < nc; ++k)
    for (auto& x : centroid[k]) x /= static_cast<double>(std::max<std::size_t>(seen[k], 1));

  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto m = test.masks(i);
    if (!m) throw std::invalid_argument("planted_signal_oracle_accuracy: masks required");
    const auto s = test.sample(i);
    const auto v = represent(s, *m);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nc; ++k) {
      if (centroid[k].empty()) continue;
      double dist = 0.0;
      for (std::size_t c = 0; c < v.size(); ++c) dist += (v[c] - centroid[k][c]) * (v[c] - centroid[k][c]);
      if (dist < best_d) {
        best_d = dist;
        best = k;
      }
    }
    correct += best == static_cast<std::size_t>(s.label) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace sam
