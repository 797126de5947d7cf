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
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sam/json_fields.hpp"
#include "sam/pipeline/adam.hpp"
#include "sam/pipeline/model.hpp"
#include "sam/pipeline/sampling.hpp"
#include "sam/rng.hpp"
#include "sam/synthetic_scene.hpp"

namespace sam {

/// Ablation presets. `custom` leaves every field as configured.
enum class Variant { B1, B2, B3, B4, B5, B6, custom };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::B1: return "B1";
    case Variant::B2: return "B2";
    case Variant::B3: return "B3";
    case Variant::B4: return "B4";
    case Variant::B5: return "B5";
    case Variant::B6: return "B6";
    case Variant::custom: return "custom";
  }
  return "custom";
}

inline Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::B1, Variant::B2, Variant::B3, Variant::B4, Variant::B5, Variant::B6, Variant::custom}) {
    if (s == to_string(v)) return v;
  }
  throw ConfigError("variant", "expected one of B1..B6 or custom, got \"" + s + "\"");
}

struct TrainConfig {
  int n_frames = 20;
  int k_frames = 6;
  ProposalMode proposal_mode = ProposalMode::quantity;
  int n_proposals = 14;
  double theta = 0.9;
  int k_proposals = 8;
  bool spatial_sam = true;
  bool temporal_sam = false;
  int embed_dim = 0;     // 0 = same as the dataset feature dimension
  int relation_dim = 0;  // 0 = same as embed_dim
  bool tie_query_key = true;
  bool identity_lift = true;
  bool zero_init_output = true;
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-4;
  double lr_decay = 0.1;
  int lr_step_epochs = 5;
  AdamConfig adam;
  std::uint64_t seed = 0;

  void validate(const std::string& prefix = "train") const {
    auto p = [&](const char* f) { return prefix.empty() ? std::string(f) : prefix + "." + f; };
    if (n_frames < 1) throw ConfigError(p("n_frames"), "must be >= 1");
    if (k_frames < 1 || k_frames > n_frames) throw ConfigError(p("k_frames"), "must be in [1, n_frames]");
    if (n_proposals < 1) throw ConfigError(p("n_proposals"), "must be >= 1");
    if (k_proposals < 1) throw ConfigError(p("k_proposals"), "must be >= 1");
    if (proposal_mode == ProposalMode::quantity && spatial_sam && k_proposals > n_proposals) {
      throw ConfigError(p("k_proposals"), "must be <= n_proposals in quantity mode");
    }
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError(p("theta"), "must be in [0, 1]");
    if (embed_dim < 0) throw ConfigError(p("embed_dim"), "must be >= 0");
    if (relation_dim < 0) throw ConfigError(p("relation_dim"), "must be >= 0");
    if (epochs < 0) throw ConfigError(p("epochs"), "must be >= 0");
    if (batch_size < 1) throw ConfigError(p("batch_size"), "must be >= 1");
    if (!(lr > 0)) throw ConfigError(p("lr"), "must be > 0");
    if (!(lr_decay > 0)) throw ConfigError(p("lr_decay"), "must be > 0");
    if (lr_step_epochs < 1) throw ConfigError(p("lr_step_epochs"), "must be >= 1");
    if (!(adam.beta1 >= 0 && adam.beta1 < 1)) throw ConfigError(p("adam_beta1"), "must be in [0, 1)");
    if (!(adam.beta2 >= 0 && adam.beta2 < 1)) throw ConfigError(p("adam_beta2"), "must be in [0, 1)");
    if (!(adam.eps > 0)) throw ConfigError(p("adam_eps"), "must be > 0");
  }

  ProposalStrategy strategy() const {
    return {proposal_mode, static_cast<std::size_t>(n_proposals), theta};
  }

  ModelDims dims(std::size_t raw_dim, std::size_t num_classes) const {
    ModelDims d;
    d.raw_dim = raw_dim;
    d.embed_dim = embed_dim > 0 ? static_cast<std::size_t>(embed_dim) : raw_dim;
    d.relation_dim = relation_dim > 0 ? static_cast<std::size_t>(relation_dim) : d.embed_dim;
    d.num_classes = num_classes;
    d.spatial_sam = spatial_sam;
    d.k_proposals = static_cast<std::size_t>(k_proposals);
    d.temporal_sam = temporal_sam;
    d.k_frames = static_cast<std::size_t>(k_frames);
    d.tie_query_key = tie_query_key;
    d.identity_lift = identity_lift;
    d.zero_init_output = zero_init_output;
    return d;
  }

  double lr_at(int epoch) const { return scheduled_lr(lr, lr_decay, lr_step_epochs, epoch); }
};

/**
 * Expands an ablation preset. Every preset samples N^f = 20 frames.
 *   B1  no SAM, top-8 proposals
 *   B2  Spatial-SAM, 14 -> 14
 *   B3  Spatial-SAM, 14 -> 8
 *   B4  Spatial-SAM, 8 -> 8
 *   B5  Spatial-SAM 14 -> 8, Temporal-SAM 20 -> 6
 *   B6  Spatial-SAM over proposals with confidence > 0.9, K = 8
 */
inline void apply_variant(TrainConfig& c, Variant v) {
  if (v == Variant::custom) return;
  c.n_frames = 20;
  c.k_frames = 6;
  c.proposal_mode = ProposalMode::quantity;
  c.temporal_sam = false;
  c.spatial_sam = true;
  switch (v) {
    case Variant::B1: c.n_proposals = 8; c.k_proposals = 8; c.spatial_sam = false; break;
    case Variant::B2: c.n_proposals = 14; c.k_proposals = 14; break;
    case Variant::B3: c.n_proposals = 14; c.k_proposals = 8; break;
    case Variant::B4: c.n_proposals = 8; c.k_proposals = 8; break;
    case Variant::B5: c.n_proposals = 14; c.k_proposals = 8; c.temporal_sam = true; break;
    case Variant::B6:
      c.proposal_mode = ProposalMode::probability;
      c.theta = 0.9;
      c.k_proposals = 8;
      break;
    case Variant::custom: break;
  }
}

inline void to_json(json& j, const TrainConfig& c) {
  j = json{{"n_frames", c.n_frames},       {"k_frames", c.k_frames},
           {"proposal_mode", to_string(c.proposal_mode)},
           {"n_proposals", c.n_proposals}, {"theta", c.theta},
           {"k_proposals", c.k_proposals}, {"spatial_sam", c.spatial_sam},
           {"temporal_sam", c.temporal_sam}, {"embed_dim", c.embed_dim},
           {"relation_dim", c.relation_dim}, {"tie_query_key", c.tie_query_key},
           {"identity_lift", c.identity_lift},
           {"zero_init_output", c.zero_init_output},
           {"epochs", c.epochs},           {"batch_size", c.batch_size},
           {"lr", c.lr},
           {"lr_decay", c.lr_decay},       {"lr_step_epochs", c.lr_step_epochs},
           {"adam_beta1", c.adam.beta1},   {"adam_beta2", c.adam.beta2},
           {"adam_eps", c.adam.eps},       {"seed", c.seed}};
}

inline TrainConfig parse_train_config(const json& j, const std::string& prefix = "train") {
  TrainConfig c;
  FieldReader r(j, prefix);
  r.read("n_frames", c.n_frames);
  r.read("k_frames", c.k_frames);
  std::string mode = to_string(c.proposal_mode);
  r.read("proposal_mode", mode);
  if (mode == "quantity") {
    c.proposal_mode = ProposalMode::quantity;
  } else if (mode == "probability") {
    c.proposal_mode = ProposalMode::probability;
  } else {
    throw ConfigError(r.path("proposal_mode"), "expected \"quantity\" or \"probability\"");
  }
  r.read("n_proposals", c.n_proposals);
  r.read("theta", c.theta);
  r.read("k_proposals", c.k_proposals);
  r.read("spatial_sam", c.spatial_sam);
  r.read("temporal_sam", c.temporal_sam);
  r.read("embed_dim", c.embed_dim);
  r.read("relation_dim", c.relation_dim);
  r.read("tie_query_key", c.tie_query_key);
  r.read("identity_lift", c.identity_lift);
  r.read("zero_init_output", c.zero_init_output);
  r.read("epochs", c.epochs);
  r.read("batch_size", c.batch_size);
  r.read("lr", c.lr);
  r.read("lr_decay", c.lr_decay);
  r.read("lr_step_epochs", c.lr_step_epochs);
  r.read("adam_beta1", c.adam.beta1);
  r.read("adam_beta2", c.adam.beta2);
  r.read("adam_eps", c.adam.eps);
  r.read("seed", c.seed);
  r.reject_unknown();
  c.validate(prefix);
  return c;
}

struct EvalReport {
  double acc = 0.0;
  double mean_acc = 0.0;
  double loss = 0.0;
  std::vector<double> per_class_acc;
  std::vector<std::vector<std::size_t>> confusion;  // rows = true class
  std::optional<double> spatial_selection_precision;
  std::optional<double> temporal_selection_precision;
  std::size_t spatial_frames_scored = 0;
};

inline void to_json(json& j, const EvalReport& r) {
  j = json{{"acc", r.acc},
           {"mean_acc", r.mean_acc},
           {"loss", r.loss},
           {"per_class_acc", r.per_class_acc},
           {"confusion", r.confusion},
           {"spatial_selection_precision", r.spatial_selection_precision ? json(*r.spatial_selection_precision) : json(nullptr)},
           {"temporal_selection_precision", r.temporal_selection_precision ? json(*r.temporal_selection_precision) : json(nullptr)}};
}

/// Confusion matrix as CSV: header row of predicted classes, one row per true class.
inline std::string confusion_csv(const EvalReport& r, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "true\\pred";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    out << names.at(i);
    for (auto v : r.confusion[i]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

/// Accuracy summary from a filled confusion matrix. Mean accuracy averages
/// over classes that occur in the evaluated set.
inline void finalize_report(EvalReport& r) {
  const std::size_t c = r.confusion.size();
  std::size_t total = 0, correct = 0, present = 0;
  double sum_class = 0.0;
  r.per_class_acc.assign(c, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    const auto row = std::accumulate(r.confusion[i].begin(), r.confusion[i].end(), std::size_t{0});
    total += row;
    correct += r.confusion[i][i];
    if (row > 0) {
      r.per_class_acc[i] = static_cast<double>(r.confusion[i][i]) / static_cast<double>(row);
      sum_class += r.per_class_acc[i];
      ++present;
    }
  }
  r.acc = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  r.mean_acc = present ? sum_class / static_cast<double>(present) : 0.0;
}

template <typename T>
std::size_t argmax(std::span<const T> v) {
  return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

/**
 * Deterministic evaluation: eval-mode frame sampling, no randomness.
 * Selection precision is measured against the hidden masks when the source
 * has them; it never feeds back into training.
 *   spatial: |pooled proposals ∩ true keys| / |pooled|, averaged over scored
 *            frames that are true key frames.
 *   temporal: |pooled frames ∩ true key frames| / |pooled|, averaged over videos.
 */
template <typename T>
EvalReport evaluate(const Model<T>& model, const SampleSource& data, const TrainConfig& cfg) {
  const std::size_t c = model.dims.num_classes;
  EvalReport rep;
  rep.confusion.assign(c, std::vector<std::size_t>(c, 0));
  const auto strategy = cfg.strategy();
  double spatial_sum = 0.0, temporal_sum = 0.0, loss_sum = 0.0;
  std::size_t spatial_n = 0, temporal_n = 0;
  bool masks_seen = data.size() > 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto [sample, masks] = data.sample_with_masks(i);
    const auto frames = segment_sample(sample.frames.size(), static_cast<std::size_t>(cfg.n_frames));
    auto fwd = forward(model, sample, std::span<const std::size_t>(frames), strategy);
    const auto pred = argmax(std::span<const T>(fwd.logits));
    rep.confusion.at(static_cast<std::size_t>(sample.label)).at(pred) += 1;
    loss_sum += cross_entropy(std::span<const T>(fwd.logits), sample.label);
    if (!masks) {
      masks_seen = false;
      continue;
    }
    for (const auto& trace : fwd.frames) {
      if (!masks->key_frames[trace.frame_index] || trace.pooled.empty()) continue;
      const auto& km = masks->key_proposals[trace.frame_index];
      std::size_t hits = 0;
      for (auto p : trace.pooled) hits += km[p] ? 1 : 0;
      spatial_sum += static_cast<double>(hits) / static_cast<double>(trace.pooled.size());
      ++spatial_n;
    }
    std::size_t hits = 0;
    for (auto f : fwd.pooled_frames) hits += masks->key_frames[fwd.frames[f].frame_index] ? 1 : 0;
    temporal_sum += static_cast<double>(hits) / static_cast<double>(fwd.pooled_frames.size());
    ++temporal_n;
  }
  finalize_report(rep);
  rep.loss = data.size() ? loss_sum / static_cast<double>(data.size()) : 0.0;
  if (masks_seen) {
    if (spatial_n) rep.spatial_selection_precision = spatial_sum / static_cast<double>(spatial_n);
    if (temporal_n) rep.temporal_selection_precision = temporal_sum / static_cast<double>(temporal_n);
  }
  rep.spatial_frames_scored = spatial_n;
  return rep;
}

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One line of the metrics log.
struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  std::optional<double> train_loss;  // absent for the untrained evaluation
  EvalReport test;
};

inline json to_json_record(const EpochRecord& r) {
  return json{{"epoch", r.epoch},
              {"lr", r.lr},
              {"train_loss", r.train_loss ? json(*r.train_loss) : json(nullptr)},
              {"test_acc", r.test.acc},
              {"test_mean_acc", r.test.mean_acc},
              {"test_loss", r.test.loss},
              {"per_class_acc", r.test.per_class_acc},
              {"spatial_selection_precision",
               r.test.spatial_selection_precision ? json(*r.test.spatial_selection_precision) : json(nullptr)},
              {"temporal_selection_precision",
               r.test.temporal_selection_precision ? json(*r.test.temporal_selection_precision) : json(nullptr)}};
}

template <typename T>
struct TrainResult {
  Model<T> model;
  std::vector<EpochRecord> log;
};

template <typename T>
Model<T> init_model(const TrainConfig& cfg, std::size_t raw_dim, std::size_t num_classes) {
  auto rng = derive_rng({cfg.seed, stream::init});
  return Model<T>::random(cfg.dims(raw_dim, num_classes), rng);
}

/**
 * End-to-end training. The batch gradient is the mean of per-sample
 * gradients accumulated in ascending batch position; each epoch's order and
 * every sample's frame draw come from streams keyed by (seed, epoch, index),
 * so the run is a pure function of (config, data). `on_epoch` sees every
 * record as it is produced, starting with the untrained evaluation (epoch 0).
 */
template <typename T>
TrainResult<T> train(const TrainConfig& cfg, const SampleSource& train_data, const SampleSource& test_data,
                     std::size_t raw_dim, const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (train_data.size() == 0) throw std::invalid_argument("train: empty training split");
  TrainResult<T> res{init_model<T>(cfg, raw_dim, static_cast<std::size_t>(train_data.num_classes())), {}};
  auto& model = res.model;
  Adam<T> opt(cfg.adam);
  const auto strategy = cfg.strategy();

  auto emit = [&](EpochRecord rec) {
    if (on_epoch) on_epoch(rec);
    res.log.push_back(std::move(rec));
  };
  emit({0, cfg.lr_at(1), std::nullopt, evaluate(model, test_data, cfg)});

  const std::size_t n = train_data.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle_rng = derive_rng({cfg.seed, stream::shuffle, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      model.zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        const auto sample = train_data.sample(idx);
        auto frame_rng = derive_rng({cfg.seed, stream::frames, static_cast<std::uint64_t>(epoch), idx});
        const auto frames = segment_sample(sample.frames.size(), static_cast<std::size_t>(cfg.n_frames),
                                           SampleMode::train, frame_rng);
        auto fwd = forward(model, sample, std::span<const std::size_t>(frames), strategy);
        double loss = 0.0;
        try {
          loss = loss_and_backward(model, fwd);
        } catch (const NonFiniteError& e) {
          throw TrainingAborted("epoch " + std::to_string(epoch) + ", sample " + std::to_string(idx) + ": " + e.what());
        }
        loss_sum += loss;
      }
      const T scale = T(1) / static_cast<T>(stop - start);
      auto params = model.parameters();
      for (auto& p : params)
        for (auto& g : p.grad->flat()) g *= scale;
      try {
        opt.step(std::span<const ParamRef<T>>(params), lr);
      } catch (const NonFiniteError& e) {
        throw TrainingAborted("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      model.bump_version();
    }
    emit({epoch, lr, loss_sum / static_cast<double>(n), evaluate(model, test_data, cfg)});
  }
  return res;
}

}  // namespace sam
