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
#include <optional>
#include <string>
#include <vector>

#include "sam/json_fields.hpp"
#include "sam/pipeline/train.hpp"
#include "sam/synthetic_scene.hpp"

namespace sam {

enum class SweepAxis { Np, theta, Kp, Kf };

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Np: return "Np";
    case SweepAxis::theta: return "theta";
    case SweepAxis::Kp: return "Kp";
    case SweepAxis::Kf: return "Kf";
  }
  return "Np";
}

inline SweepAxis parse_sweep_axis(const std::string& s, const std::string& path = "sweep.axis") {
  for (SweepAxis a : {SweepAxis::Np, SweepAxis::theta, SweepAxis::Kp, SweepAxis::Kf}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError(path, "expected one of Np, theta, Kp, Kf, got \"" + s + "\"");
}

/// Default grid per axis.
inline std::vector<double> default_sweep_values(SweepAxis a) {
  std::vector<double> v;
  switch (a) {
    case SweepAxis::Np:
      for (int i = 8; i <= 14; ++i) v.push_back(i);
      break;
    case SweepAxis::theta:
      for (int i = 1; i <= 19; ++i) v.push_back(0.05 * i);
      break;
    case SweepAxis::Kp:
      for (int i = 1; i <= 14; ++i) v.push_back(i);
      break;
    case SweepAxis::Kf:
      for (int i = 1; i <= 20; ++i) v.push_back(i);
      break;
  }
  return v;
}

/// Applies one sweep value to a training configuration.
inline void apply_sweep_value(TrainConfig& c, SweepAxis a, double value) {
  auto as_count = [&](const char* what) {
    if (value < 1 || value != std::floor(value)) {
      throw ConfigError(std::string("sweep.") + what, "expected a positive integer, got " + std::to_string(value));
    }
    return static_cast<int>(value);
  };
  switch (a) {
    case SweepAxis::Np:
      c.proposal_mode = ProposalMode::quantity;
      c.n_proposals = as_count("Np");
      break;
    case SweepAxis::theta:
      c.proposal_mode = ProposalMode::probability;
      c.theta = value;
      break;
    case SweepAxis::Kp: c.k_proposals = as_count("Kp"); break;
    case SweepAxis::Kf:
      c.temporal_sam = true;
      c.k_frames = as_count("Kf");
      break;
  }
  c.validate();
}

/**
 * One config document for every subcommand:
 *   { "variant": "B3", "seed": 1, "precision": "double",
 *     "generator": {...}, "train": {...},
 *     "dataset": {"n_train": 2000, "n_test": 500},
 *     "paths": {"dataset": "data", "checkpoint": "run/checkpoint", "report": "run"},
 *     "sweep": {"axis": "Kp", "values": [1, 2, 3]},
 *     "gradcheck": {"trials": 20} }
 * Every section and key is optional. B6 also switches the generator to
 * probability mode, since thresholding needs informative confidences.
 */
struct RunConfig {
  GeneratorConfig generator;
  TrainConfig train;
  Variant variant = Variant::custom;
  std::optional<std::uint64_t> seed;
  bool single_precision = false;
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  std::string dataset_dir = "data";
  std::string checkpoint_dir = "run/checkpoint";
  std::string report_dir = "run";
  std::optional<SweepAxis> sweep_axis;
  std::vector<double> sweep_values;
  int gradcheck_trials = 24;

  /// Resolves presets and overrides: the variant owns the fields it sets, and
  /// a top-level seed is copied into both the generator and the trainer.
  void finalize() {
    apply_variant(train, variant);
    if (variant == Variant::B6) generator.mode = ProposalMode::probability;
    if (seed) {
      generator.seed = *seed;
      train.seed = *seed;
    }
    generator.validate();
    train.validate();
    const auto c = static_cast<std::size_t>(generator.num_classes);
    if (n_train < c) throw ConfigError("dataset.n_train", "must be >= num_classes");
    if (n_test < c) throw ConfigError("dataset.n_test", "must be >= num_classes");
    if (gradcheck_trials < 1) throw ConfigError("gradcheck.trials", "must be >= 1");
  }
};

inline RunConfig parse_run_config(const json& doc) {
  RunConfig rc;
  FieldReader root(doc, "");
  std::string variant = to_string(rc.variant);
  root.read("variant", variant);
  rc.variant = parse_variant(variant);
  if (root.has("seed")) {
    std::uint64_t s = 0;
    root.read("seed", s);
    rc.seed = s;
  }
  std::string precision = "double";
  root.read("precision", precision);
  if (precision != "double" && precision != "float") throw ConfigError("precision", "expected \"double\" or \"float\"");
  rc.single_precision = precision == "float";
  if (const json* g = root.child("generator")) rc.generator = parse_generator_config(*g, "generator");
  if (const json* t = root.child("train")) rc.train = parse_train_config(*t, "train");
  if (const json* d = root.child("dataset")) {
    FieldReader r(*d, "dataset");
    r.read("n_train", rc.n_train);
    r.read("n_test", rc.n_test);
    r.reject_unknown();
  }
  if (const json* p = root.child("paths")) {
    FieldReader r(*p, "paths");
    r.read("dataset", rc.dataset_dir);
    r.read("checkpoint", rc.checkpoint_dir);
    r.read("report", rc.report_dir);
    r.reject_unknown();
  }
  if (const json* s = root.child("sweep")) {
    FieldReader r(*s, "sweep");
    if (r.has("axis")) {
      std::string axis;
      r.read("axis", axis);
      rc.sweep_axis = parse_sweep_axis(axis);
    }
    r.read("values", rc.sweep_values);
    r.reject_unknown();
  }
  if (const json* g = root.child("gradcheck")) {
    FieldReader r(*g, "gradcheck");
    r.read("trials", rc.gradcheck_trials);
    r.reject_unknown();
  }
  root.reject_unknown();
  return rc;
}

}  // namespace sam
