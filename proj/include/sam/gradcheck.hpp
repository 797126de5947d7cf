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
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sam/fd_gradient.hpp"
#include "sam/json_fields.hpp"
#include "sam/linalg.hpp"
#include "sam/pipeline/model.hpp"
#include "sam/relation_graph.hpp"
#include "sam/rng.hpp"
#include "sam/sam_block.hpp"

namespace sam {

struct GradCheckConfig {
  int instances = 24;  // per suite
  std::uint64_t seed = 0;
  double h = 1e-5;
  double tolerance = 1e-4;
  // Instances whose top-K boundary is closer than this to a tie are skipped:
  // the selection, and with it the function, is discontinuous there.
  double tie_margin = 1e-3;
  bool zero_w_z = false;  // force every W_z to zero (pure residual modules)
};

struct GradCheckGroup {
  std::string suite;
  std::string group;
  double max_rel_error = 0.0;
  int instances = 0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  int checked = 0;
  int skipped = 0;
  double tolerance = 1e-4;

  bool passed() const {
    if (checked == 0) return false;
    return std::all_of(groups.begin(), groups.end(),
                       [&](const GradCheckGroup& g) { return g.max_rel_error <= tolerance; });
  }

  double worst() const {
    double w = 0.0;
    for (const auto& g : groups) w = std::max(w, g.max_rel_error);
    return w;
  }
};

inline void to_json(json& j, const GradCheckReport& r) {
  j = json{{"checked", r.checked}, {"skipped", r.skipped}, {"tolerance", r.tolerance},
           {"passed", r.passed()}, {"groups", json::array()}};
  for (const auto& g : r.groups) {
    j["groups"].push_back({{"suite", g.suite}, {"group", g.group}, {"max_rel_error", g.max_rel_error},
                           {"instances", g.instances}});
  }
}

namespace detail {

template <typename R>
Matrix<double> random_matrix(std::size_t r, std::size_t c, R& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix<double> m(r, c);
  for (auto& v : m.flat()) v = n(rng);
  return m;
}

template <typename R>
std::size_t uniform_size(R& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

class GroupTable {
 public:
  explicit GroupTable(std::string suite) : suite_(std::move(suite)) {}

  void record(const std::string& group, double err) {
    auto& g = table_[group];
    g.first = std::max(g.first, err);
    ++g.second;
  }

  void append_to(GradCheckReport& r) const {
    for (const auto& [name, v] : table_) r.groups.push_back({suite_, name, v.first, v.second});
  }

 private:
  std::string suite_;
  std::map<std::string, std::pair<double, int>> table_;
};

// Scalar readout <Z, G> used by the module-level suites.
inline double readout(const Matrix<double>& z, const Matrix<double>& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += z.flat()[i] * g.flat()[i];
  return s;
}

inline void relation_suite(const GradCheckConfig& cfg, GradCheckReport& report) {
  GroupTable table("relation_graph");
  for (int inst = 0, tries = 0; inst < cfg.instances && tries < cfg.instances * 20; ++tries) {
    auto rng = derive_rng({cfg.seed, 0x72656cULL, static_cast<std::uint64_t>(tries)});
    const std::size_t n = uniform_size(rng, 1, 10);
    const std::size_t k = uniform_size(rng, 1, n);
    const std::size_t d = uniform_size(rng, 1, 8);
    const std::size_t de = uniform_size(rng, 1, 8);
    auto params = SamParams<double>::random(d, de, rng);
    if (cfg.zero_w_z) params.value.w_z.fill(0.0);
    const auto x = random_matrix(n, d, rng);
    auto fwd = relation_forward(x, params, k);
    if (fwd.cache.selection_margin < cfg.tie_margin) {
      ++report.skipped;
      continue;
    }
    const auto g = random_matrix(fwd.z.rows(), fwd.z.cols(), rng);
    const Matrix<double> dx = relation_backward(fwd.cache, g, params);

    table.record("x", max_relative_error(dx, fd_gradient([&](const Matrix<double>& xp) {
                   return readout(relation_forward(xp, params, k).z, g);
                 }, x, cfg.h)));
    auto check_weight = [&](const char* name, Matrix<double> SamWeights<double>::*member) {
      const Matrix<double>& analytic = params.grad.*member;
      auto numeric = fd_gradient([&](const Matrix<double>& wp) {
        SamParams<double> p = params;
        p.value.*member = wp;
        return readout(relation_forward(x, p, k).z, g);
      }, params.value.*member, cfg.h);
      table.record(name, max_relative_error(analytic, numeric));
    };
    check_weight("phi", &SamWeights<double>::phi);
    check_weight("psi", &SamWeights<double>::psi);
    check_weight("omega", &SamWeights<double>::omega);
    check_weight("w_z", &SamWeights<double>::w_z);
    ++report.checked;
    ++inst;
  }
  table.append_to(report);
}

// Two frames through one shared block, fused by the mean; checks that
// per-frame gradients accumulate.
inline void sam_block_suite(const GradCheckConfig& cfg, GradCheckReport& report) {
  GroupTable table("sam_block");
  for (int inst = 0, tries = 0; inst < cfg.instances && tries < cfg.instances * 20; ++tries) {
    auto rng = derive_rng({cfg.seed, 0x626c6bULL, static_cast<std::uint64_t>(tries)});
    const std::size_t d = uniform_size(rng, 1, 8);
    const std::size_t de = uniform_size(rng, 1, 8);
    const std::size_t k = uniform_size(rng, 1, 8);
    SamBlock<double> block(SamParams<double>::random(d, de, rng), k, SamDomain::spatial);
    if (cfg.zero_w_z) block.params.value.w_z.fill(0.0);
    const auto xa = random_matrix(uniform_size(rng, 1, 8), d, rng);
    const auto xb = random_matrix(uniform_size(rng, 1, 8), d, rng);
    const auto g = random_matrix(1, d, rng);

    auto oa = sam_forward(block, xa);
    auto ob = sam_forward(block, xb);
    if (std::min(oa.cache.selection_margin, ob.cache.selection_margin) < cfg.tie_margin) {
      ++report.skipped;
      continue;
    }
    const std::span<const double> gs(g.row(0).data(), d);
    const auto dxa = sam_backward_fused(block, oa, gs);
    sam_backward_fused(block, ob, gs);

    auto objective = [&](const SamBlock<double>& b, const Matrix<double>& a, const Matrix<double>& c) {
      const auto fa = mean_fuse(sam_forward(b, a).z);
      const auto fb = mean_fuse(sam_forward(b, c).z);
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += (fa[j] + fb[j]) * g(0, j);
      return s;
    };
    table.record("x", max_relative_error(dxa, fd_gradient([&](const Matrix<double>& p) {
                   return objective(block, p, xb);
                 }, xa, cfg.h)));
    auto check_weight = [&](const char* name, Matrix<double> SamWeights<double>::*member) {
      auto numeric = fd_gradient([&](const Matrix<double>& wp) {
        SamBlock<double> b = block;
        b.params.value.*member = wp;
        return objective(b, xa, xb);
      }, block.params.value.*member, cfg.h);
      table.record(name, max_relative_error(block.params.grad.*member, numeric));
    };
    check_weight("phi", &SamWeights<double>::phi);
    check_weight("psi", &SamWeights<double>::psi);
    check_weight("omega", &SamWeights<double>::omega);
    check_weight("w_z", &SamWeights<double>::w_z);
    ++report.checked;
    ++inst;
  }
  table.append_to(report);
}

// Whole pipeline on a miniature video: loss against every parameter tensor.
inline void pipeline_suite(const GradCheckConfig& cfg, GradCheckReport& report) {
  GroupTable table("pipeline");
  for (int inst = 0, tries = 0; inst < cfg.instances && tries < cfg.instances * 20; ++tries) {
    auto rng = derive_rng({cfg.seed, 0x706970ULL, static_cast<std::uint64_t>(tries)});
    ModelDims dims;
    dims.raw_dim = uniform_size(rng, 1, 6);
    dims.embed_dim = uniform_size(rng, 1, 6);
    dims.relation_dim = uniform_size(rng, 1, 6);
    dims.num_classes = uniform_size(rng, 2, 4);
    dims.spatial_sam = (tries % 4) != 3;
    dims.temporal_sam = (tries % 4) != 2;
    dims.k_proposals = uniform_size(rng, 1, 6);
    const std::size_t n_frames = uniform_size(rng, 1, 4);
    dims.k_frames = uniform_size(rng, 1, n_frames);
    dims.zero_init_output = false;
    auto model = Model<double>::random(dims, rng, true);
    if (cfg.zero_w_z) {
      if (model.spatial) model.spatial->params.value.w_z.fill(0.0);
      if (model.temporal) model.temporal->params.value.w_z.fill(0.0);
    }

    VideoSample video;
    video.label = static_cast<int>(uniform_size(rng, 0, dims.num_classes - 1));
    for (std::size_t t = 0; t < n_frames; ++t) {
      const std::size_t n = uniform_size(rng, 1, 8);
      FrameData f{random_matrix(n, dims.raw_dim, rng), std::vector<double>(n)};
      for (std::size_t i = 0; i < n; ++i) f.confidence[i] = static_cast<double>(n - i) / static_cast<double>(n + 1);
      video.frames.push_back(std::move(f));
    }
    std::vector<std::size_t> frames(n_frames);
    std::iota(frames.begin(), frames.end(), std::size_t{0});
    const ProposalStrategy strategy{ProposalMode::quantity, 8, 0.9};

    auto fwd = forward(model, video, std::span<const std::size_t>(frames), strategy);
    if (fwd.min_selection_margin() < cfg.tie_margin) {
      ++report.skipped;
      continue;
    }
    model.zero_grad();
    loss_and_backward(model, fwd);

    auto params = model.parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto numeric = fd_gradient([&](const Matrix<double>& wp) {
        Model<double> m = model;
        *m.parameters()[p].value = wp;
        auto out = forward(m, video, std::span<const std::size_t>(frames), strategy);
        return cross_entropy(std::span<const double>(out.logits), out.label);
      }, *params[p].value, cfg.h);
      table.record(params[p].name, max_relative_error(*params[p].grad, numeric));
    }
    ++report.checked;
    ++inst;
  }
  table.append_to(report);
}

}  // namespace detail

/// Randomized finite-difference audit of every backward pass in the library.
inline GradCheckReport run_gradcheck(const GradCheckConfig& cfg = {}) {
  GradCheckReport report;
  report.tolerance = cfg.tolerance;
  detail::relation_suite(cfg, report);
  detail::sam_block_suite(cfg, report);
  detail::pipeline_suite(cfg, report);
  return report;
}

}  // namespace sam
