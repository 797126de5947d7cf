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

#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sam/linalg.hpp"
#include "sam/pipeline/sampling.hpp"
#include "sam/relation_graph.hpp"
#include "sam/rng.hpp"
#include "sam/sam_block.hpp"
#include "sam/synthetic_scene.hpp"

namespace sam {

/// Shape of a model; everything needed to allocate one.
struct ModelDims {
  std::size_t raw_dim = 32;       // dataset feature dimension
  std::size_t embed_dim = 32;     // D after the input lift
  std::size_t relation_dim = 32;  // De inside each relation module
  std::size_t num_classes = 9;
  bool spatial_sam = true;
  std::size_t k_proposals = 8;
  bool temporal_sam = false;
  std::size_t k_frames = 6;
  bool tie_query_key = true;  // start each module with Psi == Phi
  bool identity_lift = true;  // start the lift at I when raw_dim == embed_dim
  bool zero_init_output = true;  // start w_z at 0: kept rows pass through unchanged
};

/// Non-owning view of one learnable tensor and its gradient accumulator.
template <typename T>
struct ParamRef {
  std::string name;
  Matrix<T>* value;
  Matrix<T>* grad;
};

/**
 * Input lift -> per-frame Spatial-SAM + mean -> Temporal-SAM + mean -> affine
 * classifier. Either module can be switched off, in which case the stage is
 * plain mean pooling.
 */
template <typename T>
struct Model {
  ModelDims dims;
  Matrix<T> input_embed, input_embed_grad;  // raw_dim x embed_dim
  std::optional<SamBlock<T>> spatial;
  std::optional<SamBlock<T>> temporal;
  Matrix<T> classifier, classifier_grad;  // embed_dim x num_classes
  Matrix<T> bias, bias_grad;              // 1 x num_classes

  Model() = default;

  /// Allocates a model with all weights zero.
  explicit Model(const ModelDims& d)
      : dims(d),
        input_embed(d.raw_dim, d.embed_dim),
        input_embed_grad(d.raw_dim, d.embed_dim),
        classifier(d.embed_dim, d.num_classes),
        classifier_grad(d.embed_dim, d.num_classes),
        bias(1, d.num_classes),
        bias_grad(1, d.num_classes) {
    if (d.spatial_sam) {
      spatial.emplace(SamParams<T>(d.embed_dim, d.relation_dim), d.k_proposals, SamDomain::spatial);
    }
    if (d.temporal_sam) {
      temporal.emplace(SamParams<T>(d.embed_dim, d.relation_dim), d.k_frames, SamDomain::temporal);
    }
  }

  /// Fan-in uniform initialization of both relation modules and (unless it
  /// starts at identity) the input lift. The classifier starts at zero
  /// unless `random_classifier`. With `zero_init_output` w_z is drawn and
  /// then zeroed, so the rng stream is the same either way.
  template <typename R>
  static Model random(const ModelDims& d, R& rng, bool random_classifier = false) {
    Model m(d);
    if (d.identity_lift && d.raw_dim == d.embed_dim) {
      m.input_embed = Matrix<T>::identity(d.raw_dim);
    } else {
      init_uniform_fan_in(m.input_embed, rng);
    }
    if (m.spatial) m.spatial->params = SamParams<T>::random(d.embed_dim, d.relation_dim, rng, d.tie_query_key);
    if (m.temporal) m.temporal->params = SamParams<T>::random(d.embed_dim, d.relation_dim, rng, d.tie_query_key);
    if (d.zero_init_output) {
      if (m.spatial) m.spatial->params.value.w_z.fill(T(0));
      if (m.temporal) m.temporal->params.value.w_z.fill(T(0));
    }
    if (random_classifier) init_uniform_fan_in(m.classifier, rng);
    return m;
  }

  std::vector<ParamRef<T>> parameters() {
    std::vector<ParamRef<T>> p;
    p.push_back({"input_embed", &input_embed, &input_embed_grad});
    auto add_block = [&](std::optional<SamBlock<T>>& b, const std::string& prefix) {
      if (!b) return;
      auto& v = b->params.value;
      auto& g = b->params.grad;
      p.push_back({prefix + ".phi", &v.phi, &g.phi});
      p.push_back({prefix + ".psi", &v.psi, &g.psi});
      p.push_back({prefix + ".omega", &v.omega, &g.omega});
      p.push_back({prefix + ".w_z", &v.w_z, &g.w_z});
    };
    add_block(spatial, "spatial");
    add_block(temporal, "temporal");
    p.push_back({"classifier", &classifier, &classifier_grad});
    p.push_back({"bias", &bias, &bias_grad});
    return p;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.grad->fill(T(0));
  }

  /// Marks the weights as changed so outstanding forward caches go stale.
  void bump_version() {
    if (spatial) ++spatial->params.version;
    if (temporal) ++temporal->params.version;
  }
};

/// Per-frame record of one forward pass.
template <typename T>
struct FrameTrace {
  std::size_t frame_index = 0;          // position on the video timeline
  SelectedProposals proposals;          // what entered the model
  std::optional<SamOutput<T>> sam;      // spatial module output, if enabled
  std::vector<std::size_t> pooled;      // original proposal indices that were pooled
};

template <typename T>
struct ForwardResult {
  std::vector<T> logits;
  std::vector<FrameTrace<T>> frames;
  Matrix<T> frame_vectors;                // N^f x D
  std::optional<SamOutput<T>> temporal;   // temporal module output, if enabled
  std::vector<std::size_t> pooled_frames; // positions into `frames` that were pooled
  std::vector<T> video_vector;
  int label = -1;
  bool consumed = false;

  /// Smallest relatedness margin over all module applications in this pass.
  double min_selection_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& f : frames)
      if (f.sam) m = std::min(m, f.sam->cache.selection_margin);
    if (temporal) m = std::min(m, temporal->cache.selection_margin);
    return m;
  }
};

/**
 * Forward pass over the given timeline positions. `frame_indices` normally
 * comes from segment_sample.
 */
template <typename T>
ForwardResult<T> forward(const Model<T>& model, const VideoSample& sample,
                         std::span<const std::size_t> frame_indices, const ProposalStrategy& strategy) {
  const std::size_t d = model.dims.embed_dim;
  ForwardResult<T> out;
  out.label = sample.label;
  out.frame_vectors = Matrix<T>(frame_indices.size(), d);
  for (std::size_t f = 0; f < frame_indices.size(); ++f) {
    const std::size_t t = frame_indices[f];
    if (t >= sample.frames.size()) throw ShapeError("forward: frame index out of range");
    FrameTrace<T> trace;
    trace.frame_index = t;
    trace.proposals = select_proposals(sample.frames[t], strategy);
    if (!trace.proposals.empty()) {
      if (trace.proposals.features.cols() != model.dims.raw_dim) {
        throw ShapeError("forward: feature dim " + std::to_string(trace.proposals.features.cols()) +
                         " does not match model raw_dim " + std::to_string(model.dims.raw_dim));
      }
      Matrix<T> x = matmul(trace.proposals.features.template cast<T>(), model.input_embed);
      std::vector<T> v;
      if (model.spatial) {
        auto sam_out = sam_forward(*model.spatial, x);
        v = mean_fuse(sam_out.z);
        for (auto i : sam_out.selection.indices) trace.pooled.push_back(trace.proposals.indices[i]);
        trace.sam = std::move(sam_out);
      } else {
        v = mean_fuse(x);
        trace.pooled = trace.proposals.indices;
      }
      std::copy(v.begin(), v.end(), out.frame_vectors.row(f).begin());
    }
    out.frames.push_back(std::move(trace));
  }

  if (model.temporal) {
    auto t_out = sam_forward(*model.temporal, out.frame_vectors);
    out.video_vector = mean_fuse(t_out.z);
    out.pooled_frames = t_out.selection.indices;
    out.temporal = std::move(t_out);
  } else {
    out.video_vector = mean_fuse(out.frame_vectors);
    out.pooled_frames.resize(frame_indices.size());
    std::iota(out.pooled_frames.begin(), out.pooled_frames.end(), std::size_t{0});
  }

  const std::size_t c = model.dims.num_classes;
  out.logits.assign(c, T(0));
  for (std::size_t k = 0; k < c; ++k) {
    T acc = T(0);
    for (std::size_t j = 0; j < d; ++j) acc += out.video_vector[j] * model.classifier(j, k);
    out.logits[k] = acc + model.bias(0, k);
  }
  return out;
}

/// -log softmax(logits)[label], computed with max subtraction.
template <typename T>
double cross_entropy(std::span<const T> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw std::invalid_argument("cross_entropy: label out of range");
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (T v : logits) mx = std::max(mx, static_cast<double>(v));
  double total = 0.0;
  for (T v : logits) total += std::exp(static_cast<double>(v) - mx);
  return std::log(total) + mx - static_cast<double>(logits[static_cast<std::size_t>(label)]);
}

/**
 * Softmax cross-entropy on the video label plus full backward. Gradients
 * are added into the model's accumulators; the caches in `fwd` are consumed.
 */
template <typename T>
double loss_and_backward(Model<T>& model, ForwardResult<T>& fwd) {
  if (fwd.consumed) throw std::logic_error("loss_and_backward: forward result already consumed");
  const double loss = cross_entropy(std::span<const T>(fwd.logits), fwd.label);
  if (!std::isfinite(loss)) throw NonFiniteError("loss_and_backward: non-finite loss");
  fwd.consumed = true;

  const std::size_t c = model.dims.num_classes;
  const std::size_t d = model.dims.embed_dim;
  const auto probs = softmax_rows(Matrix<T>(1, c, fwd.logits));
  std::vector<T> dlogits(c);
  for (std::size_t k = 0; k < c; ++k) dlogits[k] = probs(0, k) - (static_cast<int>(k) == fwd.label ? T(1) : T(0));

  std::vector<T> dvideo(d, T(0));
  for (std::size_t j = 0; j < d; ++j) {
    T acc = T(0);
    for (std::size_t k = 0; k < c; ++k) {
      model.classifier_grad(j, k) += fwd.video_vector[j] * dlogits[k];
      acc += model.classifier(j, k) * dlogits[k];
    }
    dvideo[j] = acc;
  }
  for (std::size_t k = 0; k < c; ++k) model.bias_grad(0, k) += dlogits[k];

  Matrix<T> dframes;
  if (model.temporal) {
    dframes = sam_backward_fused(*model.temporal, *fwd.temporal, std::span<const T>(dvideo));
  } else {
    dframes = mean_fuse_backward(std::span<const T>(dvideo), fwd.frame_vectors.rows());
  }

  for (std::size_t f = 0; f < fwd.frames.size(); ++f) {
    auto& trace = fwd.frames[f];
    if (trace.proposals.empty()) continue;
    const auto dv = dframes.row(f);
    Matrix<T> dx;
    if (model.spatial) {
      dx = sam_backward_fused(*model.spatial, *trace.sam, std::span<const T>(dv.data(), dv.size()));
    } else {
      dx = mean_fuse_backward(std::span<const T>(dv.data(), dv.size()), trace.proposals.features.rows());
    }
    add_matmul_tn(model.input_embed_grad, trace.proposals.features.template cast<T>(), dx);
  }
  return loss;
}

}  // namespace sam
