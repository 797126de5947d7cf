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
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sam/linalg.hpp"

namespace sam {

/// The four learnable maps of one relation module. phi/psi/omega are D x De,
/// w_z is De x D.
template <typename T>
struct SamWeights {
  Matrix<T> phi;
  Matrix<T> psi;
  Matrix<T> omega;
  Matrix<T> w_z;

  static SamWeights zeros(std::size_t d, std::size_t de) {
    return {Matrix<T>(d, de), Matrix<T>(d, de), Matrix<T>(d, de), Matrix<T>(de, d)};
  }

  std::size_t input_dim() const noexcept { return phi.rows(); }
  std::size_t embed_dim() const noexcept { return phi.cols(); }

  template <typename F>
  void for_each(F&& f) {
    f(phi);
    f(psi);
    f(omega);
    f(w_z);
  }
  template <typename F>
  void for_each(F&& f) const {
    f(phi);
    f(psi);
    f(omega);
    f(w_z);
  }
};

/// Fills `m` with U(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in = m.rows().
template <typename T, typename Rng>
void init_uniform_fan_in(Matrix<T>& m, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, m.rows())));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : m.flat()) v = static_cast<T>(dist(rng));
}

/**
 * Weights plus gradient accumulators for one relation module.
 *
 * `version` is bumped whenever the weights change so that forward caches
 * computed against older weights can be detected in backward.
 */
template <typename T>
struct SamParams {
  SamWeights<T> value;
  SamWeights<T> grad;
  std::uint64_t version = 0;

  SamParams() = default;
  SamParams(std::size_t d, std::size_t de)
      : value(SamWeights<T>::zeros(d, de)), grad(SamWeights<T>::zeros(d, de)) {}

  /// Fan-in uniform weights. With `tie_query_key`, psi starts as a copy of
  /// phi so the initial scores are a Gram matrix; the two still train apart.
  template <typename Rng>
  static SamParams random(std::size_t d, std::size_t de, Rng& rng, bool tie_query_key = false) {
    SamParams p(d, de);
    p.value.for_each([&](Matrix<T>& m) { init_uniform_fan_in(m, rng); });
    if (tie_query_key) p.value.psi = p.value.phi;
    return p;
  }

  void zero_grad() {
    grad.for_each([](Matrix<T>& m) { m.fill(T(0)); });
  }

  std::size_t input_dim() const noexcept { return value.input_dim(); }
  std::size_t embed_dim() const noexcept { return value.embed_dim(); }
};

/// S = (X Phi)(X Psi)^T, self-pairs included.
template <typename T>
Matrix<T> pairwise_scores(const Matrix<T>& x, const SamWeights<T>& w) {
  if (x.rows() == 0) throw ShapeError("pairwise_scores: empty feature set");
  detail::require(x.cols() == w.input_dim(), "pairwise_scores", x.shape(), w.phi.shape());
  return matmul_nt(matmul(x, w.phi), matmul(x, w.psi));
}

template <typename T>
struct DenseRelation {
  Matrix<T> relations;     // row-softmax of the scores
  std::vector<T> relatedness;  // alpha_i = sum_j (R_ij + R_ji)
};

template <typename T>
DenseRelation<T> dense_relation(const Matrix<T>& scores) {
  detail::require(scores.rows() == scores.cols(), "dense_relation", scores.shape(), "square");
  DenseRelation<T> out{softmax_rows(scores), std::vector<T>(scores.rows(), T(0))};
  const auto& r = out.relations;
  const std::size_t n = r.rows();
  for (std::size_t i = 0; i < n; ++i) {
    T a = T(0);
    for (std::size_t j = 0; j < n; ++j) a += r(i, j) + r(j, i);
    out.relatedness[i] = a;
  }
  return out;
}

/// Indices of the retained nodes, ascending, out of `source_size` inputs.
struct Selection {
  std::vector<std::size_t> indices;
  std::size_t source_size = 0;

  std::size_t size() const noexcept { return indices.size(); }

  std::vector<int> lambda() const {
    std::vector<int> l(source_size, 0);
    for (auto i : indices) l[i] = 1;
    return l;
  }
};

/**
 * Top-K by relatedness. Larger value wins; equal values go to the smaller
 * index. The result is emitted in ascending index order.
 */
template <typename T>
Selection prune(std::span<const T> relatedness, std::size_t k) {
  const std::size_t n = relatedness.size();
  if (k < 1 || k > n) {
    throw std::invalid_argument("prune: need 1 <= K <= N, got K=" + std::to_string(k) +
                                " N=" + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (relatedness[a] != relatedness[b]) return relatedness[a] > relatedness[b];
                      return a < b;
                    });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return {std::move(order), n};
}

template <typename T>
Selection prune(const std::vector<T>& relatedness, std::size_t k) {
  return prune(std::span<const T>(relatedness), k);
}

/// Row-softmax of the pre-softmax scores restricted to the selected nodes.
template <typename T>
Matrix<T> sparse_relation(const Matrix<T>& scores, const Selection& sel) {
  detail::require(scores.rows() == scores.cols() && scores.rows() == sel.source_size,
                  "sparse_relation", scores.shape(), std::to_string(sel.source_size));
  return softmax_rows(gather_square(scores, std::span<const std::size_t>(sel.indices)));
}

/// Z = (R_hat (X_hat Omega)) W_z + X_hat.
template <typename T>
Matrix<T> relational_embed(const Matrix<T>& x_hat, const Matrix<T>& r_hat,
                           const SamWeights<T>& w) {
  detail::require(r_hat.rows() == x_hat.rows() && r_hat.cols() == x_hat.rows(),
                  "relational_embed", r_hat.shape(), x_hat.shape());
  detail::require(x_hat.cols() == w.input_dim(), "relational_embed", x_hat.shape(),
                  w.omega.shape());
  Matrix<T> z = matmul(matmul(r_hat, matmul(x_hat, w.omega)), w.w_z);
  z += x_hat;
  return z;
}

/// Everything the backward pass needs from one forward pass.
template <typename T>
struct RelationCache {
  Selection selection;
  Matrix<T> x_hat;   // K x D
  Matrix<T> query;   // X_hat Phi
  Matrix<T> key;     // X_hat Psi
  Matrix<T> value;   // X_hat Omega
  Matrix<T> r_hat;   // K x K
  Matrix<T> mixed;   // R_hat * value
  // Relatedness gap between the K-th and (K+1)-th ranked nodes; +inf when
  // nothing was pruned. Small values mean the selection sits near a tie.
  double selection_margin = std::numeric_limits<double>::infinity();
  std::uint64_t params_version = 0;
  bool consumed = false;
};

/// Gap between the K-th and (K+1)-th largest relatedness values.
template <typename T>
double selection_margin(std::span<const T> relatedness, std::size_t k) {
  if (k >= relatedness.size()) return std::numeric_limits<double>::infinity();
  std::vector<T> sorted(relatedness.begin(), relatedness.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<T>());
  return static_cast<double>(sorted[k - 1] - sorted[k]);
}

template <typename T>
struct RelationForward {
  Matrix<T> z;
  DenseRelation<T> dense;
  RelationCache<T> cache;
};

/**
 * Full relation-graph pass: dense graph over all N inputs, top-K pruning by
 * relatedness, sparse graph over the K survivors, residual relational
 * embedding.
 */
template <typename T>
RelationForward<T> relation_forward(const Matrix<T>& x, const SamParams<T>& params,
                                    std::size_t k) {
  const auto& w = params.value;
  detail::require(x.cols() == w.input_dim(), "relation_forward", x.shape(), w.phi.shape());
  if (x.rows() == 0) throw ShapeError("relation_forward: empty feature set");

  Matrix<T> query_all = matmul(x, w.phi);
  Matrix<T> key_all = matmul(x, w.psi);
  Matrix<T> scores = matmul_nt(query_all, key_all);

  RelationForward<T> out;
  out.dense = dense_relation(scores);
  auto& c = out.cache;
  c.selection = prune(std::span<const T>(out.dense.relatedness), k);
  c.selection_margin = selection_margin(std::span<const T>(out.dense.relatedness), k);
  const std::span<const std::size_t> idx(c.selection.indices);
  c.x_hat = gather_rows(x, idx);
  c.query = gather_rows(query_all, idx);
  c.key = gather_rows(key_all, idx);
  c.value = matmul(c.x_hat, w.omega);
  c.r_hat = softmax_rows(gather_square(scores, idx));
  c.mixed = matmul(c.r_hat, c.value);
  c.params_version = params.version;

  out.z = matmul(c.mixed, w.w_z);
  out.z += c.x_hat;
  return out;
}

/**
 * Vector-Jacobian product of relation_forward. Parameter gradients are added
 * into params.grad; the returned dX is N x D with zero rows for pruned nodes.
 * Selection indices are constants. A cache can be consumed once.
 */
template <typename T>
Matrix<T> relation_backward(RelationCache<T>& cache, const Matrix<T>& dz, SamParams<T>& params) {
  if (cache.consumed) throw std::logic_error("relation_backward: cache already consumed");
  if (cache.params_version != params.version) {
    throw std::logic_error("relation_backward: cache is stale (parameters changed since forward)");
  }
  detail::require(dz.rows() == cache.x_hat.rows() && dz.cols() == cache.x_hat.cols(),
                  "relation_backward", dz.shape(), cache.x_hat.shape());
  cache.consumed = true;

  const auto& w = params.value;
  auto& g = params.grad;

  add_matmul_tn(g.w_z, cache.mixed, dz);
  Matrix<T> d_mixed = matmul_nt(dz, w.w_z);
  Matrix<T> d_rhat = matmul_nt(d_mixed, cache.value);
  Matrix<T> d_value = matmul_tn(cache.r_hat, d_mixed);
  add_matmul_tn(g.omega, cache.x_hat, d_value);

  Matrix<T> d_scores = softmax_rows_backward(cache.r_hat, d_rhat);
  Matrix<T> d_query = matmul(d_scores, cache.key);
  Matrix<T> d_key = matmul_tn(d_scores, cache.query);
  add_matmul_tn(g.phi, cache.x_hat, d_query);
  add_matmul_tn(g.psi, cache.x_hat, d_key);

  Matrix<T> dx_hat = dz;
  dx_hat += matmul_nt(d_value, w.omega);
  dx_hat += matmul_nt(d_query, w.phi);
  dx_hat += matmul_nt(d_key, w.psi);

  Matrix<T> dx(cache.selection.source_size, dz.cols());
  for (std::size_t r = 0; r < cache.selection.size(); ++r) {
    std::copy_n(dx_hat.row(r).begin(), dx.cols(), dx.row(cache.selection.indices[r]).begin());
  }
  return dx;
}

}  // namespace sam
