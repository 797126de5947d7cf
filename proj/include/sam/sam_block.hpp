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
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sam/linalg.hpp"
#include "sam/relation_graph.hpp"

namespace sam {

enum class SamDomain { spatial, temporal };

inline const char* to_string(SamDomain d) {
  return d == SamDomain::spatial ? "spatial" : "temporal";
}

/**
 * One social adaptive module: selects K of N input features by relatedness
 * and re-embeds them over the sparse relation graph.
 *
 * A model owns one block per domain and applies it to every frame (spatial)
 * or every video (temporal); gradients from each application accumulate.
 */
template <typename T>
struct SamBlock {
  SamParams<T> params;
  std::size_t k = 1;
  SamDomain domain = SamDomain::spatial;

  SamBlock() = default;
  SamBlock(SamParams<T> p, std::size_t k_, SamDomain d) : params(std::move(p)), k(k_), domain(d) {
    if (k < 1) throw std::invalid_argument("SamBlock: k must be >= 1");
  }

  /// K actually used for an input of n rows.
  std::size_t effective_k(std::size_t n) const noexcept { return std::min(k, n); }
};

template <typename T>
struct SamOutput {
  Matrix<T> z;
  Selection selection;
  RelationCache<T> cache;
};

template <typename T>
SamOutput<T> sam_forward(const SamBlock<T>& block, const Matrix<T>& x) {
  if (x.rows() == 0) {
    throw std::invalid_argument(std::string("sam_forward(") + to_string(block.domain) +
                                "): empty input");
  }
  auto fwd = relation_forward(x, block.params, block.effective_k(x.rows()));
  SamOutput<T> out{std::move(fwd.z), fwd.cache.selection, std::move(fwd.cache)};
  return out;
}

template <typename T>
std::vector<T> mean_fuse(const Matrix<T>& z) {
  if (z.rows() == 0) throw std::invalid_argument("mean_fuse: K must be >= 1");
  return column_mean(z);
}

/// Backward of mean_fuse: every row receives d_out / K.
template <typename T>
Matrix<T> mean_fuse_backward(std::span<const T> d_out, std::size_t k) {
  if (k == 0) throw std::invalid_argument("mean_fuse_backward: K must be >= 1");
  Matrix<T> dz(k, d_out.size());
  const T inv = T(1) / static_cast<T>(k);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < d_out.size(); ++c) dz(r, c) = d_out[c] * inv;
  return dz;
}

/// Accumulates parameter gradients into block.params.grad and returns dX.
template <typename T>
Matrix<T> sam_backward(SamBlock<T>& block, SamOutput<T>& out, const Matrix<T>& dz) {
  return relation_backward(out.cache, dz, block.params);
}

/// Convenience: backward from the fused vector instead of the K x D output.
template <typename T>
Matrix<T> sam_backward_fused(SamBlock<T>& block, SamOutput<T>& out, std::span<const T> d_fused) {
  return sam_backward(block, out, mean_fuse_backward(d_fused, out.z.rows()));
}

}  // namespace sam
