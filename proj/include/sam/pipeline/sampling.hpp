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
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sam/linalg.hpp"
#include "sam/synthetic_scene.hpp"

namespace sam {

enum class SampleMode { train, eval };

/**
 * Segment-based frame sampling: the timeline [0, T) is cut into n equal
 * segments; train mode draws one index per segment uniformly, eval mode takes
 * each segment's center floor((s + 0.5) T / n). Indices strictly increase.
 */
template <typename R>
std::vector<std::size_t> segment_sample(std::size_t total, std::size_t n, SampleMode mode, R& rng) {
  if (n == 0 || n > total) {
    throw std::invalid_argument("segment_sample: need 1 <= n <= T, got n=" + std::to_string(n) +
                                " T=" + std::to_string(total));
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (mode == SampleMode::eval) {
      idx[s] = ((2 * s + 1) * total) / (2 * n);
    } else {
      const std::size_t lo = s * total / n;
      const std::size_t hi = (s + 1) * total / n - 1;
      idx[s] = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    }
  }
  return idx;
}

/// Eval-mode overload; no randomness involved.
inline std::vector<std::size_t> segment_sample(std::size_t total, std::size_t n) {
  std::mt19937_64 unused;
  return segment_sample(total, n, SampleMode::eval, unused);
}

/// How many detector proposals enter the model per frame.
struct ProposalStrategy {
  ProposalMode mode = ProposalMode::quantity;
  std::size_t count = 14;  // quantity: keep the top `count` by confidence
  double theta = 0.9;      // probability: keep confidence > theta
};

struct SelectedProposals {
  std::vector<std::size_t> indices;  // original proposal indices, ascending
  Matrix<double> features;           // indices.size() x D

  bool empty() const noexcept { return indices.empty(); }
};

/// Applies the quantity- or probability-aware strategy to one frame. An empty
/// result means the frame contributes a zero vector downstream.
inline SelectedProposals select_proposals(const FrameData& frame, const ProposalStrategy& strategy) {
  const std::size_t n = frame.features.rows();
  std::vector<std::size_t> keep;
  if (strategy.mode == ProposalMode::quantity) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t k = std::min(strategy.count, n);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (frame.confidence[a] != frame.confidence[b]) {
                          return frame.confidence[a] > frame.confidence[b];
                        }
                        return a < b;
                      });
    keep.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(keep.begin(), keep.end());
  } else {
    for (std::size_t i = 0; i < n; ++i)
      if (frame.confidence[i] > strategy.theta) keep.push_back(i);
  }
  SelectedProposals out{std::move(keep), {}};
  out.features = gather_rows(frame.features, std::span<const std::size_t>(out.indices));
  return out;
}

}  // namespace sam
