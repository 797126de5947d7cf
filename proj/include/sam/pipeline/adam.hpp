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
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sam/linalg.hpp"
#include "sam/pipeline/model.hpp"

namespace sam {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.9;
  double eps = 1e-4;
};

/// Step-decay schedule: base * decay^floor((epoch - 1) / step_epochs), epochs 1-based.
inline double scheduled_lr(double base, double decay, int step_epochs, int epoch) {
  if (epoch < 1) throw std::invalid_argument("scheduled_lr: epochs are 1-based");
  double lr = base;
  for (int e = step_epochs; e < epoch; e += step_epochs) lr *= decay;
  return lr;
}

/**
 * Adam with bias correction. Moments are kept per parameter tensor, in the
 * order the tensors were registered.
 */
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update. Rejects the whole step (no tensor modified) if any
  /// gradient entry is non-finite.
  void step(std::span<const ParamRef<T>> params, double lr) {
    for (const auto& p : params) {
      if (!p.grad->all_finite()) throw NonFiniteError("adam: non-finite gradient in " + p.name);
    }
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.value->rows(), p.value->cols());
        v_.emplace_back(p.value->rows(), p.value->cols());
      }
    }
    if (m_.size() != params.size()) throw std::logic_error("adam: parameter set changed");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto w = params[k].value->flat();
      const auto g = params[k].grad->flat();
      auto m = m_[k].flat();
      auto v = v_[k].flat();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * gi;
        const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps);
        w[i] = static_cast<T>(static_cast<double>(w[i]) - update);
      }
    }
  }

  long long steps() const noexcept { return t_; }
  const std::vector<Matrix<T>>& first_moments() const noexcept { return m_; }
  const std::vector<Matrix<T>>& second_moments() const noexcept { return v_; }

 private:
  AdamConfig cfg_;
  long long t_ = 0;
  std::vector<Matrix<T>> m_, v_;
};

}  // namespace sam
