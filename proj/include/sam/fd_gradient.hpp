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
#include <concepts>
#include <string>

#include "sam/linalg.hpp"

namespace sam {

/**
 * Central finite-difference gradient of a scalar function of a matrix.
 *
 * Each entry is (f(X + h e_ij) - f(X - h e_ij)) / 2h. The function must be
 * pure; X is perturbed in a private copy and restored between evaluations.
 * Always double precision.
 */
template <typename F>
  requires std::invocable<F&, const Matrix<double>&>
Matrix<double> fd_gradient(F&& f, const Matrix<double>& x, double h = 1e-5) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: step must be positive");
  Matrix<double> probe = x;
  Matrix<double> grad(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = static_cast<double>(f(static_cast<const Matrix<double>&>(probe)));
      probe(i, j) = orig - h;
      const double down = static_cast<double>(f(static_cast<const Matrix<double>&>(probe)));
      probe(i, j) = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NonFiniteError("fd_gradient: non-finite evaluation at (" + std::to_string(i) +
                             ", " + std::to_string(j) + ")");
      }
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

/// Max entrywise |a - b| divided by the largest magnitude in either matrix.
/// Two all-zero matrices compare equal.
inline double max_relative_error(const Matrix<double>& analytic, const Matrix<double>& numeric) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw ShapeError("max_relative_error: shape mismatch " + analytic.shape() + " vs " +
                     numeric.shape());
  }
  double scale = 0.0;
  for (double v : numeric.flat()) scale = std::max(scale, std::abs(v));
  for (double v : analytic.flat()) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, std::abs(analytic.flat()[i] - numeric.flat()[i]) / scale);
  }
  return worst;
}

}  // namespace sam
