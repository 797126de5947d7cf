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
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sam {

/// Thrown when operand shapes do not agree. The message carries both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a computation produces NaN or Inf where finite values are required.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Dense row-major matrix.
 *
 * All reductions in this header sum over the reduced index in ascending
 * order, so two calls with identical inputs produce identical bytes.
 */
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<T>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  std::string shape() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  template <typename U>
  Matrix<U> cast() const {
    Matrix<U> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.flat()[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

namespace detail {

inline void require(bool ok, const char* op, const std::string& a, const std::string& b) {
  if (!ok) {
    std::ostringstream msg;
    msg << op << ": shape mismatch " << a << " vs " << b;
    throw ShapeError(msg.str());
  }
}

}  // namespace detail

/// C = A * B.
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  detail::require(a.cols() == b.rows(), "matmul", a.shape(), b.shape());
  Matrix<T> c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T* ci = c.data() + i * n;
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const T ail = a(i, l);
      const T* bl = b.data() + l * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += ail * bl[j];
    }
  }
  return c;
}

/// C = A^T * B without materializing the transpose.
template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
  detail::require(a.rows() == b.rows(), "matmul_tn", a.shape(), b.shape());
  Matrix<T> c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t l = 0; l < a.rows(); ++l) {
    const T* bl = b.data() + l * n;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T ali = a(l, i);
      T* ci = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += ali * bl[j];
    }
  }
  return c;
}

/// C = A * B^T without materializing the transpose.
template <typename T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
  detail::require(a.cols() == b.cols(), "matmul_nt", a.shape(), b.shape());
  Matrix<T> c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto bj = b.row(j);
      T acc = T(0);
      for (std::size_t l = 0; l < ai.size(); ++l) acc += ai[l] * bj[l];
      c(i, j) = acc;
    }
  }
  return c;
}

/// Accumulates A^T * B into `out` (same ascending-row order as matmul_tn).
template <typename T>
void add_matmul_tn(Matrix<T>& out, const Matrix<T>& a, const Matrix<T>& b) {
  detail::require(a.rows() == b.rows(), "add_matmul_tn", a.shape(), b.shape());
  detail::require(out.rows() == a.cols() && out.cols() == b.cols(), "add_matmul_tn",
                  out.shape(), a.shape() + "^T*" + b.shape());
  Matrix<T> prod = matmul_tn(a, b);
  for (std::size_t i = 0; i < out.size(); ++i) out.flat()[i] += prod.flat()[i];
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

template <typename T>
Matrix<T>& operator+=(Matrix<T>& a, const Matrix<T>& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "add", a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) a.flat()[i] += b.flat()[i];
  return a;
}

template <typename T>
Matrix<T> operator+(Matrix<T> a, const Matrix<T>& b) {
  a += b;
  return a;
}

/// Gathers the listed rows, in the listed order.
template <typename T>
Matrix<T> gather_rows(const Matrix<T>& a, std::span<const std::size_t> idx) {
  Matrix<T> out(idx.size(), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= a.rows()) throw ShapeError("gather_rows: row index out of range");
    std::copy_n(a.row(idx[r]).begin(), a.cols(), out.row(r).begin());
  }
  return out;
}

/// Restriction of a square matrix to the listed rows and columns.
template <typename T>
Matrix<T> gather_square(const Matrix<T>& a, std::span<const std::size_t> idx) {
  Matrix<T> out(idx.size(), idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < idx.size(); ++c) out(r, c) = a(idx[r], idx[c]);
  return out;
}

/// Row-wise softmax with per-row max subtraction.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& s) {
  Matrix<T> out(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const auto in = s.row(i);
    auto o = out.row(i);
    if (in.empty()) continue;
    const T mx = *std::max_element(in.begin(), in.end());
    T total = T(0);
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (auto& v : o) v /= total;
  }
  return out;
}

/// Vector-Jacobian product of softmax_rows given its output Y and upstream dY.
template <typename T>
Matrix<T> softmax_rows_backward(const Matrix<T>& y, const Matrix<T>& dy) {
  detail::require(y.rows() == dy.rows() && y.cols() == dy.cols(), "softmax_rows_backward",
                  y.shape(), dy.shape());
  Matrix<T> ds(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const auto yi = y.row(i);
    const auto gi = dy.row(i);
    T dot = T(0);
    for (std::size_t j = 0; j < yi.size(); ++j) dot += yi[j] * gi[j];
    for (std::size_t j = 0; j < yi.size(); ++j) ds(i, j) = yi[j] * (gi[j] - dot);
  }
  return ds;
}

/// Arithmetic mean over rows.
template <typename T>
std::vector<T> column_mean(const Matrix<T>& a) {
  if (a.rows() == 0) throw ShapeError("column_mean: matrix has no rows");
  std::vector<T> out(a.cols(), T(0));
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += r[j];
  }
  const T k = static_cast<T>(a.rows());
  for (auto& v : out) v /= k;
  return out;
}

}  // namespace sam
