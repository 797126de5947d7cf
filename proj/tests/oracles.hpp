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

// Reference implementations written against nested vectors only. None of
// them calls into the library, so they can check it.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, Vec(c, 0.0)); }

inline Mat mul(const Mat& a, const Mat& b) {
  const std::size_t n = a.size(), m = b.empty() ? 0 : b[0].size(), k = b.size();
  Mat c = zeros(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a[i][l] * b[l][j];
      c[i][j] = s;
    }
  return c;
}

inline Mat transpose(const Mat& a) {
  if (a.empty()) return {};
  Mat t = zeros(a[0].size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline Mat softmax_rows(const Mat& s) {
  Mat out = s;
  for (auto& row : out) {
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double z = 0.0;
    for (double& v : row) z += (v = std::exp(v - mx));
    for (double& v : row) v /= z;
  }
  return out;
}

/// Top-k by full sort: value descending, index ascending; returned ascending.
inline std::vector<std::size_t> top_k(const Vec& a, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> keyed;
  for (std::size_t i = 0; i < a.size(); ++i) keyed.emplace_back(-a[i], i);
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(keyed[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

struct Weights {
  Mat phi, psi, omega, w_z;
};

struct RelationResult {
  Mat relations;
  Vec relatedness;
  std::vector<std::size_t> selected;
  Mat z;
};

/// The relation module in its most literal form.
inline RelationResult relation(const Mat& x, const Weights& w, std::size_t k) {
  const std::size_t n = x.size();
  const Mat q = mul(x, w.phi), key = mul(x, w.psi);
  Mat s = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t e = 0; e < q[0].size(); ++e) s[i][j] += q[i][e] * key[j][e];
  RelationResult r;
  r.relations = softmax_rows(s);
  r.relatedness.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) r.relatedness[i] += r.relations[i][j] + r.relations[j][i];
  r.selected = top_k(r.relatedness, std::min(k, n));
  const std::size_t kk = r.selected.size();
  Mat sh = zeros(kk, kk), xh;
  for (std::size_t a = 0; a < kk; ++a) {
    xh.push_back(x[r.selected[a]]);
    for (std::size_t b = 0; b < kk; ++b) sh[a][b] = s[r.selected[a]][r.selected[b]];
  }
  const Mat rh = softmax_rows(sh);
  r.z = mul(mul(mul(rh, xh), w.omega), w.w_z);
  for (std::size_t a = 0; a < kk; ++a)
    for (std::size_t c = 0; c < xh[0].size(); ++c) r.z[a][c] += xh[a][c];
  return r;
}

inline Vec column_mean(const Mat& z) {
  Vec m(z[0].size(), 0.0);
  for (const auto& row : z)
    for (std::size_t c = 0; c < row.size(); ++c) m[c] += row[c];
  for (double& v : m) v /= static_cast<double>(z.size());
  return m;
}

struct FrameInput {
  Mat features;
  Vec confidence;
};

struct ModelWeights {
  Mat lift;  // raw x D
  bool spatial = false, temporal = false;
  Weights sw, tw;
  std::size_t kp = 1, kf = 1;
  Mat classifier;  // D x C
  Vec bias;
};

/// Video logits: top-n proposals by confidence, lift, spatial module + mean,
/// temporal module + mean, affine map. Frames without proposals are zero.
inline Vec video_logits(const std::vector<FrameInput>& frames, const ModelWeights& m, std::size_t n_keep) {
  const std::size_t d = m.lift[0].size();
  Mat frame_vecs;
  for (const auto& f : frames) {
    const auto keep = top_k(f.confidence, std::min(n_keep, f.confidence.size()));
    Vec v(d, 0.0);
    if (!keep.empty()) {
      Mat x;
      for (auto i : keep) x.push_back(f.features[i]);
      x = mul(x, m.lift);
      v = m.spatial ? column_mean(relation(x, m.sw, m.kp).z) : column_mean(x);
    }
    frame_vecs.push_back(v);
  }
  const Vec video = m.temporal ? column_mean(relation(frame_vecs, m.tw, m.kf).z) : column_mean(frame_vecs);
  Vec logits = m.bias;
  for (std::size_t c = 0; c < logits.size(); ++c)
    for (std::size_t j = 0; j < d; ++j) logits[c] += video[j] * m.classifier[j][c];
  return logits;
}

/// P(overlap = j) when drawing `draw` of `total` items of which `good` are marked.
inline double hypergeometric_mean_fraction(std::size_t total, std::size_t good, std::size_t draw) {
  auto choose = [](std::size_t n, std::size_t r) {
    if (r > n) return 0.0;
    double c = 1.0;
    for (std::size_t i = 1; i <= r; ++i) c = c * static_cast<double>(n - r + i) / static_cast<double>(i);
    return c;
  };
  double mean = 0.0;
  for (std::size_t j = 0; j <= draw; ++j) {
    mean += static_cast<double>(j) * choose(good, j) * choose(total - good, draw - j) / choose(total, draw);
  }
  return mean / static_cast<double>(draw);
}

template <typename R>
Mat random_mat(std::size_t r, std::size_t c, R& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mat m = zeros(r, c);
  for (auto& row : m)
    for (double& v : row) v = g(rng);
  return m;
}

}  // namespace oracle
