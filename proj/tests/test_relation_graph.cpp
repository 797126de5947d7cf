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


#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "sam/fd_gradient.hpp"
#include "sam/relation_graph.hpp"
#include "sam/rng.hpp"
#include "test_util.hpp"

using sam::Matrix;
using sam::SamParams;
using testutil::random_matrix;

namespace {

SamParams<double> random_params(std::size_t d, std::size_t de, std::mt19937_64& rng) {
  return SamParams<double>::random(d, de, rng);
}

}  // namespace

TEST(RelationGraph, MatchesDoubleLoopOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<std::size_t> small(1, 8);
    const std::size_t n = 1 + trial % 12, d = small(rng), de = small(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, n)(rng);
    const auto p = random_params(d, de, rng);
    const auto x = random_matrix(n, d, rng);
    const auto fwd = sam::relation_forward(x, p, k);
    const auto ref = oracle::relation(testutil::to_mat(x), testutil::to_weights(p.value), k);
    EXPECT_LE(testutil::max_abs_diff(fwd.dense.relations, ref.relations), 1e-12);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(fwd.dense.relatedness[i], ref.relatedness[i], 1e-12);
    if (fwd.cache.selection_margin > 1e-9) {
      EXPECT_EQ(fwd.cache.selection.indices, ref.selected);
      EXPECT_LE(testutil::max_abs_diff(fwd.z, ref.z), 1e-10);
    }
  }
}

TEST(RelationGraph, SingleNodeIsItsOwnGraph) {
  std::mt19937_64 rng(1);
  const auto p = random_params(4, 3, rng);
  const auto x = random_matrix(1, 4, rng);
  const auto fwd = sam::relation_forward(x, p, 1);
  EXPECT_EQ(fwd.dense.relations(0, 0), 1.0);
  EXPECT_EQ(fwd.dense.relatedness[0], 2.0);
  EXPECT_EQ(fwd.cache.selection.indices, std::vector<std::size_t>{0});
}

TEST(RelationGraph, IdentityWeightsGiveGramScores) {
  Matrix<double> x{{1, 0}, {0, 2}, {1, 1}};
  sam::SamWeights<double> w{Matrix<double>::identity(2), Matrix<double>::identity(2), Matrix<double>::identity(2),
                            Matrix<double>::identity(2)};
  const auto s = sam::pairwise_scores(x, w);
  EXPECT_EQ(s, (Matrix<double>{{1, 0, 1}, {0, 4, 2}, {1, 2, 2}}));
}

TEST(RelationGraph, RelatednessIdentity) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 15;
    const auto s = random_matrix(n, n, rng, 3.0);
    const auto dense = sam::dense_relation(s);
    for (std::size_t i = 0; i < n; ++i) {
      double col = 0.0, row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        col += dense.relations(j, i);
        row += dense.relations(i, j);
      }
      EXPECT_NEAR(row, 1.0, 1e-9);
      EXPECT_NEAR(dense.relatedness[i], 1.0 + col, 1e-9);
    }
  }
}

TEST(Prune, WorkedExamples) {
  using V = std::vector<double>;
  using I = std::vector<std::size_t>;
  EXPECT_EQ(sam::prune(V{0.1, 0.9, 0.5, 0.7}, 2).indices, (I{1, 3}));
  EXPECT_EQ(sam::prune(V{1.0, 1.0, 1.0, 1.0}, 2).indices, (I{0, 1}));
  EXPECT_EQ(sam::prune(V{0.2, 0.5, 0.5, 0.1}, 1).indices, (I{1}));
  EXPECT_EQ(sam::prune(V{3.0, 1.0, 2.0}, 3).indices, (I{0, 1, 2}));
  EXPECT_EQ(sam::prune(V{3.0, 1.0, 2.0}, 1).lambda(), (std::vector<int>{1, 0, 0}));
}

TEST(Prune, RejectsInvalidK) {
  const std::vector<double> a{1.0, 2.0};
  EXPECT_THROW(sam::prune(a, 0), std::invalid_argument);
  EXPECT_THROW(sam::prune(a, 3), std::invalid_argument);
}

TEST(Prune, MatchesSortOracleIncludingTies) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, n)(rng);
    std::vector<double> a(n);
    // Coarse values so ties are common.
    std::uniform_int_distribution<int> level(0, trial % 2 ? 3 : 1000);
    for (auto& v : a) v = level(rng) * 0.25;
    ASSERT_EQ(sam::prune(a, k).indices, oracle::top_k(a, k)) << "trial " << trial;
  }
}

TEST(RelationGraph, SparseEqualsDenseWhenNothingPruned) {
  std::mt19937_64 rng(8);
  for (std::size_t n = 1; n <= 10; ++n) {
    const auto s = random_matrix(n, n, rng, 2.0);
    const auto dense = sam::dense_relation(s);
    const auto sel = sam::prune(dense.relatedness, n);
    EXPECT_EQ(sam::sparse_relation(s, sel), dense.relations);
  }
}

TEST(RelationGraph, ZeroOutputWeightIsExactResidual) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 10, k = 1 + trial % n;
    auto p = random_params(5, 3, rng);
    p.value.w_z.fill(0.0);
    const auto x = random_matrix(n, 5, rng);
    const auto fwd = sam::relation_forward(x, p, k);
    EXPECT_EQ(fwd.z, sam::gather_rows(x, std::span<const std::size_t>(fwd.cache.selection.indices)));
  }
}

TEST(RelationGraph, PermutationKeepsSelectedMultiset) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 9, k = 1 + trial % n;
    const auto p = random_params(4, 4, rng);
    const auto x = random_matrix(n, 4, rng);
    const auto fwd = sam::relation_forward(x, p, k);
    if (fwd.cache.selection_margin < 1e-9) continue;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto xp = sam::gather_rows(x, std::span<const std::size_t>(perm));
    const auto fp = sam::relation_forward(xp, p, k);
    std::vector<std::size_t> a = fwd.cache.selection.indices, b;
    for (auto i : fp.cache.selection.indices) b.push_back(perm[i]);
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
    // Rows of Z follow their inputs.
    for (std::size_t r = 0; r < fp.z.rows(); ++r) {
      const auto orig = perm[fp.cache.selection.indices[r]];
      const auto pos = std::find(a.begin(), a.end(), orig) - a.begin();
      for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(fp.z(r, c), fwd.z(pos, c), 1e-10);
    }
  }
}

TEST(RelationGraph, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 20; ++trial) {
    const std::size_t n = 1 + trial % 8, k = 1 + (trial * 7) % n;
    auto p = random_params(3, 2, rng);
    const auto x = random_matrix(n, 3, rng);
    auto fwd = sam::relation_forward(x, p, k);
    if (fwd.cache.selection_margin < 1e-3) continue;
    const auto g = random_matrix(fwd.z.rows(), 3, rng);
    auto readout = [&](const Matrix<double>& z) {
      double s = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) s += z.flat()[i] * g.flat()[i];
      return s;
    };
    const auto dx = sam::relation_backward(fwd.cache, g, p);
    EXPECT_LE(sam::max_relative_error(dx, sam::fd_gradient([&](const Matrix<double>& xp) {
                return readout(sam::relation_forward(xp, p, k).z);
              }, x)), 1e-6);
    const auto num_omega = sam::fd_gradient([&](const Matrix<double>& w) {
      auto q = p;
      q.value.omega = w;
      return readout(sam::relation_forward(x, q, k).z);
    }, p.value.omega);
    EXPECT_LE(sam::max_relative_error(p.grad.omega, num_omega), 1e-6);
    ++checked;
  }
  EXPECT_GE(checked, 20);
}

TEST(RelationGraph, PrunedRowsGetZeroInputGradient) {
  std::mt19937_64 rng(23);
  auto p = random_params(3, 3, rng);
  const auto x = random_matrix(6, 3, rng);
  auto fwd = sam::relation_forward(x, p, 2);
  const auto dx = sam::relation_backward(fwd.cache, Matrix<double>(2, 3, 1.0), p);
  const auto lam = fwd.cache.selection.lambda();
  for (std::size_t i = 0; i < 6; ++i) {
    if (lam[i]) continue;
    for (double v : dx.row(i)) EXPECT_EQ(v, 0.0);
  }
}

TEST(RelationGraph, CacheCannotBeReusedOrGoStale) {
  std::mt19937_64 rng(3);
  auto p = random_params(3, 3, rng);
  const auto x = random_matrix(4, 3, rng);
  auto fwd = sam::relation_forward(x, p, 2);
  const Matrix<double> g(2, 3, 1.0);
  sam::relation_backward(fwd.cache, g, p);
  EXPECT_THROW(sam::relation_backward(fwd.cache, g, p), std::logic_error);

  auto fwd2 = sam::relation_forward(x, p, 2);
  ++p.version;
  EXPECT_THROW(sam::relation_backward(fwd2.cache, g, p), std::logic_error);
}

TEST(RelationGraph, RejectsEmptyAndMismatchedInput) {
  std::mt19937_64 rng(3);
  const auto p = random_params(3, 2, rng);
  EXPECT_THROW(sam::relation_forward(Matrix<double>(0, 3), p, 1), sam::ShapeError);
  EXPECT_THROW(sam::relation_forward(Matrix<double>(2, 4), p, 1), sam::ShapeError);
}

TEST(RelationGraph, TiedInitCopiesQueryIntoKey) {
  std::mt19937_64 rng(3);
  const auto p = SamParams<double>::random(4, 3, rng, true);
  EXPECT_EQ(p.value.phi, p.value.psi);
  EXPECT_NE(p.value.phi, p.value.omega);
  const double bound = 1.0 / std::sqrt(4.0);
  for (double v : p.value.omega.flat()) EXPECT_LE(std::abs(v), bound);
}

TEST(RelationGraph, FloatPathTracksDouble) {
  std::mt19937_64 rng(5);
  const auto pd = random_params(6, 4, rng);
  const auto x = random_matrix(9, 6, rng);
  SamParams<float> pf(6, 4);
  pf.value.phi = pd.value.phi.cast<float>();
  pf.value.psi = pd.value.psi.cast<float>();
  pf.value.omega = pd.value.omega.cast<float>();
  pf.value.w_z = pd.value.w_z.cast<float>();
  const auto zd = sam::relation_forward(x, pd, 5);
  const auto zf = sam::relation_forward(x.cast<float>(), pf, 5);
  if (zd.cache.selection_margin > 1e-3) {
    for (std::size_t i = 0; i < zd.z.size(); ++i) EXPECT_NEAR(zf.z.flat()[i], zd.z.flat()[i], 1e-4);
  }
}
