// tests/test_embed_metrics.cpp

// Copyright 2026  phonseq authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "phonseq/embed_metrics.hpp"
#include "test_util.hpp"

using namespace phonseq;

namespace {

// Brute-force reference: every statistic recomputed from first principles
// with its own covariance and a Gauss-Jordan inverse.
struct naive_report {
  double cos, m_dist, cov, p_dist;
};

std::vector<std::vector<double>> gauss_jordan_inverse(std::vector<std::vector<double>> a) {
  const size_t n = a.size();
  std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[piv], a[col]);
    std::swap(inv[piv], inv[col]);
    double p = a[col][col];
    REQUIRE(std::abs(p) > 0.0);
    for (size_t c = 0; c < n; ++c) {
      a[col][c] /= p;
      inv[col][c] /= p;
    }
    for (size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = a[r][col];
      for (size_t c = 0; c < n; ++c) {
        a[r][c] -= f * a[col][c];
        inv[r][c] -= f * inv[col][c];
      }
    }
  }
  return inv;
}

naive_report naive_dispersion(const matd &rows) {
  const size_t V = rows.rows, D = rows.cols;
  naive_report r{0, 0, 0, 0};
  size_t pairs = 0;

  for (size_t i = 0; i < V; ++i)
    for (size_t j = i + 1; j < V; ++j, ++pairs) {
      double num = 0, na = 0, nb = 0;
      for (size_t d = 0; d < D; ++d) {
        num += rows(i, d) * rows(j, d);
        na += rows(i, d) * rows(i, d);
        nb += rows(j, d) * rows(j, d);
      }
      r.cos += num / (std::sqrt(na) * std::sqrt(nb));

      double mi = 0, mj = 0;
      for (size_t d = 0; d < D; ++d) {
        mi += rows(i, d);
        mj += rows(j, d);
      }
      mi /= static_cast<double>(D);
      mj /= static_cast<double>(D);
      double sab = 0, saa = 0, sbb = 0;
      for (size_t d = 0; d < D; ++d) {
        sab += (rows(i, d) - mi) * (rows(j, d) - mj);
        saa += (rows(i, d) - mi) * (rows(i, d) - mi);
        sbb += (rows(j, d) - mj) * (rows(j, d) - mj);
      }
      r.p_dist += std::abs(sab / std::sqrt(saa * sbb));
    }
  r.cos /= static_cast<double>(pairs);
  r.p_dist /= static_cast<double>(pairs);

  std::vector<double> mean(D, 0.0);
  for (size_t i = 0; i < V; ++i)
    for (size_t d = 0; d < D; ++d) mean[d] += rows(i, d) / static_cast<double>(V);
  std::vector<std::vector<double>> C(D, std::vector<double>(D, 0.0));
  for (size_t i = 0; i < V; ++i)
    for (size_t a = 0; a < D; ++a)
      for (size_t b = 0; b < D; ++b)
        C[a][b] += (rows(i, a) - mean[a]) * (rows(i, b) - mean[b]) /
                   static_cast<double>(V - 1);
  double abs_sum = 0, trace = 0;
  for (size_t a = 0; a < D; ++a) {
    trace += C[a][a];
    for (size_t b = 0; b < D; ++b) abs_sum += std::abs(C[a][b]);
  }
  r.cov = abs_sum / static_cast<double>(D * D);

  auto Cr = C;
  for (size_t a = 0; a < D; ++a) Cr[a][a] += 1e-6 * trace / static_cast<double>(D);
  auto Cinv = gauss_jordan_inverse(Cr);
  for (size_t i = 0; i < V; ++i)
    for (size_t j = i + 1; j < V; ++j) {
      double q = 0;
      for (size_t a = 0; a < D; ++a)
        for (size_t b = 0; b < D; ++b)
          q += (rows(i, a) - rows(j, a)) * Cinv[a][b] * (rows(i, b) - rows(j, b));
      r.m_dist += std::sqrt(std::max(q, 0.0));
    }
  r.m_dist /= static_cast<double>(pairs);
  return r;
}

matd random_rows(size_t V, size_t D, uint64_t seed) {
  rng gen(seed);
  matd m(V, D);
  for (auto &x : m.data) x = gen.uniform_real(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("mahalanobis") {
  SECTION("identical points have distance zero") {
    matd I(3, 3, 0.0);
    for (size_t i = 0; i < 3; ++i) I(i, i) = 1.0;
    vecd u = {1.0, -2.0, 0.5};
    REQUIRE(mahalanobis(u, u, I) == 0.0);
  }

  SECTION("identity covariance reduces to Euclidean distance") {
    matd I(3, 3, 0.0);
    for (size_t i = 0; i < 3; ++i) I(i, i) = 1.0;
    vecd u = {1.0, 2.0, 3.0}, v = {0.0, 0.0, 4.0};
    REQUIRE(mahalanobis(u, v, I) == Catch::Approx(std::sqrt(1.0 + 4.0 + 1.0)).epsilon(1e-14));
  }

  SECTION("random 3-dim case matches the naive triple loop") {
    rng gen(5);
    matd A(3, 3);
    for (auto &x : A.data) x = gen.uniform_real(-1.0, 1.0);
    // A A^T + I is symmetric positive definite.
    matd S(3, 3, 0.0);
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = 0; j < 3; ++j) {
        for (size_t k = 0; k < 3; ++k) S(i, j) += A(i, k) * A(j, k);
        if (i == j) S(i, j) += 1.0;
      }
    vecd u = {0.3, -0.7, 1.1}, v = {-0.2, 0.4, 0.9};
    double q = 0.0;
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = 0; j < 3; ++j) q += (u[i] - v[i]) * S(i, j) * (u[j] - v[j]);
    REQUIRE(mahalanobis(u, v, S) == Catch::Approx(std::sqrt(q)).epsilon(1e-12));
  }

  SECTION("dimension mismatch") {
    matd I(2, 2, 0.0);
    I(0, 0) = I(1, 1) = 1.0;
    REQUIRE_ERRC(mahalanobis({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, I), errc::dimension_mismatch);
  }
}

TEST_CASE("compute_dispersion") {
  SECTION("degenerate duplicate rows") {
    matd rows(2, 3);
    rows(0, 0) = rows(1, 0) = 1.0;
    rows(0, 1) = rows(1, 1) = 2.0;
    rows(0, 2) = rows(1, 2) = -1.0;
    auto r = compute_dispersion(rows);
    REQUIRE(r.cos == Catch::Approx(1.0).epsilon(1e-14));
    REQUIRE(r.m_dist == 0.0);
    REQUIRE(r.p_dist == Catch::Approx(1.0).epsilon(1e-14));
    REQUIRE(r.cov == 0.0);
  }

  SECTION("orthogonal unit rows have zero mean cosine") {
    matd rows(3, 3, 0.0);
    for (size_t i = 0; i < 3; ++i) rows(i, i) = 1.0;
    REQUIRE(compute_dispersion(rows).cos == Catch::Approx(0.0).margin(1e-14));
  }

  SECTION("matches the naive oracle on random matrices") {
    rng pick(31);
    for (int trial = 0; trial < 20; ++trial) {
      // Full-rank covariances (V > D+1) keep both inverses well conditioned.
      size_t D = 2 + pick.uniform_index(4);
      size_t V = std::min<size_t>(D + 2 + pick.uniform_index(5), 10);
      auto rows = random_rows(V, D, 2000 + static_cast<uint64_t>(trial));
      auto got = compute_dispersion(rows);
      auto want = naive_dispersion(rows);
      REQUIRE(got.cos == Catch::Approx(want.cos).margin(1e-10));
      REQUIRE(got.m_dist == Catch::Approx(want.m_dist).margin(1e-10));
      REQUIRE(got.cov == Catch::Approx(want.cov).margin(1e-10));
      REQUIRE(got.p_dist == Catch::Approx(want.p_dist).margin(1e-10));
    }
  }

  SECTION("4 random rows at D=3 match the naive oracle") {
    auto rows = random_rows(4, 3, 555);
    auto got = compute_dispersion(rows);
    auto want = naive_dispersion(rows);
    REQUIRE(got.cos == Catch::Approx(want.cos).margin(1e-10));
    REQUIRE(got.m_dist == Catch::Approx(want.m_dist).margin(1e-10));
    REQUIRE(got.cov == Catch::Approx(want.cov).margin(1e-10));
    REQUIRE(got.p_dist == Catch::Approx(want.p_dist).margin(1e-10));
  }

  SECTION("report bounds hold") {
    auto rows = random_rows(9, 4, 77);
    auto r = compute_dispersion(rows);
    REQUIRE(r.cos >= -1.0);
    REQUIRE(r.cos <= 1.0);
    REQUIRE(r.m_dist >= 0.0);
    REQUIRE(r.cov >= 0.0);
    REQUIRE(r.p_dist >= 0.0);
    REQUIRE(r.p_dist <= 1.0);
  }

  SECTION("too few rows") {
    REQUIRE_ERRC(compute_dispersion(matd(1, 4, 1.0)), errc::too_few_rows);
  }

  SECTION("row permutation leaves the report unchanged") {
    auto rows = random_rows(6, 3, 9);
    matd perm(6, 3);
    size_t order[] = {4, 0, 5, 2, 1, 3};
    for (size_t i = 0; i < 6; ++i)
      for (size_t d = 0; d < 3; ++d) perm(i, d) = rows(order[i], d);
    auto a = compute_dispersion(rows), b = compute_dispersion(perm);
    REQUIRE(a.cos == Catch::Approx(b.cos).margin(1e-12));
    REQUIRE(a.m_dist == Catch::Approx(b.m_dist).margin(1e-12));
    REQUIRE(a.cov == Catch::Approx(b.cov).margin(1e-12));
    REQUIRE(a.p_dist == Catch::Approx(b.p_dist).margin(1e-12));
  }

  SECTION("positive scaling leaves cos and p_dist unchanged") {
    auto rows = random_rows(6, 4, 13);
    matd scaled = rows;
    for (auto &x : scaled.data) x *= 7.5;
    auto a = compute_dispersion(rows), b = compute_dispersion(scaled);
    REQUIRE(a.cos == Catch::Approx(b.cos).margin(1e-12));
    REQUIRE(a.p_dist == Catch::Approx(b.p_dist).margin(1e-12));
  }

  SECTION("appending a duplicate row shifts cos by the exact closed form") {
    // With V rows and duplicate of row k appended, the new mean cosine is
    // (old_sum + 1 + sum_i!=k cos(i,k)) / C(V+1,2).  Note the shift can be
    // negative when the matrix is already highly self-similar, so only the
    // closed form is asserted, plus the increase on a dispersed matrix.
    rng pick(21);
    for (int trial = 0; trial < 10; ++trial) {
      const size_t V = 5, D = 3;
      auto rows = random_rows(V, D, 3000 + static_cast<uint64_t>(trial));
      size_t dup = pick.uniform_index(V);
      matd grown(V + 1, D);
      for (size_t i = 0; i < V; ++i)
        for (size_t d = 0; d < D; ++d) grown(i, d) = rows(i, d);
      for (size_t d = 0; d < D; ++d) grown(V, d) = rows(dup, d);

      double old_sum = 0.0, s_k = 0.0;
      for (size_t i = 0; i < V; ++i)
        for (size_t j = i + 1; j < V; ++j) {
          double c = dot(rows.row(i), rows.row(j), D) /
                     (std::sqrt(dot(rows.row(i), rows.row(i), D)) *
                      std::sqrt(dot(rows.row(j), rows.row(j), D)));
          old_sum += c;
          if (i == dup || j == dup) s_k += c;
        }
      double want = (old_sum + 1.0 + s_k) / static_cast<double>((V + 1) * V / 2);
      REQUIRE(compute_dispersion(grown).cos == Catch::Approx(want).margin(1e-12));
    }

    matd ortho(3, 3, 0.0);
    for (size_t i = 0; i < 3; ++i) ortho(i, i) = 1.0;
    matd grown(4, 3, 0.0);
    for (size_t i = 0; i < 3; ++i) grown(i, i) = 1.0;
    grown(3, 0) = 1.0;
    REQUIRE(compute_dispersion(grown).cos > compute_dispersion(ortho).cos);
  }

  SECTION("text rendering") {
    dispersion_stats r{0.097, 3.92, 0.055, 0.149};
    REQUIRE(format_dispersion(r) == "cos=0.097 m_dist=3.92 cov=0.055 p_dist=0.149");
  }
}
