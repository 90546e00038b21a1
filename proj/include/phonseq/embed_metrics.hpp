// phonseq/embed_metrics.hpp

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

// Embedding dispersion statistics: mean pairwise cosine, mean pairwise
// Mahalanobis distance, mean absolute covariance entry, and mean absolute
// pairwise Pearson correlation.  All pairwise means run over unordered row
// pairs.

#ifndef PHONSEQ_EMBED_METRICS_HPP_
#define PHONSEQ_EMBED_METRICS_HPP_

#include <cmath>
#include <string>

#include "phonseq/mat.hpp"

namespace phonseq {

struct dispersion_stats {
  double cos = 0.0;
  double m_dist = 0.0;
  double cov = 0.0;
  double p_dist = 0.0;
};

inline std::string format_dispersion(const dispersion_stats &r) {
  return "cos=" + format_real(r.cos, 6) + " m_dist=" + format_real(r.m_dist, 6) +
         " cov=" + format_real(r.cov, 6) + " p_dist=" + format_real(r.p_dist, 6);
}

namespace detail {

// Cholesky factor L (lower) of a symmetric positive definite matrix.
inline bool cholesky(const matd &A, matd &L) {
  const size_t n = A.rows;
  L = matd(n, n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j <= i; ++j) {
      double s = A(i, j);
      for (size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) return false;
        L(i, i) = std::sqrt(s);
      } else {
        L(i, j) = s / L(j, j);
      }
    }
  }
  return true;
}

// A^{-1} from the Cholesky factor, by solving A x = e_k per column.
inline matd chol_inverse(const matd &L) {
  const size_t n = L.rows;
  matd inv(n, n, 0.0);
  vecd y(n), x(n);
  for (size_t col = 0; col < n; ++col) {
    for (size_t i = 0; i < n; ++i) {
      double s = (i == col) ? 1.0 : 0.0;
      for (size_t k = 0; k < i; ++k) s -= L(i, k) * y[k];
      y[i] = s / L(i, i);
    }
    for (size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * x[k];
      x[ii] = s / L(ii, ii);
    }
    for (size_t i = 0; i < n; ++i) inv(i, col) = x[i];
  }
  return inv;
}

inline double cosine(const double *a, const double *b, size_t n) {
  double na = std::sqrt(dot(a, a, n)), nb = std::sqrt(dot(b, b, n));
  return dot(a, b, n) / (na * nb);
}

inline double pearson_rows(const double *a, const double *b, size_t n) {
  double ma = 0.0, mb = 0.0;
  for (size_t k = 0; k < n; ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t k = 0; k < n; ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

// sqrt((u-v)^T cov_inv (u-v)).  cov_inv must be symmetric positive definite.
inline double mahalanobis(const vecd &u, const vecd &v, const matd &cov_inv) {
  require(u.size() == v.size() && cov_inv.rows == u.size() && cov_inv.cols == u.size(),
          errc::dimension_mismatch, "mahalanobis: shape mismatch");
  const size_t n = u.size();
  double q = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) q += (u[i] - v[i]) * cov_inv(i, j) * (u[j] - v[j]);
  return std::sqrt(std::max(q, 0.0));
}

// Mean pairwise cosine similarity over rows [skip_rows, V).  Rows must be
// nonzero.
inline double mean_pairwise_cosine(const matd &rows, size_t skip_rows = 0) {
  require(rows.rows >= skip_rows + 2, errc::too_few_rows,
          "need at least two rows for pairwise statistics");
  double sum = 0.0;
  size_t pairs = 0;
  for (size_t i = skip_rows; i < rows.rows; ++i)
    for (size_t j = i + 1; j < rows.rows; ++j, ++pairs)
      sum += detail::cosine(rows.row(i), rows.row(j), rows.cols);
  return sum / static_cast<double>(pairs);
}

// D x D sample covariance of the rows (divisor V-1).
inline matd row_sample_covariance(const matd &rows) {
  require(rows.rows >= 2, errc::too_few_rows, "covariance needs at least two rows");
  const size_t V = rows.rows, D = rows.cols;
  vecd mean(D, 0.0);
  for (size_t i = 0; i < V; ++i) axpy(1.0, rows.row(i), mean.data(), D);
  for (auto &m : mean) m /= static_cast<double>(V);
  matd C(D, D, 0.0);
  for (size_t i = 0; i < V; ++i) {
    const double *r = rows.row(i);
    for (size_t a = 0; a < D; ++a)
      for (size_t b = 0; b < D; ++b) C(a, b) += (r[a] - mean[a]) * (r[b] - mean[b]);
  }
  for (auto &x : C.data) x /= static_cast<double>(V - 1);
  return C;
}

// The four Table-2-style statistics over the given embedding rows.  The
// Mahalanobis covariance gets a ridge eps = 1e-6 * trace/D on the diagonal
// before inversion; cov reports the mean absolute entry of the raw
// (un-ridged) covariance.  When trace is exactly zero all rows coincide and
// every pairwise distance is zero, so m_dist is reported as 0 without an
// inversion.
inline dispersion_stats compute_dispersion(const matd &rows) {
  require(rows.rows >= 2, errc::too_few_rows,
          "dispersion needs at least two rows");
  const size_t V = rows.rows, D = rows.cols;

  dispersion_stats r;
  r.cos = mean_pairwise_cosine(rows);

  matd C = row_sample_covariance(rows);
  double abs_sum = 0.0, trace = 0.0;
  for (size_t a = 0; a < D; ++a) {
    trace += C(a, a);
    for (size_t b = 0; b < D; ++b) abs_sum += std::abs(C(a, b));
  }
  r.cov = abs_sum / static_cast<double>(D * D);

  if (trace > 0.0) {
    matd Cr = C;
    double eps = 1e-6 * trace / static_cast<double>(D);
    for (size_t a = 0; a < D; ++a) Cr(a, a) += eps;
    matd L;
    require(detail::cholesky(Cr, L), errc::singular_covariance,
            "covariance not invertible after ridge");
    matd Cinv = detail::chol_inverse(L);
    double sum = 0.0;
    size_t pairs = 0;
    vecd u(D), v(D);
    for (size_t i = 0; i < V; ++i)
      for (size_t j = i + 1; j < V; ++j, ++pairs) {
        u.assign(rows.row(i), rows.row(i) + D);
        v.assign(rows.row(j), rows.row(j) + D);
        sum += mahalanobis(u, v, Cinv);
      }
    r.m_dist = sum / static_cast<double>(pairs);
  }

  double psum = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < V; ++i)
    for (size_t j = i + 1; j < V; ++j, ++pairs)
      psum += std::abs(detail::pearson_rows(rows.row(i), rows.row(j), D));
  r.p_dist = psum / static_cast<double>(pairs);
  return r;
}

}  // namespace phonseq

#endif  // PHONSEQ_EMBED_METRICS_HPP_
