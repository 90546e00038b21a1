// phonseq/mat.hpp

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

#ifndef PHONSEQ_MAT_HPP_
#define PHONSEQ_MAT_HPP_

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "phonseq/common.hpp"

namespace phonseq {

// Dense row-major matrix.  Double precision is the default everywhere the
// model computes; float is used for feature storage and the on-disk archive.
template <class T>
struct basic_mat {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<T> data;

  basic_mat() = default;
  basic_mat(size_t r, size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

  T &operator()(size_t r, size_t c) {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }
  T operator()(size_t r, size_t c) const {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }

  T *row(size_t r) {
    assert(r < rows);
    return data.data() + r * cols;
  }
  const T *row(size_t r) const {
    assert(r < rows);
    return data.data() + r * cols;
  }

  void set_zero() { data.assign(data.size(), T(0)); }

  bool same_shape(const basic_mat &o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const basic_mat &o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

using matd = basic_mat<double>;
using matf = basic_mat<float>;
using vecd = std::vector<double>;

inline bool all_finite(const double *p, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

inline bool all_finite(const vecd &v) { return all_finite(v.data(), v.size()); }
inline bool all_finite(const matd &m) { return all_finite(m.data.data(), m.data.size()); }

inline double dot(const double *a, const double *b, size_t n) {
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double dot(const vecd &a, const vecd &b) {
  assert(a.size() == b.size());
  return dot(a.data(), b.data(), a.size());
}

// y += alpha * x
inline void axpy(double alpha, const double *x, double *y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline void axpy(double alpha, const vecd &x, vecd &y) {
  assert(x.size() == y.size());
  axpy(alpha, x.data(), y.data(), x.size());
}

// y = W x   (W: m x n, x: n, y: m)
inline void gemv(const matd &W, const vecd &x, vecd &y) {
  assert(W.cols == x.size());
  y.assign(W.rows, 0.0);
  for (size_t r = 0; r < W.rows; ++r) y[r] = dot(W.row(r), x.data(), W.cols);
}

// y += W x
inline void gemv_acc(const matd &W, const vecd &x, vecd &y) {
  assert(W.cols == x.size() && W.rows == y.size());
  for (size_t r = 0; r < W.rows; ++r) y[r] += dot(W.row(r), x.data(), W.cols);
}

// y += W^T x   (W: m x n, x: m, y: n)
inline void gemv_t_acc(const matd &W, const vecd &x, vecd &y) {
  assert(W.rows == x.size() && W.cols == y.size());
  for (size_t r = 0; r < W.rows; ++r) axpy(x[r], W.row(r), y.data(), W.cols);
}

// G += a b^T   (a: m, b: n, G: m x n)
inline void outer_acc(const vecd &a, const vecd &b, matd &G) {
  assert(G.rows == a.size() && G.cols == b.size());
  for (size_t r = 0; r < G.rows; ++r) axpy(a[r], b.data(), G.row(r), G.cols);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logsumexp(const vecd &v) {
  assert(!v.empty());
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// In-place softmax; returns nothing, v becomes a probability vector.
inline void softmax_inplace(vecd &v) {
  double lse = logsumexp(v);
  for (double &x : v) x = std::exp(x - lse);
}

inline double norm2(const vecd &v) { return std::sqrt(dot(v, v)); }

#ifdef PHONSEQ_PARANOID_FINITE
#define PHONSEQ_CHECK_FINITE(x) \
  ::phonseq::require(::phonseq::all_finite(x), ::phonseq::errc::numeric_error, "non-finite value")
#else
#define PHONSEQ_CHECK_FINITE(x) ((void)0)
#endif

}  // namespace phonseq

#endif  // PHONSEQ_MAT_HPP_
