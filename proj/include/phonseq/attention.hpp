// phonseq/attention.hpp

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

// Additive attention: score(s, h_t) = v_a . tanh(W_s s + W_h h_t), weights
// by softmax over t, context as the weighted sum of encoder rows.

#ifndef PHONSEQ_ATTENTION_HPP_
#define PHONSEQ_ATTENTION_HPP_

#include <vector>

#include "phonseq/mat.hpp"

namespace phonseq {

struct attn_params {
  matd W_s;  // A x S
  matd W_h;  // A x H_enc
  vecd v_a;  // A

  size_t attn_dim() const { return v_a.size(); }

  bool operator==(const attn_params &o) const {
    return W_s == o.W_s && W_h == o.W_h && v_a == o.v_a;
  }
};

inline attn_params make_attn(size_t state_dim, size_t enc_dim, size_t attn_dim, rng &gen,
                             double scale = 0.1) {
  attn_params p;
  p.W_s = matd(attn_dim, state_dim);
  p.W_h = matd(attn_dim, enc_dim);
  p.v_a.assign(attn_dim, 0.0);
  for (auto &x : p.W_s.data) x = gen.uniform_real(-scale, scale);
  for (auto &x : p.W_h.data) x = gen.uniform_real(-scale, scale);
  for (auto &x : p.v_a) x = gen.uniform_real(-scale, scale);
  return p;
}

inline attn_params zeros_like(const attn_params &p) {
  attn_params z;
  z.W_s = matd(p.W_s.rows, p.W_s.cols, 0.0);
  z.W_h = matd(p.W_h.rows, p.W_h.cols, 0.0);
  z.v_a.assign(p.v_a.size(), 0.0);
  return z;
}

struct attend_cache {
  vecd s;       // query state
  matd z;       // T x A, tanh(W_s s + W_h h_t)
  vecd alpha;   // T
  vecd context; // H_enc
};

// alpha = softmax_t(v_a . tanh(W_s s + W_h h_t)); context = sum_t alpha_t H_t.
inline void attend(const attn_params &p, const vecd &s, const matd &H, vecd &alpha,
                   vecd &context, attend_cache *cache = nullptr) {
  const size_t T = H.rows, A = p.attn_dim();
  require(T >= 1, errc::dimension_mismatch, "attend: empty encoder output");
  require(s.size() == p.W_s.cols && H.cols == p.W_h.cols, errc::dimension_mismatch,
          "attend: shape mismatch");

  vecd proj_s;
  gemv(p.W_s, s, proj_s);
  matd z(T, A);
  vecd scores(T);
  vecd h_t(H.cols), u(A);
  for (size_t t = 0; t < T; ++t) {
    h_t.assign(H.row(t), H.row(t) + H.cols);
    u = proj_s;
    gemv_acc(p.W_h, h_t, u);
    double e = 0.0;
    for (size_t a = 0; a < A; ++a) {
      z(t, a) = std::tanh(u[a]);
      e += p.v_a[a] * z(t, a);
    }
    scores[t] = e;
  }
  softmax_inplace(scores);
  alpha = scores;
  context.assign(H.cols, 0.0);
  for (size_t t = 0; t < T; ++t) axpy(alpha[t], H.row(t), context.data(), H.cols);

  if (cache) {
    cache->s = s;
    cache->z = std::move(z);
    cache->alpha = alpha;
    cache->context = context;
  }
}

// Backward through the context (d_context) and optionally through the
// weights themselves (d_alpha_ext may be empty).  Accumulates into grad,
// d_H, and writes d_s.
inline void attend_backward(const attn_params &p, const matd &H, const attend_cache &cc,
                            const vecd &d_context, const vecd &d_alpha_ext,
                            attn_params &grad, matd &d_H, vecd &d_s) {
  const size_t T = H.rows, A = p.attn_dim();

  vecd d_alpha(T, 0.0);
  for (size_t t = 0; t < T; ++t) {
    d_alpha[t] = dot(d_context.data(), H.row(t), H.cols);
    if (!d_alpha_ext.empty()) d_alpha[t] += d_alpha_ext[t];
    axpy(cc.alpha[t], d_context.data(), d_H.row(t), H.cols);
  }

  // Softmax jacobian: de_t = alpha_t (d_alpha_t - sum_u alpha_u d_alpha_u).
  double mix = 0.0;
  for (size_t t = 0; t < T; ++t) mix += cc.alpha[t] * d_alpha[t];
  vecd de(T);
  for (size_t t = 0; t < T; ++t) de[t] = cc.alpha[t] * (d_alpha[t] - mix);

  d_s.assign(p.W_s.cols, 0.0);
  vecd du(A), du_sum(A, 0.0), h_t(H.cols), dh_row(H.cols);
  for (size_t t = 0; t < T; ++t) {
    for (size_t a = 0; a < A; ++a) {
      grad.v_a[a] += de[t] * cc.z(t, a);
      du[a] = de[t] * p.v_a[a] * (1.0 - cc.z(t, a) * cc.z(t, a));
      du_sum[a] += du[a];
    }
    h_t.assign(H.row(t), H.row(t) + H.cols);
    outer_acc(du, h_t, grad.W_h);
    dh_row.assign(H.cols, 0.0);
    gemv_t_acc(p.W_h, du, dh_row);
    axpy(1.0, dh_row.data(), d_H.row(t), H.cols);
  }
  // W_s s enters every frame's score, so its gradient takes the summed du.
  outer_acc(du_sum, cc.s, grad.W_s);
  gemv_t_acc(p.W_s, du_sum, d_s);
}

}  // namespace phonseq

#endif  // PHONSEQ_ATTENTION_HPP_
