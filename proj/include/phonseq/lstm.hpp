// phonseq/lstm.hpp

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

// LSTM cell and sequence runner with exact backward passes.  Gate order in
// the stacked weight matrices is i, f, g, o; the forget bias initializes to
// +1.

#ifndef PHONSEQ_LSTM_HPP_
#define PHONSEQ_LSTM_HPP_

#include <numeric>
#include <vector>

#include "phonseq/mat.hpp"

namespace phonseq {

struct lstm_params {
  matd W;  // 4H x I
  matd U;  // 4H x H
  vecd b;  // 4H

  size_t hidden() const { return U.cols; }
  size_t input() const { return W.cols; }

  bool operator==(const lstm_params &o) const { return W == o.W && U == o.U && b == o.b; }
};

inline lstm_params make_lstm(size_t input, size_t hidden, rng &gen, double scale = 0.1) {
  lstm_params p;
  p.W = matd(4 * hidden, input);
  p.U = matd(4 * hidden, hidden);
  p.b.assign(4 * hidden, 0.0);
  for (auto &x : p.W.data) x = gen.uniform_real(-scale, scale);
  for (auto &x : p.U.data) x = gen.uniform_real(-scale, scale);
  for (size_t k = hidden; k < 2 * hidden; ++k) p.b[k] = 1.0;  // forget bias
  return p;
}

inline lstm_params zeros_like(const lstm_params &p) {
  lstm_params z;
  z.W = matd(p.W.rows, p.W.cols, 0.0);
  z.U = matd(p.U.rows, p.U.cols, 0.0);
  z.b.assign(p.b.size(), 0.0);
  return z;
}

struct lstm_step_cache {
  vecd x, h_prev, c_prev;
  vecd i, f, g, o;  // activated gates
  vecd c, tanh_c;
};

// h_out = o * tanh(c'), c' = f * c + i * g.
inline void lstm_step(const lstm_params &p, const vecd &x, const vecd &h_prev,
                      const vecd &c_prev, vecd &h_out, vecd &c_out,
                      lstm_step_cache *cache = nullptr) {
  const size_t H = p.hidden();
  require(x.size() == p.input() && h_prev.size() == H && c_prev.size() == H,
          errc::dimension_mismatch, "lstm_step: shape mismatch");

  vecd a(p.b);
  gemv_acc(p.W, x, a);
  gemv_acc(p.U, h_prev, a);

  vecd i(H), f(H), g(H), o(H);
  for (size_t k = 0; k < H; ++k) {
    i[k] = sigmoid(a[k]);
    f[k] = sigmoid(a[H + k]);
    g[k] = std::tanh(a[2 * H + k]);
    o[k] = sigmoid(a[3 * H + k]);
  }
  c_out.resize(H);
  h_out.resize(H);
  vecd tanh_c(H);
  for (size_t k = 0; k < H; ++k) {
    c_out[k] = f[k] * c_prev[k] + i[k] * g[k];
    tanh_c[k] = std::tanh(c_out[k]);
    h_out[k] = o[k] * tanh_c[k];
  }
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->g = std::move(g);
    cache->o = std::move(o);
    cache->c = c_out;
    cache->tanh_c = std::move(tanh_c);
  }
}

// Accumulates parameter gradients into `grad` and writes input-side
// gradients.  dh and dc_in are the gradients flowing into this step's h and
// c outputs.
inline void lstm_step_backward(const lstm_params &p, const lstm_step_cache &cc,
                               const vecd &dh, const vecd &dc_in, lstm_params &grad,
                               vecd &dx, vecd &dh_prev, vecd &dc_prev) {
  const size_t H = p.hidden();
  vecd da(4 * H);
  vecd dc(H);
  for (size_t k = 0; k < H; ++k) {
    double d_o = dh[k] * cc.tanh_c[k];
    dc[k] = dc_in[k] + dh[k] * cc.o[k] * (1.0 - cc.tanh_c[k] * cc.tanh_c[k]);
    double d_i = dc[k] * cc.g[k];
    double d_f = dc[k] * cc.c_prev[k];
    double d_g = dc[k] * cc.i[k];
    da[k] = d_i * cc.i[k] * (1.0 - cc.i[k]);
    da[H + k] = d_f * cc.f[k] * (1.0 - cc.f[k]);
    da[2 * H + k] = d_g * (1.0 - cc.g[k] * cc.g[k]);
    da[3 * H + k] = d_o * cc.o[k] * (1.0 - cc.o[k]);
  }
  outer_acc(da, cc.x, grad.W);
  outer_acc(da, cc.h_prev, grad.U);
  axpy(1.0, da, grad.b);

  dx.assign(p.input(), 0.0);
  gemv_t_acc(p.W, da, dx);
  dh_prev.assign(H, 0.0);
  gemv_t_acc(p.U, da, dh_prev);
  dc_prev.resize(H);
  for (size_t k = 0; k < H; ++k) dc_prev[k] = dc[k] * cc.f[k];
}

struct lstm_seq_cache {
  std::vector<size_t> order;          // frame visiting order
  std::vector<lstm_step_cache> step;  // indexed by position in `order`
};

// Runs the cell over `inputs` rows in the given order, writing each hidden
// state to the same frame row of `out`.  Initial state is zeros.
inline void run_lstm_seq(const lstm_params &p, const matd &inputs,
                         const std::vector<size_t> &order, matd &out,
                         lstm_seq_cache *cache = nullptr) {
  const size_t H = p.hidden();
  require(inputs.cols == p.input(), errc::dimension_mismatch, "lstm sequence: input width");
  out = matd(inputs.rows, H);
  if (cache) {
    cache->order = order;
    cache->step.resize(order.size());
  }
  vecd h(H, 0.0), c(H, 0.0), x(p.input());
  for (size_t k = 0; k < order.size(); ++k) {
    size_t t = order[k];
    x.assign(inputs.row(t), inputs.row(t) + inputs.cols);
    vecd h_new, c_new;
    lstm_step(p, x, h, c, h_new, c_new, cache ? &cache->step[k] : nullptr);
    h = std::move(h_new);
    c = std::move(c_new);
    for (size_t j = 0; j < H; ++j) out(t, j) = h[j];
  }
}

// d_out rows hold the gradient wrt each frame's hidden state; input-side
// gradients accumulate into d_inputs.
inline void run_lstm_seq_backward(const lstm_params &p, const lstm_seq_cache &cache,
                                  const matd &d_out, lstm_params &grad, matd &d_inputs) {
  const size_t H = p.hidden();
  vecd dh_carry(H, 0.0), dc_carry(H, 0.0), dh(H), dx;
  for (size_t k = cache.order.size(); k-- > 0;) {
    size_t t = cache.order[k];
    for (size_t j = 0; j < H; ++j) dh[j] = d_out(t, j) + dh_carry[j];
    lstm_step_backward(p, cache.step[k], dh, dc_carry, grad, dx, dh_carry, dc_carry);
    axpy(1.0, dx.data(), d_inputs.row(t), d_inputs.cols);
  }
}

inline std::vector<size_t> forward_order(size_t T) {
  std::vector<size_t> o(T);
  std::iota(o.begin(), o.end(), size_t{0});
  return o;
}

inline std::vector<size_t> backward_order(size_t T) {
  std::vector<size_t> o(T);
  for (size_t t = 0; t < T; ++t) o[t] = T - 1 - t;
  return o;
}

}  // namespace phonseq

#endif  // PHONSEQ_LSTM_HPP_
