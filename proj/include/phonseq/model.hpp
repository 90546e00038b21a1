// phonseq/model.hpp

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

// The attention encoder-decoder: stacked BLSTM encoder, embedding lookup,
// LSTM decoder over [embedding ; previous context], additive attention, and
// a linear generator over [context ; state].  Forward loss caches every
// activation so backward() can produce exact gradients; grad_check verifies
// them against central finite differences.

#ifndef PHONSEQ_MODEL_HPP_
#define PHONSEQ_MODEL_HPP_

#include <string>
#include <unordered_map>
#include <vector>

#include "phonseq/attention.hpp"
#include "phonseq/lstm.hpp"
#include "phonseq/phoneme_map.hpp"

namespace phonseq {

inline const std::string kSosToken = "<sos>";
inline const std::string kEosToken = "<eos>";

struct model_vocab {
  std::vector<std::string> tokens;  // <sos>, <eos>, then phonemes in set order
  std::unordered_map<std::string, size_t> index;
  size_t sos = 0, eos = 1;

  size_t size() const { return tokens.size(); }
  size_t id(const std::string &s) const {
    auto it = index.find(s);
    require(it != index.end(), errc::unknown_symbol, "token not in model vocabulary: " + s);
    return it->second;
  }

  bool operator==(const model_vocab &o) const { return tokens == o.tokens; }
};

inline model_vocab make_model_vocab(const phoneme_set &set) {
  model_vocab v;
  v.tokens = {kSosToken, kEosToken};
  for (const auto &s : set.symbols) v.tokens.push_back(s);
  for (size_t i = 0; i < v.tokens.size(); ++i) {
    require(v.index.emplace(v.tokens[i], i).second, errc::duplicate_symbol,
            "duplicate model token " + v.tokens[i]);
  }
  return v;
}

struct model_dims {
  size_t feat_dim = 120;
  size_t enc_hidden = 32;  // per direction
  size_t enc_layers = 2;
  size_t dec_hidden = 32;
  size_t dec_layers = 2;
  size_t embed_dim = 32;
  size_t attn_dim = 0;  // 0 means dec_hidden

  size_t enc_out() const { return 2 * enc_hidden; }
  size_t attn() const { return attn_dim ? attn_dim : dec_hidden; }

  void validate() const {
    require(feat_dim >= 1 && enc_hidden >= 1 && dec_hidden >= 1 && embed_dim >= 1,
            errc::usage_error, "model dims must be positive");
    require(enc_layers >= 1 && dec_layers >= 1, errc::usage_error,
            "model needs at least one layer per stack");
  }

  bool operator==(const model_dims &o) const = default;
};

struct model_params {
  model_dims dims;
  model_vocab vocab;
  std::vector<lstm_params> enc_fw, enc_bw;  // dims.enc_layers each
  std::vector<lstm_params> dec;             // dims.dec_layers
  attn_params attn;
  matd M;      // V x embed_dim
  matd W_out;  // V x (enc_out + dec_hidden)
  vecd b_out;  // V
  // Bumped by every in-place training mutation; forward caches pin it so a
  // stale cache cannot feed backward().
  uint64_t revision = 0;

  size_t vocab_size() const { return vocab.size(); }

  bool same_values(const model_params &o) const {
    return dims == o.dims && vocab == o.vocab && enc_fw == o.enc_fw &&
           enc_bw == o.enc_bw && dec == o.dec && attn == o.attn && M == o.M &&
           W_out == o.W_out && b_out == o.b_out;
  }
};

// Deterministic draw order: per encoder layer fw then bw, decoder layers,
// attention, embedding, generator.
inline model_params init_model(const model_dims &dims, const model_vocab &vocab, rng &gen,
                               double scale = 0.1) {
  dims.validate();
  require(vocab.size() >= 3, errc::empty_set, "model vocabulary needs phonemes");
  model_params p;
  p.dims = dims;
  p.vocab = vocab;
  for (size_t l = 0; l < dims.enc_layers; ++l) {
    size_t in = (l == 0) ? dims.feat_dim : dims.enc_out();
    p.enc_fw.push_back(make_lstm(in, dims.enc_hidden, gen, scale));
    p.enc_bw.push_back(make_lstm(in, dims.enc_hidden, gen, scale));
  }
  for (size_t l = 0; l < dims.dec_layers; ++l) {
    size_t in = (l == 0) ? dims.embed_dim + dims.enc_out() : dims.dec_hidden;
    p.dec.push_back(make_lstm(in, dims.dec_hidden, gen, scale));
  }
  p.attn = make_attn(dims.dec_hidden, dims.enc_out(), dims.attn(), gen, scale);
  p.M = matd(vocab.size(), dims.embed_dim);
  for (auto &x : p.M.data) x = gen.uniform_real(-scale, scale);
  p.W_out = matd(vocab.size(), dims.enc_out() + dims.dec_hidden);
  for (auto &x : p.W_out.data) x = gen.uniform_real(-scale, scale);
  p.b_out.assign(vocab.size(), 0.0);
  return p;
}

inline model_params zeros_like(const model_params &p) {
  model_params z;
  z.dims = p.dims;
  z.vocab = p.vocab;
  for (const auto &l : p.enc_fw) z.enc_fw.push_back(zeros_like(l));
  for (const auto &l : p.enc_bw) z.enc_bw.push_back(zeros_like(l));
  for (const auto &l : p.dec) z.dec.push_back(zeros_like(l));
  z.attn = zeros_like(p.attn);
  z.M = matd(p.M.rows, p.M.cols, 0.0);
  z.W_out = matd(p.W_out.rows, p.W_out.cols, 0.0);
  z.b_out.assign(p.b_out.size(), 0.0);
  return z;
}

using grad_store = model_params;

// Flat view over every parameter tensor, in a fixed order shared by the
// gradient checker, the SGD update, clipping, and serialization.
struct tensor_ref {
  std::string name;
  double *data;
  size_t size;
};

inline std::vector<tensor_ref> tensors(model_params &p) {
  std::vector<tensor_ref> out;
  auto add_lstm = [&](const std::string &name, lstm_params &l) {
    out.push_back({name + ".W", l.W.data.data(), l.W.data.size()});
    out.push_back({name + ".U", l.U.data.data(), l.U.data.size()});
    out.push_back({name + ".b", l.b.data(), l.b.size()});
  };
  for (size_t l = 0; l < p.enc_fw.size(); ++l) {
    add_lstm("enc_fw" + std::to_string(l), p.enc_fw[l]);
    add_lstm("enc_bw" + std::to_string(l), p.enc_bw[l]);
  }
  for (size_t l = 0; l < p.dec.size(); ++l) add_lstm("dec" + std::to_string(l), p.dec[l]);
  out.push_back({"attn.W_s", p.attn.W_s.data.data(), p.attn.W_s.data.size()});
  out.push_back({"attn.W_h", p.attn.W_h.data.data(), p.attn.W_h.data.size()});
  out.push_back({"attn.v_a", p.attn.v_a.data(), p.attn.v_a.size()});
  out.push_back({"M", p.M.data.data(), p.M.data.size()});
  out.push_back({"W_out", p.W_out.data.data(), p.W_out.data.size()});
  out.push_back({"b_out", p.b_out.data(), p.b_out.size()});
  return out;
}

inline size_t param_count(model_params &p) {
  size_t n = 0;
  for (const auto &t : tensors(p)) n += t.size;
  return n;
}

// ---- encoder ---------------------------------------------------------------

struct encode_cache {
  std::vector<matd> layer_inputs;            // per layer, T x I_l
  std::vector<lstm_seq_cache> fw, bw;        // per layer
  matd H;                                    // T x enc_out
};

inline matd to_matd(const matf &m) {
  matd out(m.rows, m.cols);
  for (size_t i = 0; i < m.data.size(); ++i) out.data[i] = static_cast<double>(m.data[i]);
  return out;
}

// Stacked bidirectional encoder; each layer concatenates the forward and
// backward hidden state per frame.  No downsampling between layers.
inline matd encode(const model_params &p, const matf &feats, encode_cache *cache = nullptr) {
  require(feats.rows >= 1, errc::dimension_mismatch, "encode: empty feature matrix");
  require(feats.cols == p.dims.feat_dim, errc::dimension_mismatch,
          "encode: feature dim " + std::to_string(feats.cols) + ", model expects " +
              std::to_string(p.dims.feat_dim));
  const size_t T = feats.rows, H = p.dims.enc_hidden;
  matd input = to_matd(feats);
  if (cache) {
    cache->layer_inputs.clear();
    cache->fw.assign(p.dims.enc_layers, {});
    cache->bw.assign(p.dims.enc_layers, {});
  }
  matd out;
  for (size_t l = 0; l < p.dims.enc_layers; ++l) {
    if (cache) cache->layer_inputs.push_back(input);
    matd hf, hb;
    run_lstm_seq(p.enc_fw[l], input, forward_order(T), hf, cache ? &cache->fw[l] : nullptr);
    run_lstm_seq(p.enc_bw[l], input, backward_order(T), hb, cache ? &cache->bw[l] : nullptr);
    out = matd(T, 2 * H);
    for (size_t t = 0; t < T; ++t)
      for (size_t j = 0; j < H; ++j) {
        out(t, j) = hf(t, j);
        out(t, H + j) = hb(t, j);
      }
    input = out;
  }
  if (cache) cache->H = out;
  return out;
}

// Accumulates encoder parameter gradients given the gradient wrt the final
// encoder output.
inline void encode_backward(const model_params &p, const encode_cache &cache,
                            const matd &d_H, grad_store &grad) {
  const size_t T = d_H.rows, H = p.dims.enc_hidden;
  matd d_out = d_H;
  for (size_t l = p.dims.enc_layers; l-- > 0;) {
    matd d_fw(T, H), d_bw(T, H);
    for (size_t t = 0; t < T; ++t)
      for (size_t j = 0; j < H; ++j) {
        d_fw(t, j) = d_out(t, j);
        d_bw(t, j) = d_out(t, H + j);
      }
    matd d_in(T, cache.layer_inputs[l].cols, 0.0);
    run_lstm_seq_backward(p.enc_fw[l], cache.fw[l], d_fw, grad.enc_fw[l], d_in);
    run_lstm_seq_backward(p.enc_bw[l], cache.bw[l], d_bw, grad.enc_bw[l], d_in);
    d_out = std::move(d_in);
  }
}

// ---- decoder ---------------------------------------------------------------

struct decoder_state {
  std::vector<vecd> h, c;  // per decoder layer
  vecd context;            // previous context vector

  bool operator==(const decoder_state &o) const {
    return h == o.h && c == o.c && context == o.context;
  }
};

inline decoder_state initial_decoder_state(const model_params &p) {
  decoder_state s;
  s.h.assign(p.dims.dec_layers, vecd(p.dims.dec_hidden, 0.0));
  s.c.assign(p.dims.dec_layers, vecd(p.dims.dec_hidden, 0.0));
  s.context.assign(p.dims.enc_out(), 0.0);
  return s;
}

struct decoder_step_cache {
  size_t y_in = 0;
  vecd x0;                              // [embedding ; previous context]
  std::vector<lstm_step_cache> layers;
  attend_cache att;
  vecd cat;                             // [context ; top state]
  vecd probs;                           // softmax(logits)
  size_t target = 0;
};

// One decoder step: embed y_prev, run the LSTM stack on [v ; prev context],
// attend with the new top state, emit logits over the vocabulary.
inline void decoder_step(const model_params &p, const matd &H, size_t y_prev,
                         decoder_state &state, vecd &logits, vecd &alpha,
                         decoder_step_cache *cache = nullptr) {
  require(y_prev < p.vocab_size(), errc::token_out_of_range,
          "decoder token id " + std::to_string(y_prev));
  const size_t E = p.dims.embed_dim;

  vecd x(E + p.dims.enc_out());
  for (size_t d = 0; d < E; ++d) x[d] = p.M(y_prev, d);
  for (size_t d = 0; d < state.context.size(); ++d) x[E + d] = state.context[d];

  if (cache) {
    cache->y_in = y_prev;
    cache->x0 = x;
    cache->layers.resize(p.dims.dec_layers);
  }
  for (size_t l = 0; l < p.dims.dec_layers; ++l) {
    vecd h_new, c_new;
    lstm_step(p.dec[l], x, state.h[l], state.c[l], h_new, c_new,
              cache ? &cache->layers[l] : nullptr);
    state.h[l] = std::move(h_new);
    state.c[l] = std::move(c_new);
    x = state.h[l];
  }

  const vecd &s = state.h.back();
  vecd context;
  attend(p.attn, s, H, alpha, context, cache ? &cache->att : nullptr);

  vecd cat(context.size() + s.size());
  for (size_t d = 0; d < context.size(); ++d) cat[d] = context[d];
  for (size_t d = 0; d < s.size(); ++d) cat[context.size() + d] = s[d];
  gemv(p.W_out, cat, logits);
  axpy(1.0, p.b_out, logits);
  if (cache) cache->cat = cat;
  state.context = std::move(context);
}

// ---- forward loss and BPTT ---------------------------------------------

struct forward_cache {
  uint64_t revision = 0;
  encode_cache enc;
  std::vector<decoder_step_cache> steps;
  std::vector<size_t> teacher;  // <sos> + transcript + <eos>
};

// Sum of per-step cross-entropies of the next teacher token.  With
// probability sampling_p each post-<sos> input is replaced by the previous
// step's argmax prediction (ties to the lowest id); the rng is consulted
// only when sampling_p > 0.
inline double forward_loss(const model_params &p, const matf &feats,
                           const std::vector<size_t> &transcript_ids, double sampling_p,
                           rng &gen, forward_cache *cache = nullptr) {
  require(!transcript_ids.empty(), errc::empty_transcript,
          "forward_loss: empty transcript");
  for (size_t id : transcript_ids)
    require(id < p.vocab_size(), errc::token_out_of_range,
            "transcript token id " + std::to_string(id));

  std::vector<size_t> teacher;
  teacher.reserve(transcript_ids.size() + 2);
  teacher.push_back(p.vocab.sos);
  teacher.insert(teacher.end(), transcript_ids.begin(), transcript_ids.end());
  teacher.push_back(p.vocab.eos);

  matd H = encode(p, feats, cache ? &cache->enc : nullptr);
  if (cache) {
    cache->revision = p.revision;
    cache->teacher = teacher;
    cache->steps.clear();
    cache->steps.reserve(teacher.size() - 1);
  }

  decoder_state state = initial_decoder_state(p);
  double loss = 0.0;
  size_t prev_argmax = 0;
  vecd logits, alpha;
  for (size_t i = 1; i < teacher.size(); ++i) {
    size_t y_in = teacher[i - 1];
    if (i > 1 && sampling_p > 0.0 && gen.uniform_real() < sampling_p) y_in = prev_argmax;

    decoder_step_cache step;
    decoder_step(p, H, y_in, state, logits, alpha, cache ? &step : nullptr);

    double lse = logsumexp(logits);
    size_t target = teacher[i];
    loss += lse - logits[target];

    prev_argmax = 0;
    for (size_t k = 1; k < logits.size(); ++k)
      if (logits[k] > logits[prev_argmax]) prev_argmax = k;

    if (cache) {
      step.probs.resize(logits.size());
      for (size_t k = 0; k < logits.size(); ++k) step.probs[k] = std::exp(logits[k] - lse);
      step.target = target;
      cache->steps.push_back(std::move(step));
    }
  }
  return loss;
}

// Exact gradients for the cached forward pass.  Sampled inputs (if any) are
// treated as constants, which matches scheduled-sampling practice; gradient
// checks use sampling_p = 0.
inline grad_store backward(const model_params &p, const forward_cache &cache) {
  require(cache.revision == p.revision, errc::stale_cache,
          "backward: parameters changed since forward_loss");
  require(!cache.steps.empty(), errc::stale_cache, "backward: cache has no steps");

  grad_store grad = zeros_like(p);
  const matd &H = cache.enc.H;
  const size_t T = H.rows;
  const size_t enc_out = p.dims.enc_out();
  const size_t L = p.dims.dec_layers;

  matd d_H(T, enc_out, 0.0);
  // Gradients flowing into each layer's h/c outputs from the future step.
  std::vector<vecd> dh_next(L, vecd(p.dims.dec_hidden, 0.0));
  std::vector<vecd> dc_next(L, vecd(p.dims.dec_hidden, 0.0));
  vecd d_context_next(enc_out, 0.0);  // into the context consumed by step i+1

  for (size_t i = cache.steps.size(); i-- > 0;) {
    const auto &step = cache.steps[i];

    // d logits = probs - onehot(target)
    vecd d_logits = step.probs;
    d_logits[step.target] -= 1.0;
    outer_acc(d_logits, step.cat, grad.W_out);
    axpy(1.0, d_logits, grad.b_out);
    vecd d_cat(step.cat.size(), 0.0);
    gemv_t_acc(p.W_out, d_logits, d_cat);

    // Split [context ; s]; the fresh context also fed the next step's input.
    vecd d_context(enc_out);
    for (size_t d = 0; d < enc_out; ++d) d_context[d] = d_cat[d] + d_context_next[d];
    vecd d_s_out(p.dims.dec_hidden);
    for (size_t d = 0; d < p.dims.dec_hidden; ++d) d_s_out[d] = d_cat[enc_out + d];

    vecd d_s_attn;
    attend_backward(p.attn, H, step.att, d_context, {}, grad.attn, d_H, d_s_attn);
    axpy(1.0, d_s_attn, d_s_out);

    // Decoder stack, top layer first.  The top h also feeds attention and
    // the generator; lower layers feed the layer above.
    vecd d_x_above;
    for (size_t l = L; l-- > 0;) {
      vecd dh = dh_next[l];
      if (l == L - 1) {
        axpy(1.0, d_s_out, dh);
      } else {
        axpy(1.0, d_x_above, dh);
      }
      vecd dx, dh_prev, dc_prev;
      lstm_step_backward(p.dec[l], step.layers[l], dh, dc_next[l], grad.dec[l], dx,
                         dh_prev, dc_prev);
      dh_next[l] = std::move(dh_prev);
      dc_next[l] = std::move(dc_prev);
      d_x_above = std::move(dx);
    }

    // d_x_above is now the gradient wrt [embedding ; previous context].
    const size_t E = p.dims.embed_dim;
    axpy(1.0, d_x_above.data(), grad.M.row(step.y_in), E);
    for (size_t d = 0; d < enc_out; ++d) d_context_next[d] = d_x_above[E + d];
  }
  encode_backward(p, cache.enc, d_H, grad);
  return grad;
}

// Max relative error between analytic gradients and central finite
// differences over every parameter.  Perturbs a private copy of the model.
inline double grad_check(const model_params &params, const matf &feats,
                         const std::vector<size_t> &transcript_ids, double eps = 1e-5) {
  require(eps > 0.0, errc::usage_error, "grad_check: eps must be positive");
  model_params work = params;
  rng unused(0);
  forward_cache cache;
  forward_loss(work, feats, transcript_ids, 0.0, unused, &cache);
  grad_store analytic = backward(work, cache);

  auto param_view = tensors(work);
  auto grad_view = tensors(analytic);
  double max_rel = 0.0;
  for (size_t g = 0; g < param_view.size(); ++g) {
    for (size_t k = 0; k < param_view[g].size; ++k) {
      double saved = param_view[g].data[k];
      param_view[g].data[k] = saved + eps;
      double up = forward_loss(work, feats, transcript_ids, 0.0, unused);
      param_view[g].data[k] = saved - eps;
      double down = forward_loss(work, feats, transcript_ids, 0.0, unused);
      param_view[g].data[k] = saved;
      double numeric = (up - down) / (2.0 * eps);
      double a = grad_view[g].data[k];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace phonseq

#endif  // PHONSEQ_MODEL_HPP_
