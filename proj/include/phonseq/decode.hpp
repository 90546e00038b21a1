// phonseq/decode.hpp

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

// Greedy and beam-search decoding, Levenshtein alignment with a fixed
// tie-break, and corpus-level phoneme error rate with 61-to-39 fold-back.

#ifndef PHONSEQ_DECODE_HPP_
#define PHONSEQ_DECODE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "phonseq/model.hpp"
#include "phonseq/phoneme_map.hpp"

namespace phonseq {

// ---- edit distance and PER --------------------------------------------

struct per_breakdown {
  size_t substitutions = 0;
  size_t deletions = 0;
  size_t insertions = 0;
  size_t ref_len = 0;

  size_t errors() const { return substitutions + deletions + insertions; }
  // 100 (S+D+I) / ref_len.  An empty reference with errors has no finite
  // rate; scoring real corpora never hits that.
  double per() const {
    if (ref_len == 0)
      return errors() == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    return 100.0 * static_cast<double>(errors()) / static_cast<double>(ref_len);
  }

  void add(const per_breakdown &o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    ref_len += o.ref_len;
  }

  bool operator==(const per_breakdown &o) const = default;
};

// Unit-cost Levenshtein alignment.  The total distance is the standard
// minimum; equal-cost paths resolve substitution over insertion over
// deletion so the breakdown is reproducible.
inline per_breakdown edit_distance(const std::vector<std::string> &ref,
                                   const std::vector<std::string> &hyp) {
  const size_t R = ref.size(), Y = hyp.size();
  struct cell {
    size_t cost = 0, s = 0, d = 0, i = 0;
  };
  std::vector<cell> prev(Y + 1), cur(Y + 1);
  for (size_t j = 0; j <= Y; ++j) prev[j] = {j, 0, 0, j};
  for (size_t i = 1; i <= R; ++i) {
    cur[0] = {i, 0, i, 0};
    for (size_t j = 1; j <= Y; ++j) {
      bool sub = ref[i - 1] != hyp[j - 1];
      cell best = prev[j - 1];
      best.cost += sub ? 1 : 0;
      best.s += sub ? 1 : 0;
      cell ins = cur[j - 1];
      ins.cost += 1;
      ins.i += 1;
      if (ins.cost < best.cost) best = ins;
      cell del = prev[j];
      del.cost += 1;
      del.d += 1;
      if (del.cost < best.cost) best = del;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  per_breakdown out;
  out.substitutions = prev[Y].s;
  out.deletions = prev[Y].d;
  out.insertions = prev[Y].i;
  out.ref_len = R;
  return out;
}

// Folds both sides to 39 phonemes, optionally strips sil, and accumulates
// counts over the corpus.  Splitting across threads is safe because counts
// are integers summed in chunk order.
inline per_breakdown score_corpus(const std::vector<std::vector<std::string>> &refs_61,
                                  const std::vector<std::vector<std::string>> &hyps_61,
                                  const mapping_table &table, bool strip_sil_flag = false,
                                  size_t threads = 1) {
  require(refs_61.size() == hyps_61.size(), errc::length_mismatch,
          "score_corpus: " + std::to_string(refs_61.size()) + " refs vs " +
              std::to_string(hyps_61.size()) + " hyps");
  const size_t N = refs_61.size();
  auto score_range = [&](size_t begin, size_t end, per_breakdown &acc) {
    for (size_t u = begin; u < end; ++u) {
      auto ref = fold_61_to_39(refs_61[u], table);
      auto hyp = fold_61_to_39(hyps_61[u], table);
      if (strip_sil_flag) {
        ref = strip_sil(ref);
        hyp = strip_sil(hyp);
      }
      acc.add(edit_distance(ref, hyp));
    }
  };
  threads = std::max<size_t>(1, std::min(threads, N ? N : 1));
  if (threads == 1) {
    per_breakdown total;
    score_range(0, N, total);
    return total;
  }
  std::vector<per_breakdown> parts(threads);
  std::vector<std::thread> pool;
  size_t chunk = (N + threads - 1) / threads;
  for (size_t w = 0; w < threads; ++w) {
    size_t begin = w * chunk, end = std::min(N, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(score_range, begin, end, std::ref(parts[w]));
  }
  for (auto &t : pool) t.join();
  per_breakdown total;
  for (const auto &p : parts) total.add(p);
  return total;
}

// ---- decoding ---------------------------------------------------------

// Decode-step budget: twice the frame count, capped to bound runaway loops.
inline size_t default_max_len(size_t frames) {
  return std::max<size_t>(1, std::min<size_t>(2 * frames, 400));
}

struct hypothesis {
  std::vector<size_t> tokens;  // emitted ids; ends with <eos> iff finished
  double log_prob = 0.0;
  decoder_state state;
  bool finished = false;

  // Output tokens: the terminating <eos> and any stray <sos> are dropped.
  std::vector<size_t> surface(const model_vocab &v) const {
    std::vector<size_t> out;
    for (size_t id : tokens)
      if (id != v.sos && id != v.eos) out.push_back(id);
    return out;
  }
};

// Argmax decoding; ties go to the lowest token id.  Emits until <eos> wins
// or max_len tokens have been produced.
inline std::vector<size_t> greedy_decode(const model_params &p, const matf &feats,
                                         size_t max_len) {
  require(max_len >= 1, errc::usage_error, "greedy_decode: max_len must be >= 1");
  matd H = encode(p, feats);
  decoder_state st = initial_decoder_state(p);
  size_t y = p.vocab.sos;
  std::vector<size_t> emitted;
  vecd logits, alpha;
  while (emitted.size() < max_len) {
    decoder_step(p, H, y, st, logits, alpha);
    size_t best = 0;
    for (size_t k = 1; k < logits.size(); ++k)
      if (logits[k] > logits[best]) best = k;
    if (best == p.vocab.eos) break;
    emitted.push_back(best);
    y = best;
  }
  std::vector<size_t> out;
  for (size_t id : emitted)
    if (id != p.vocab.sos) out.push_back(id);
  return out;
}

namespace detail {

inline size_t norm_length(const hypothesis &h) {
  size_t n = h.tokens.size() - (h.finished ? 1 : 0);
  return std::max<size_t>(1, n);
}

inline double rank_score(const hypothesis &h, double alpha) {
  if (alpha == 0.0) return h.log_prob;
  return h.log_prob / std::pow(static_cast<double>(norm_length(h)), alpha);
}

}  // namespace detail

// Standard beam expansion over per-step log-probabilities.  Finished and
// length-capped hypotheses retire into a pool ranked by log_prob/len^alpha;
// ties resolve by score then token sequence, so results are deterministic.
inline std::vector<hypothesis> beam_search(const model_params &p, const matf &feats,
                                           size_t beam, size_t max_len,
                                           double len_norm_alpha = 0.0) {
  require(beam >= 1, errc::usage_error, "beam_search: beam must be >= 1");
  require(max_len >= 1, errc::usage_error, "beam_search: max_len must be >= 1");
  matd H = encode(p, feats);

  hypothesis root;
  root.state = initial_decoder_state(p);
  std::vector<hypothesis> live = {root};
  std::vector<hypothesis> pool;

  struct cand {
    double lp;
    size_t tok;
    size_t parent;
  };
  while (!live.empty()) {
    std::vector<cand> cands;
    cands.reserve(live.size() * p.vocab_size());
    std::vector<decoder_state> stepped(live.size());
    vecd logits, alpha;
    for (size_t b = 0; b < live.size(); ++b) {
      decoder_state st = live[b].state;
      size_t y_prev = live[b].tokens.empty() ? p.vocab.sos : live[b].tokens.back();
      decoder_step(p, H, y_prev, st, logits, alpha);
      stepped[b] = std::move(st);
      double lse = logsumexp(logits);
      for (size_t k = 0; k < logits.size(); ++k)
        cands.push_back({live[b].log_prob + logits[k] - lse, k, b});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const cand &a, const cand &b) {
      if (a.lp != b.lp) return a.lp > b.lp;
      return a.tok < b.tok;
    });
    std::vector<hypothesis> next;
    size_t keep = std::min(beam, cands.size());
    for (size_t c = 0; c < keep; ++c) {
      hypothesis h;
      h.tokens = live[cands[c].parent].tokens;
      h.tokens.push_back(cands[c].tok);
      h.log_prob = cands[c].lp;
      h.state = stepped[cands[c].parent];
      if (cands[c].tok == p.vocab.eos) {
        h.finished = true;
        pool.push_back(std::move(h));
      } else if (h.tokens.size() >= max_len) {
        pool.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
  }

  std::stable_sort(pool.begin(), pool.end(), [&](const hypothesis &a, const hypothesis &b) {
    double ra = detail::rank_score(a, len_norm_alpha);
    double rb = detail::rank_score(b, len_norm_alpha);
    if (ra != rb) return ra > rb;
    return a.tokens < b.tokens;
  });
  if (pool.size() > beam) pool.resize(beam);
  return pool;
}

inline std::vector<std::string> ids_to_symbols(const model_vocab &v,
                                               const std::vector<size_t> &ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (size_t id : ids) {
    require(id < v.size(), errc::token_out_of_range,
            "token id " + std::to_string(id));
    out.push_back(v.tokens[id]);
  }
  return out;
}

}  // namespace phonseq

#endif  // PHONSEQ_DECODE_HPP_
