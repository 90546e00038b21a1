// phonseq/word2vec.hpp

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

// Skip-gram / CBOW embedding training with negative sampling over
// phoneme-level sentences.  Tiny vocabularies, so no frequency subsampling
// and no hierarchical softmax.

#ifndef PHONSEQ_WORD2VEC_HPP_
#define PHONSEQ_WORD2VEC_HPP_

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "phonseq/embed_metrics.hpp"
#include "phonseq/mat.hpp"

namespace phonseq {

inline const std::vector<std::string> kW2vSpecials = {"<sos>", "<eos>", "<pad>"};

struct w2v_vocab {
  std::vector<std::string> tokens;  // specials first, then count-descending
  std::vector<uint64_t> counts;     // aligned with tokens
  std::vector<double> noise_dist;   // unigram^0.75, zero mass on specials
  std::unordered_map<std::string, size_t> index;
  size_t n_specials = 0;

  size_t size() const { return tokens.size(); }
  bool has(const std::string &s) const { return index.count(s) != 0; }
  size_t id(const std::string &s) const {
    auto it = index.find(s);
    require(it != index.end(), errc::unknown_symbol, "token not in vocabulary: " + s);
    return it->second;
  }
};

using phoneme_corpus = std::vector<std::vector<std::string>>;

// Token order: specials in given order, then corpus tokens by descending
// count with first appearance breaking ties.  Noise distribution is
// unigram^0.75 over the non-special tokens.
inline w2v_vocab build_vocab(const phoneme_corpus &corpus,
                             const std::vector<std::string> &specials = kW2vSpecials) {
  w2v_vocab v;
  for (const auto &s : specials) {
    require(!s.empty(), errc::unknown_symbol, "empty special token");
    if (v.index.emplace(s, v.tokens.size()).second) v.tokens.push_back(s);
  }
  v.n_specials = v.tokens.size();

  std::unordered_map<std::string, uint64_t> count;
  std::vector<std::string> order;  // non-special tokens by first appearance
  uint64_t total = 0;
  for (const auto &sent : corpus)
    for (const auto &tok : sent) {
      ++total;
      if (v.index.count(tok)) continue;  // specials keep count 0
      if (count[tok]++ == 0) order.push_back(tok);
    }
  require(total > 0, errc::empty_corpus, "vocabulary needs a non-empty corpus");

  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string &a, const std::string &b) {
                     return count[a] > count[b];
                   });
  for (const auto &tok : order) {
    v.index.emplace(tok, v.tokens.size());
    v.tokens.push_back(tok);
  }
  v.counts.assign(v.tokens.size(), 0);
  for (size_t i = v.n_specials; i < v.tokens.size(); ++i) v.counts[i] = count[v.tokens[i]];

  v.noise_dist.assign(v.tokens.size(), 0.0);
  double z = 0.0;
  for (size_t i = v.n_specials; i < v.tokens.size(); ++i)
    z += std::pow(static_cast<double>(v.counts[i]), 0.75);
  for (size_t i = v.n_specials; i < v.tokens.size(); ++i)
    v.noise_dist[i] = std::pow(static_cast<double>(v.counts[i]), 0.75) / z;
  return v;
}

struct embedding_matrix {
  w2v_vocab vocab;
  size_t dim = 0;
  matd input_vectors;   // V x D, the exported side
  matd output_vectors;  // V x D, context side

  bool operator==(const embedding_matrix &o) const {
    return vocab.tokens == o.vocab.tokens && dim == o.dim &&
           input_vectors == o.input_vectors && output_vectors == o.output_vectors;
  }
};

enum class w2v_algo { skipgram, cbow };

struct w2v_config {
  w2v_algo algorithm = w2v_algo::skipgram;
  size_t window = 3;
  size_t negatives = 5;
  double lr = 0.025;
  size_t epochs = 50;
  size_t dim = 32;
  uint64_t seed = 0;
  // Keeps the per-epoch snapshot with the smallest mean pairwise cosine over
  // non-special rows instead of the final epoch.
  bool select_min_cos = false;

  void validate() const {
    require(window >= 1, errc::usage_error, "window must be >= 1");
    require(negatives >= 1, errc::usage_error, "negatives must be >= 1");
    require(lr > 0.0, errc::usage_error, "lr must be positive");
    require(dim >= 1, errc::usage_error, "dim must be >= 1");
  }
};

namespace detail {

// Inverse-CDF sampler over the vocabulary noise distribution.
struct noise_sampler {
  std::vector<double> cdf;
  size_t support = 0;

  explicit noise_sampler(const w2v_vocab &v) {
    cdf.resize(v.size());
    double acc = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
      if (v.noise_dist[i] > 0.0) ++support;
      acc += v.noise_dist[i];
      cdf[i] = acc;
    }
    if (!cdf.empty()) cdf.back() = 1.0;
  }

  size_t draw(rng &gen) const {
    double r = gen.uniform_real();
    size_t i = static_cast<size_t>(
        std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
    return std::min(i, cdf.size() - 1);
  }

  // Negatives never equal the positive token (unless the support is
  // degenerate with a single token).
  size_t draw_avoiding(rng &gen, size_t avoid) const {
    size_t t = draw(gen);
    while (t == avoid && support > 1) t = draw(gen);
    return t;
  }
};

inline double log_sigmoid(double x) {
  // -log(1 + e^{-x}) computed without overflow on either tail.
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

}  // namespace detail

// One SGNS update: center row of input_vectors against the context row and
// negative rows of output_vectors.  All gate scalars come from the
// pre-update state, so repeated rows accumulate consistently and the applied
// step equals lr times the exact loss gradient.
inline double sgns_pair_step(embedding_matrix &E, size_t center, size_t context,
                             const std::vector<size_t> &negatives, double lr) {
  const size_t D = E.dim;
  require(center < E.vocab.size() && context < E.vocab.size(),
          errc::token_out_of_range, "sgns token id out of range");
  double *v = E.input_vectors.row(center);

  double d_ctx = dot(E.output_vectors.row(context), v, D);
  double loss = -detail::log_sigmoid(d_ctx);
  double g_ctx = sigmoid(d_ctx) - 1.0;

  std::vector<double> g_neg(negatives.size());
  for (size_t n = 0; n < negatives.size(); ++n) {
    require(negatives[n] < E.vocab.size(), errc::token_out_of_range,
            "sgns negative id out of range");
    double d = dot(E.output_vectors.row(negatives[n]), v, D);
    loss -= detail::log_sigmoid(-d);
    g_neg[n] = sigmoid(d);
  }

  vecd v_grad(D, 0.0);
  axpy(g_ctx, E.output_vectors.row(context), v_grad.data(), D);
  for (size_t n = 0; n < negatives.size(); ++n)
    axpy(g_neg[n], E.output_vectors.row(negatives[n]), v_grad.data(), D);

  axpy(-lr * g_ctx, v, E.output_vectors.row(context), D);
  for (size_t n = 0; n < negatives.size(); ++n)
    axpy(-lr * g_neg[n], v, E.output_vectors.row(negatives[n]), D);
  axpy(-lr, v_grad.data(), v, D);
  return loss;
}

// One CBOW update: the averaged context input vector predicts the center.
// Each context row receives the exact chain-rule share (gradient / context
// count).
inline double cbow_step(embedding_matrix &E, const std::vector<size_t> &context,
                        size_t center, const std::vector<size_t> &negatives, double lr) {
  const size_t D = E.dim;
  require(!context.empty(), errc::usage_error, "cbow needs a non-empty context");
  require(center < E.vocab.size(), errc::token_out_of_range, "cbow token id out of range");

  vecd v_avg(D, 0.0);
  for (size_t c : context) {
    require(c < E.vocab.size(), errc::token_out_of_range, "cbow context id out of range");
    axpy(1.0, E.input_vectors.row(c), v_avg.data(), D);
  }
  for (auto &x : v_avg) x /= static_cast<double>(context.size());

  double d_pos = dot(E.output_vectors.row(center), v_avg.data(), D);
  double loss = -detail::log_sigmoid(d_pos);
  double g_pos = sigmoid(d_pos) - 1.0;

  std::vector<double> g_neg(negatives.size());
  for (size_t n = 0; n < negatives.size(); ++n) {
    require(negatives[n] < E.vocab.size(), errc::token_out_of_range,
            "cbow negative id out of range");
    double d = dot(E.output_vectors.row(negatives[n]), v_avg.data(), D);
    loss -= detail::log_sigmoid(-d);
    g_neg[n] = sigmoid(d);
  }

  vecd avg_grad(D, 0.0);
  axpy(g_pos, E.output_vectors.row(center), avg_grad.data(), D);
  for (size_t n = 0; n < negatives.size(); ++n)
    axpy(g_neg[n], E.output_vectors.row(negatives[n]), avg_grad.data(), D);

  axpy(-lr * g_pos, v_avg.data(), E.output_vectors.row(center), D);
  for (size_t n = 0; n < negatives.size(); ++n)
    axpy(-lr * g_neg[n], v_avg.data(), E.output_vectors.row(negatives[n]), D);
  double share = -lr / static_cast<double>(context.size());
  for (size_t c : context) axpy(share, avg_grad.data(), E.input_vectors.row(c), D);
  return loss;
}

struct w2v_train_log {
  std::vector<double> epoch_losses;  // mean loss per epoch
  std::vector<double> epoch_cos;     // mean pairwise cosine after each epoch
  size_t selected_epoch = 0;         // 1-based; 0 = initialization
};

inline embedding_matrix init_embeddings(const w2v_vocab &vocab, size_t dim, rng &gen) {
  embedding_matrix E;
  E.vocab = vocab;
  E.dim = dim;
  double half = 0.5 / static_cast<double>(dim);
  E.input_vectors = matd(vocab.size(), dim);
  E.output_vectors = matd(vocab.size(), dim);
  for (auto &x : E.input_vectors.data) x = gen.uniform_real(-half, half);
  for (auto &x : E.output_vectors.data) x = gen.uniform_real(-half, half);
  return E;
}

// Full training run.  Sentences are visited in corpus order; the learning
// rate decays linearly per epoch to a floor of lr/10000.  Deterministic
// given (corpus, config).
inline embedding_matrix train_embeddings(const phoneme_corpus &corpus,
                                         const w2v_config &cfg,
                                         const std::vector<std::string> &specials = kW2vSpecials,
                                         w2v_train_log *log = nullptr) {
  cfg.validate();
  w2v_vocab vocab = build_vocab(corpus, specials);
  rng gen(cfg.seed);
  embedding_matrix E = init_embeddings(vocab, cfg.dim, gen);
  if (log) *log = w2v_train_log{};
  if (cfg.epochs == 0) return E;

  // Sentences as id sequences once up front.
  std::vector<std::vector<size_t>> sents;
  sents.reserve(corpus.size());
  for (const auto &sent : corpus) {
    std::vector<size_t> ids(sent.size());
    for (size_t i = 0; i < sent.size(); ++i) ids[i] = vocab.id(sent[i]);
    if (!ids.empty()) sents.push_back(std::move(ids));
  }

  detail::noise_sampler sampler(vocab);
  std::vector<size_t> negatives(cfg.negatives);
  embedding_matrix best;
  double best_cos = 0.0;
  const long W = static_cast<long>(cfg.window);

  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.lr * std::max(1.0 - static_cast<double>(epoch) /
                                            static_cast<double>(cfg.epochs),
                                  1e-4);
    double loss_sum = 0.0;
    size_t steps = 0;
    for (const auto &ids : sents) {
      const long n = static_cast<long>(ids.size());
      for (long i = 0; i < n; ++i) {
        if (cfg.algorithm == w2v_algo::skipgram) {
          for (long j = std::max(0L, i - W); j <= std::min(n - 1, i + W); ++j) {
            if (j == i) continue;
            for (auto &neg : negatives) neg = sampler.draw_avoiding(gen, ids[j]);
            loss_sum += sgns_pair_step(E, ids[i], ids[j], negatives, lr);
            ++steps;
          }
        } else {
          std::vector<size_t> context;
          for (long j = std::max(0L, i - W); j <= std::min(n - 1, i + W); ++j)
            if (j != i) context.push_back(ids[j]);
          if (context.empty()) continue;
          for (auto &neg : negatives) neg = sampler.draw_avoiding(gen, ids[i]);
          loss_sum += cbow_step(E, context, ids[i], negatives, lr);
          ++steps;
        }
      }
    }
    double cos = mean_pairwise_cosine(E.input_vectors, vocab.n_specials);
    if (log) {
      log->epoch_losses.push_back(steps ? loss_sum / static_cast<double>(steps) : 0.0);
      log->epoch_cos.push_back(cos);
    }
    if (cfg.select_min_cos && (epoch == 0 || cos < best_cos)) {
      best = E;
      best_cos = cos;
      if (log) log->selected_epoch = epoch + 1;
    }
  }
  if (cfg.select_min_cos) return best;
  if (log) log->selected_epoch = cfg.epochs;
  return E;
}

// Rescale so the average euclidean norm of the non-special input rows equals
// target_avg_norm.  One global scalar on both sides, so every direction and
// every relative magnitude survives; SGNS norms track the training rate, not
// the geometry, and downstream inits expect their own scale.  Returns the
// factor applied.
inline double scale_embeddings(embedding_matrix &E, double target_avg_norm) {
  require(target_avg_norm > 0.0, errc::usage_error, "target norm must be > 0");
  require(E.vocab.size() > E.vocab.n_specials, errc::too_few_rows,
          "no non-special rows to scale");
  double avg = 0.0;
  for (size_t i = E.vocab.n_specials; i < E.vocab.size(); ++i) {
    const double *r = E.input_vectors.row(i);
    avg += std::sqrt(dot(r, r, E.dim));
  }
  avg /= static_cast<double>(E.vocab.size() - E.vocab.n_specials);
  require(avg > 0.0, errc::usage_error, "embedding rows are all zero");
  double factor = target_avg_norm / avg;
  for (auto &x : E.input_vectors.data) x *= factor;
  for (auto &x : E.output_vectors.data) x *= factor;
  return factor;
}

// ---- text persistence ------------------------------------------------------
//
// First line "V D", then V lines "symbol x1 ... xD".

inline std::string format_embeddings(const embedding_matrix &E) {
  std::string out = std::to_string(E.vocab.size()) + " " + std::to_string(E.dim) + "\n";
  for (size_t i = 0; i < E.vocab.size(); ++i) {
    out += E.vocab.tokens[i];
    for (size_t d = 0; d < E.dim; ++d) out += " " + format_real(E.input_vectors(i, d), 10);
    out += "\n";
  }
  return out;
}

inline embedding_matrix parse_embeddings(const std::string &text) {
  std::istringstream is(text);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), errc::parse_error,
          "embedding file: missing header");
  auto head = split_ws(line);
  require(head.size() == 2, errc::parse_error, "embedding header must be \"V D\"");
  size_t V = 0, D = 0;
  try {
    V = std::stoull(head[0]);
    D = std::stoull(head[1]);
  } catch (const std::exception &) {
    fail(errc::parse_error, "embedding header must be numeric");
  }
  require(V >= 1 && D >= 1, errc::parse_error, "embedding header must be positive");

  embedding_matrix E;
  E.dim = D;
  E.input_vectors = matd(V, D);
  E.output_vectors = matd(V, D, 0.0);
  size_t row = 0;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    require(row < V, errc::header_mismatch,
            "embedding file has more rows than the header declares");
    auto toks = split_ws(line);
    require(toks.size() == D + 1, errc::parse_error,
            "embedding row " + std::to_string(row + 1) + ": expected " +
                std::to_string(D + 1) + " fields");
    require(E.vocab.index.emplace(toks[0], row).second, errc::duplicate_symbol,
            "duplicate embedding symbol " + toks[0]);
    E.vocab.tokens.push_back(toks[0]);
    for (size_t d = 0; d < D; ++d) {
      try {
        size_t used = 0;
        E.input_vectors(row, d) = std::stod(toks[d + 1], &used);
        require(used == toks[d + 1].size(), errc::parse_error,
                "embedding row " + std::to_string(row + 1) + ": bad number");
      } catch (const error &) {
        throw;
      } catch (const std::exception &) {
        fail(errc::parse_error,
             "embedding row " + std::to_string(row + 1) + ": bad number");
      }
    }
    ++row;
  }
  require(row == V, errc::header_mismatch,
          "embedding file declares " + std::to_string(V) + " rows, found " +
              std::to_string(row));
  E.vocab.counts.assign(V, 0);
  E.vocab.noise_dist.assign(V, 0.0);
  // The writer puts specials first; restore the count so consumers can skip
  // them again.
  for (const auto &t : E.vocab.tokens) {
    if (std::find(kW2vSpecials.begin(), kW2vSpecials.end(), t) == kW2vSpecials.end())
      break;
    ++E.vocab.n_specials;
  }
  return E;
}

inline void save_embeddings(const embedding_matrix &E, const std::string &path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), errc::io_error, "cannot write " + path);
  out << format_embeddings(E);
  require(static_cast<bool>(out), errc::io_error, "short write to " + path);
}

inline embedding_matrix load_embeddings(const std::string &path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), errc::io_error, "cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_embeddings(text);
}

// Dispersion statistics over an embedding matrix, by default over the
// non-special rows only.
inline dispersion_stats compute_dispersion(const embedding_matrix &E,
                                           bool exclude_specials = true) {
  size_t skip = exclude_specials ? E.vocab.n_specials : 0;
  require(E.vocab.size() >= skip + 2, errc::too_few_rows,
          "dispersion needs at least two rows after exclusion");
  matd rows(E.vocab.size() - skip, E.dim);
  for (size_t i = skip; i < E.vocab.size(); ++i)
    for (size_t d = 0; d < E.dim; ++d) rows(i - skip, d) = E.input_vectors(i, d);
  return compute_dispersion(rows);
}

}  // namespace phonseq

#endif  // PHONSEQ_WORD2VEC_HPP_
