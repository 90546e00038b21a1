// phonseq/train.hpp

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

// Training orchestration: embedding initialization from pretrained vectors,
// the SGD epoch loop with global-norm clipping, the two-stage corrective
// schedule with best-validation checkpoint selection, and binary
// checkpointing with bit-exact resumption.

#ifndef PHONSEQ_TRAIN_HPP_
#define PHONSEQ_TRAIN_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "phonseq/corpus.hpp"
#include "phonseq/decode.hpp"
#include "phonseq/model.hpp"
#include "phonseq/phoneme_map.hpp"
#include "phonseq/word2vec.hpp"

namespace phonseq {

// ---- configuration ----------------------------------------------------------

struct train_config {
  double lr = 0.05;
  double lr_decay = 0.0;  // fraction of lr removed linearly across the stage
  size_t epochs = 1;
  size_t batch_size = 1;
  double sampling_p = 0.1;
  double grad_clip = 5.0;
  uint64_t seed = 0;

  void validate() const {
    require(lr > 0.0, errc::config_error, "lr must be > 0");
    require(lr_decay >= 0.0 && lr_decay <= 1.0, errc::config_error,
            "lr_decay must be in [0, 1]");
    require(epochs >= 1, errc::config_error, "epochs must be >= 1");
    require(batch_size >= 1, errc::config_error, "batch_size must be >= 1");
    require(sampling_p >= 0.0 && sampling_p <= 1.0, errc::config_error,
            "sampling_p must be in [0, 1]");
    require(grad_clip > 0.0, errc::config_error, "grad_clip must be > 0");
  }

  bool operator==(const train_config &o) const = default;
};

// A stage dataset.  With inverse_map set the transcripts are folded 39-level
// labels; every epoch expands them to a random 61-level realization unless
// resample_each_epoch is cleared, which freezes one expansion per stage.
struct train_dataset {
  std::vector<utterance> utts;
  bool inverse_map = false;
  bool resample_each_epoch = true;
};

struct train_stage {
  train_dataset data;
  train_config config;
};

struct train_schedule {
  std::vector<train_stage> stages;
  std::vector<utterance> validation;  // natively 61-level transcripts

  void validate() const {
    require(!stages.empty(), errc::empty_stage, "schedule needs at least one stage");
    for (const auto &st : stages) {
      st.config.validate();
      require(!st.data.utts.empty(), errc::empty_stage, "stage dataset is empty");
    }
    require(!validation.empty(), errc::config_error,
            "corrective training needs a validation set");
  }
};

// Config stamp stored in checkpoints.  Covers hyperparameters and dataset
// sizes, not dataset contents.
inline uint64_t schedule_fingerprint(const train_schedule &sched) {
  std::string s;
  for (const auto &st : sched.stages) {
    const train_config &c = st.config;
    s += "stage lr=" + format_real(c.lr, 17) + " lr_decay=" + format_real(c.lr_decay, 17) +
         " epochs=" + std::to_string(c.epochs) + " batch_size=" + std::to_string(c.batch_size) +
         " sampling_p=" + format_real(c.sampling_p, 17) +
         " grad_clip=" + format_real(c.grad_clip, 17) + " seed=" + std::to_string(c.seed) +
         " inverse_map=" + std::to_string(st.data.inverse_map ? 1 : 0) +
         " resample=" + std::to_string(st.data.resample_each_epoch ? 1 : 0) +
         " n=" + std::to_string(st.data.utts.size()) + "\n";
  }
  s += "validation n=" + std::to_string(sched.validation.size()) + "\n";
  return fnv1a64(s);
}

// ---- gradient plumbing ------------------------------------------------------

inline void zero_grads(grad_store &g) {
  for (auto &t : tensors(g)) std::fill(t.data, t.data + t.size, 0.0);
}

inline void add_grads(grad_store &acc, grad_store &g) {
  auto a = tensors(acc), b = tensors(g);
  for (size_t k = 0; k < a.size(); ++k) axpy(1.0, b[k].data, a[k].data, a[k].size);
}

inline void scale_grads(grad_store &g, double s) {
  for (auto &t : tensors(g))
    for (size_t i = 0; i < t.size; ++i) t.data[i] *= s;
}

inline double global_grad_norm(grad_store &g) {
  double ss = 0.0;
  for (auto &t : tensors(g))
    for (size_t i = 0; i < t.size; ++i) ss += t.data[i] * t.data[i];
  return std::sqrt(ss);
}

// Rescales g to norm max_norm when it exceeds it; returns the pre-clip norm.
inline double clip_global_norm(grad_store &g, double max_norm) {
  require(max_norm > 0.0, errc::config_error, "clip norm must be > 0");
  double n = global_grad_norm(g);
  if (n > max_norm) scale_grads(g, max_norm / n);
  return n;
}

inline void sgd_step(model_params &p, grad_store &g, double lr) {
  auto pt = tensors(p), gt = tensors(g);
  for (size_t k = 0; k < pt.size(); ++k) axpy(-lr, gt[k].data, pt[k].data, pt[k].size);
  ++p.revision;
}

// ---- embedding initialization -----------------------------------------------

// Symbol-keyed copy of pretrained input vectors into the model embedding.
// Rows for <sos>/<eos> keep their random initialization when the symbols are
// absent from E.  Vocabulary-order permutations of E cannot change the result.
inline void init_embeddings_from_w2v(model_params &p, const embedding_matrix &E,
                                     const phoneme_set &set) {
  require(E.dim == p.dims.embed_dim, errc::dimension_mismatch,
          "embedding dim " + std::to_string(E.dim) + " != model dim " +
              std::to_string(p.dims.embed_dim));
  std::vector<std::string> missing;
  for (const auto &sym : set.symbols)
    if (!E.vocab.has(sym)) missing.push_back(sym);
  require(missing.empty(), errc::missing_symbol,
          "symbols absent from embeddings: " + join(missing, " "));
  for (const auto &sym : set.symbols) {
    const double *src = E.input_vectors.row(E.vocab.id(sym));
    double *dst = p.M.row(p.vocab.id(sym));
    std::copy(src, src + E.dim, dst);
  }
  ++p.revision;
}

// ---- epoch loop ---------------------------------------------------------------

// One training example: borrowed features plus the tokenized transcript for
// this epoch.  The features must outlive the view.
struct tokenized_utt {
  const matf *feats = nullptr;
  std::vector<size_t> ids;
};

// One pass over data in a shuffled order drawn from gen.  Per batch the
// utterance gradients are averaged, clipped to grad_clip by global norm, and
// applied with the configured lr.  Returns the mean per-utterance loss.
inline double train_epoch(model_params &p, const std::vector<tokenized_utt> &data,
                          const train_config &cfg, rng &gen) {
  require(!data.empty(), errc::empty_stage, "train_epoch needs data");
  require(cfg.batch_size >= 1, errc::config_error, "batch_size must be >= 1");
  require(cfg.grad_clip > 0.0, errc::config_error, "grad_clip must be > 0");

  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[gen.uniform_index(i)]);

  grad_store acc = zeros_like(p);
  double total = 0.0;
  for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
    size_t end = std::min(order.size(), start + cfg.batch_size);
    zero_grads(acc);
    for (size_t b = start; b < end; ++b) {
      const tokenized_utt &u = data[order[b]];
      forward_cache cache;
      total += forward_loss(p, *u.feats, u.ids, cfg.sampling_p, gen, &cache);
      grad_store g = backward(p, cache);
      add_grads(acc, g);
    }
    scale_grads(acc, 1.0 / static_cast<double>(end - start));
    clip_global_norm(acc, cfg.grad_clip);
    sgd_step(p, acc, cfg.lr);
  }
  return total / static_cast<double>(data.size());
}

// Greedy-decode PER of the model on 61-level reference transcripts, folded
// to 39 classes on both sides.
inline double evaluate_per(const model_params &p, const std::vector<utterance> &val,
                           const mapping_table &table) {
  require(!val.empty(), errc::empty_corpus, "evaluate_per needs utterances");
  std::vector<std::vector<std::string>> refs, hyps;
  refs.reserve(val.size());
  hyps.reserve(val.size());
  for (const auto &u : val) {
    std::vector<size_t> ids =
        greedy_decode(p, u.features, default_max_len(u.features.rows));
    hyps.push_back(ids_to_symbols(p.vocab, ids));
    refs.push_back(u.transcript);
  }
  return score_corpus(refs, hyps, table).per();
}

// ---- corrective schedule ------------------------------------------------------

struct epoch_record {
  size_t stage = 0;  // 1-based
  size_t epoch = 0;  // 1-based within the stage
  double loss = 0.0;
  double val_per = 0.0;
};

inline std::string format_epoch_line(const epoch_record &r) {
  return "stage=" + std::to_string(r.stage) + " epoch=" + std::to_string(r.epoch) +
         " loss=" + format_real(r.loss, 6) + " val_per=" + format_real(r.val_per, 6);
}

// Everything the schedule loop carries between epochs.  Checkpoints persist
// this verbatim, so a resumed run is bit-identical to an uninterrupted one.
struct train_state {
  model_params params;
  model_params best_params;
  double best_val_per = std::numeric_limits<double>::infinity();
  uint64_t best_epoch = 0;  // 1-based epoch of the best snapshot, 0 = none
  uint64_t stage = 0;       // 0-based index of the current stage
  uint64_t epoch = 0;       // completed epochs within the current stage
  rng gen;
  uint64_t config_hash = 0;

  bool operator==(const train_state &o) const {
    auto feq = [](double a, double b) {
      return std::bit_cast<uint64_t>(a) == std::bit_cast<uint64_t>(b);
    };
    return params.same_values(o.params) && params.revision == o.params.revision &&
           best_params.same_values(o.best_params) &&
           best_params.revision == o.best_params.revision &&
           feq(best_val_per, o.best_val_per) && best_epoch == o.best_epoch &&
           stage == o.stage && epoch == o.epoch && gen == o.gen &&
           config_hash == o.config_hash;
  }
};

// Salt for the frozen-expansion stream so it cannot collide with the stage rng.
inline constexpr uint64_t kExpandSalt = 0x9e3779b97f4a7c15ull;

inline void begin_stage(train_state &state, const train_schedule &sched) {
  require(state.stage < sched.stages.size(), errc::usage_error, "no such stage");
  state.gen = rng(sched.stages[state.stage].config.seed);
  state.epoch = 0;
  state.best_params = state.params;
  state.best_val_per = std::numeric_limits<double>::infinity();
  state.best_epoch = 0;
}

// Runs one epoch of the current stage: expand inverse-mapped transcripts,
// tokenize, train, evaluate, track the best validation snapshot.
inline epoch_record advance_one_epoch(train_state &state, const train_schedule &sched,
                                      const mapping_table &table) {
  require(state.stage < sched.stages.size(), errc::usage_error, "no such stage");
  const train_stage &st = sched.stages[state.stage];
  require(state.epoch < st.config.epochs, errc::usage_error, "stage epoch budget spent");

  // Expansion draws come from the stage stream when resampling, otherwise
  // from a fixed salted stream so every epoch sees the same realization.
  rng frozen(st.config.seed ^ kExpandSalt);
  rng &expand_gen = st.data.resample_each_epoch ? state.gen : frozen;
  std::vector<tokenized_utt> data;
  data.reserve(st.data.utts.size());
  for (const auto &u : st.data.utts) {
    std::vector<std::string> syms =
        st.data.inverse_map ? inverse_map_39_to_61(u.transcript, table, expand_gen)
                            : u.transcript;
    tokenized_utt t;
    t.feats = &u.features;
    t.ids.reserve(syms.size());
    for (const auto &s : syms) t.ids.push_back(state.params.vocab.id(s));
    data.push_back(std::move(t));
  }

  train_config cfg = st.config;
  cfg.lr = st.config.lr * (1.0 - st.config.lr_decay * static_cast<double>(state.epoch) /
                                     static_cast<double>(st.config.epochs));

  epoch_record r;
  r.loss = train_epoch(state.params, data, cfg, state.gen);
  ++state.epoch;
  r.stage = state.stage + 1;
  r.epoch = state.epoch;
  r.val_per = evaluate_per(state.params, sched.validation, table);
  if (r.val_per < state.best_val_per) {
    state.best_val_per = r.val_per;
    state.best_params = state.params;
    state.best_epoch = state.epoch;
  }
  return r;
}

struct train_result {
  model_params params;
  std::vector<epoch_record> records;
  // State after the last epoch, checkpointable as a finished run.
  train_state final_state;
};

// Runs the full schedule.  Each stage trains for its epoch budget and hands
// the best-validation snapshot to the next stage; the final model is the
// best snapshot of the last stage.
inline train_result corrective_train(const model_params &init, const train_schedule &sched,
                                     const mapping_table &table,
                                     std::ostream *log = nullptr) {
  sched.validate();
  train_state st;
  st.params = init;
  st.config_hash = schedule_fingerprint(sched);
  train_result res;
  for (st.stage = 0; st.stage < sched.stages.size(); ++st.stage) {
    begin_stage(st, sched);
    while (st.epoch < sched.stages[st.stage].config.epochs) {
      epoch_record r = advance_one_epoch(st, sched, table);
      res.records.push_back(r);
      if (log) *log << format_epoch_line(r) << '\n';
    }
    st.params = st.best_params;
  }
  res.params = st.params;
  res.final_state = st;
  return res;
}

// ---- checkpoints --------------------------------------------------------------
//
// Little-endian layout: magic "PHCK", u32 version=1, u64 payload length,
// u64 fnv1a64 of the payload, then the payload: stage, epoch, best_epoch,
// best_val_per, config_hash, rng state, and both parameter sets (dims,
// vocabulary, revision, then every tensor by name).

inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_string16(std::string &out, const std::string &s) {
  require(s.size() <= 0xffff, errc::usage_error, "string too long for checkpoint");
  put_u16(out, static_cast<uint16_t>(s.size()));
  out += s;
}

inline void put_model(std::string &out, model_params &p) {
  put_u64(out, p.dims.feat_dim);
  put_u64(out, p.dims.enc_hidden);
  put_u64(out, p.dims.enc_layers);
  put_u64(out, p.dims.dec_hidden);
  put_u64(out, p.dims.dec_layers);
  put_u64(out, p.dims.embed_dim);
  put_u64(out, p.dims.attn_dim);
  put_u32(out, static_cast<uint32_t>(p.vocab.size()));
  for (const auto &tok : p.vocab.tokens) put_string16(out, tok);
  put_u64(out, p.revision);
  auto ts = tensors(p);
  put_u32(out, static_cast<uint32_t>(ts.size()));
  for (const auto &t : ts) {
    put_string16(out, t.name);
    put_u64(out, t.size);
    for (size_t i = 0; i < t.size; ++i) put_f64(out, t.data[i]);
  }
}

inline model_params get_model(byte_reader &r) {
  model_dims d;
  d.feat_dim = r.u64();
  d.enc_hidden = r.u64();
  d.enc_layers = r.u64();
  d.dec_hidden = r.u64();
  d.dec_layers = r.u64();
  d.embed_dim = r.u64();
  d.attn_dim = r.u64();
  uint32_t ntok = r.u32();
  require(ntok >= 3, errc::corrupt_payload, "checkpoint vocabulary too small");
  model_vocab v;
  for (uint32_t i = 0; i < ntok; ++i) {
    std::string tok = r.bytes(r.u16());
    bool fresh = v.index.emplace(tok, v.tokens.size()).second;
    require(fresh, errc::corrupt_payload, "duplicate checkpoint token " + tok);
    v.tokens.push_back(std::move(tok));
  }
  rng shape_gen(0);
  model_params p = init_model(d, v, shape_gen, 0.0);
  p.revision = r.u64();
  auto ts = tensors(p);
  uint32_t nt = r.u32();
  require(nt == ts.size(), errc::corrupt_payload, "checkpoint tensor count mismatch");
  for (auto &t : ts) {
    std::string name = r.bytes(r.u16());
    require(name == t.name, errc::corrupt_payload, "checkpoint tensor order mismatch");
    require(r.u64() == t.size, errc::corrupt_payload,
            "checkpoint tensor size mismatch for " + name);
    for (size_t i = 0; i < t.size; ++i) t.data[i] = r.f64();
  }
  return p;
}

}  // namespace detail

inline void save_checkpoint(train_state &state, const std::string &path) {
  std::string payload;
  detail::put_u64(payload, state.stage);
  detail::put_u64(payload, state.epoch);
  detail::put_u64(payload, state.best_epoch);
  detail::put_f64(payload, state.best_val_per);
  detail::put_u64(payload, state.config_hash);
  detail::put_string16(payload, state.gen.save_state());
  detail::put_model(payload, state.params);
  detail::put_model(payload, state.best_params);

  std::string buf = "PHCK";
  detail::put_u32(buf, kCheckpointVersion);
  detail::put_u64(buf, payload.size());
  detail::put_u64(buf, fnv1a64(payload));
  buf += payload;
  detail::write_file_bytes(path, buf);
}

inline train_state load_checkpoint(const std::string &path) {
  std::string buf = detail::read_file_bytes(path);
  require(buf.size() >= 4, errc::corrupt_payload, path + ": shorter than the magic");
  require(buf.compare(0, 4, "PHCK") == 0, errc::bad_magic,
          path + ": not a checkpoint file");
  try {
    detail::byte_reader hdr(buf, path);
    hdr.bytes(4);
    uint32_t version = hdr.u32();
    require(version == kCheckpointVersion, errc::version_mismatch,
            path + ": checkpoint version " + std::to_string(version));
    uint64_t len = hdr.u64();
    uint64_t sum = hdr.u64();
    require(hdr.remaining() == len, errc::corrupt_payload,
            path + ": payload length mismatch");
    std::string payload = hdr.bytes(len);
    require(fnv1a64(payload) == sum, errc::corrupt_payload,
            path + ": payload checksum mismatch");

    detail::byte_reader r(payload, path);
    train_state st;
    st.stage = r.u64();
    st.epoch = r.u64();
    st.best_epoch = r.u64();
    st.best_val_per = r.f64();
    st.config_hash = r.u64();
    st.gen.load_state(r.bytes(r.u16()));
    st.params = detail::get_model(r);
    st.best_params = detail::get_model(r);
    require(r.remaining() == 0, errc::corrupt_payload, path + ": trailing bytes");
    return st;
  } catch (const error &e) {
    if (e.code() == errc::truncated_file)
      fail(errc::corrupt_payload, path + ": truncated checkpoint");
    throw;
  }
}

}  // namespace phonseq

#endif  // PHONSEQ_TRAIN_HPP_
