// phonseq/experiment.hpp

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

// End-to-end experiment runner: load datasets, build the model, optionally
// pretrain and transplant embeddings, run the training schedule, evaluate,
// and append one row to an accumulating results table.  The row layout
// mirrors the usual pretraining comparison: one line per configuration, so
// random vs w2v runs on the same data sit next to each other.

#ifndef PHONSEQ_EXPERIMENT_HPP_
#define PHONSEQ_EXPERIMENT_HPP_

#include <cstdio>
#include <fstream>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include "phonseq/config.hpp"
#include "phonseq/corpus.hpp"
#include "phonseq/embed_metrics.hpp"
#include "phonseq/phoneme_map.hpp"
#include "phonseq/train.hpp"
#include "phonseq/word2vec.hpp"

namespace phonseq {

inline constexpr const char *kResultsHeader =
    "phoneme_set\tinit\tstages\tper\tcos\tm_dist\tcov\tp_dist";

// Three comment lines every command prints at the top of its log, enough to
// re-run the exact configuration later.
inline std::string repro_header(uint64_t seed, uint64_t config_hash) {
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(config_hash));
  return std::string("# phonseq ") + kVersion + "\n# seed = " +
         std::to_string(seed) + "\n# config = " + hex + "\n";
}

inline std::vector<utterance> load_dataset(const dataset_files &files) {
  auto utts = read_archive(files.features);
  attach_transcripts(utts, read_transcripts(files.transcripts));
  return utts;
}

// Full table from a forward file and an inverse file; the inventories are
// derived from the forward file, so callers hand over two paths, not four.
inline mapping_table load_mapping_table(const std::string &fwd_path,
                                        const std::string &inv_path) {
  auto fwd_text = detail::read_file_bytes(fwd_path);
  auto inv_text = detail::read_file_bytes(inv_path);
  auto derived = parse_forward_table(fwd_text);
  return parse_mapping_table(fwd_text, inv_text, derived.set61, derived.set39);
}

// The phoneme rows of the decoder embedding, without <sos>/<eos>, for the
// dispersion report.
inline matd phoneme_embedding_rows(const model_params &p) {
  require(p.vocab.size() > 2, errc::too_few_rows, "no phoneme rows in the model");
  matd out(p.vocab.size() - 2, p.dims.embed_dim);
  for (size_t i = 2; i < p.vocab.size(); ++i)
    for (size_t d = 0; d < p.dims.embed_dim; ++d) out(i - 2, d) = p.M(i, d);
  return out;
}

struct experiment_outcome {
  train_result train;
  double per = 0.0;
  dispersion_stats disp;
  std::string row;  // tab separated, no trailing newline
};

// Runs one configuration.  Deterministic: the same config text and input
// files produce the same row byte for byte.  With init = w2v the embeddings
// are pretrained on the stage-1 transcripts as stored, so those transcripts
// must use the model-level symbols.
inline experiment_outcome run_experiment_config(const experiment_config &cfg,
                                                std::ostream *log = nullptr) {
  auto table = load_mapping_table(cfg.fwd_map, cfg.inv_map);

  train_schedule sched;
  for (const auto &ss : cfg.stages) {
    train_stage st;
    st.data.utts = load_dataset(ss.data);
    st.data.inverse_map = ss.inverse_map;
    st.data.resample_each_epoch = ss.resample_each_epoch;
    st.config = ss.config;
    sched.stages.push_back(std::move(st));
  }
  sched.validation = load_dataset(cfg.val);

  size_t feat_dim = 0;
  auto check_dims = [&feat_dim](const std::vector<utterance> &utts) {
    for (const auto &u : utts) {
      if (feat_dim == 0) feat_dim = u.features.cols;
      require(u.features.cols == feat_dim, errc::dimension_mismatch,
              "utterance " + u.id + ": feature dim " +
                  std::to_string(u.features.cols) + " != " + std::to_string(feat_dim));
    }
  };
  for (const auto &st : sched.stages) check_dims(st.data.utts);
  check_dims(sched.validation);
  require(feat_dim > 0, errc::empty_corpus, "no features in any dataset");

  model_dims dims;
  dims.feat_dim = feat_dim;
  dims.enc_hidden = cfg.hidden;
  dims.dec_hidden = cfg.hidden;
  dims.enc_layers = cfg.layers;
  dims.dec_layers = cfg.layers;
  dims.embed_dim = cfg.embed;

  rng mgen(cfg.seed);
  model_params model = init_model(dims, make_model_vocab(table.set61), mgen);

  if (cfg.init == "w2v") {
    require(!sched.stages.empty(), errc::empty_stage, "w2v init needs a stage");
    phoneme_corpus pc;
    for (const auto &u : sched.stages[0].data.utts) pc.push_back(u.transcript);
    embedding_matrix E = train_embeddings(pc, cfg.w2v);
    if (cfg.w2v_scale_to > 0.0) scale_embeddings(E, cfg.w2v_scale_to);
    init_embeddings_from_w2v(model, E, table.set61);
  }

  experiment_outcome out;
  out.train = corrective_train(model, sched, table, log);
  out.per = evaluate_per(out.train.params, sched.validation, table);
  out.disp = compute_dispersion(phoneme_embedding_rows(out.train.params));
  out.row = cfg.set_label + "\t" + cfg.init + "\t" +
            std::to_string(cfg.stages.size()) + "\t" + format_real(out.per, 6) +
            "\t" + format_real(out.disp.cos, 6) + "\t" +
            format_real(out.disp.m_dist, 6) + "\t" + format_real(out.disp.cov, 6) +
            "\t" + format_real(out.disp.p_dist, 6);
  return out;
}

// Appends one row, writing the column header only when the file starts
// empty.  The file is append-only so comparison rows accumulate across runs.
inline void append_result_row(const std::string &path, const std::string &row) {
  bool fresh = true;
  {
    std::ifstream probe(path, std::ios::binary);
    fresh = !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
  }
  std::ofstream out(path, std::ios::binary | std::ios::app);
  require(static_cast<bool>(out), errc::io_error, "cannot write " + path);
  if (fresh) out << kResultsHeader << "\n";
  out << row << "\n";
  require(static_cast<bool>(out), errc::io_error, "short write to " + path);
}

// Config-file entry point used by the command line.  Prints the
// reproducibility header, per-epoch progress and the final row to `out`;
// diagnostics go to `err`.
inline int run_experiment(const std::string &config_path, std::ostream &out,
                          std::ostream &err,
                          const uint64_t *seed_override = nullptr) {
  try {
    auto text = detail::read_file_bytes(config_path);
    auto cfg = parse_experiment_config(text, seed_override);
    require(!cfg.results.empty(), errc::config_error, "missing key 'results'");
    out << repro_header(cfg.seed, cfg.text_hash);
    auto res = run_experiment_config(cfg, &out);
    append_result_row(cfg.results, res.row);
    out << kResultsHeader << "\n" << res.row << "\n";
    return 0;
  } catch (const error &e) {
    err << "error: " << e.what() << "\n";
    return e.code() == errc::usage_error ? 1 : 2;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

inline int run_experiment(const std::string &config_path) {
  return run_experiment(config_path, std::cout, std::cerr);
}

}  // namespace phonseq

#endif  // PHONSEQ_EXPERIMENT_HPP_
