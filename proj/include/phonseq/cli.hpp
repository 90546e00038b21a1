// phonseq/cli.hpp

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

// Single command-line entry point over the whole pipeline.  One subcommand
// per run, long-form flags only, unknown flags rejected.  Exit codes: 0 ok,
// 1 usage error, 2 data error.  Every command prints a reproducibility
// header (version, seed, config hash) before its output, and no command
// mutates its input files.

#ifndef PHONSEQ_CLI_HPP_
#define PHONSEQ_CLI_HPP_

#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "phonseq/decode.hpp"
#include "phonseq/experiment.hpp"
#include "phonseq/features.hpp"
#include "phonseq/wav.hpp"

namespace phonseq {

inline constexpr const char *kCliUsage =
    "usage: phonseq <command> --flag value ...\n"
    "commands:\n"
    "  prepare       wav list -> feature archive (fbank + deltas)\n"
    "  synth         generate a synthetic corpus\n"
    "  train-w2v     train phoneme embeddings on transcripts\n"
    "  embed-report  dispersion metrics of an embedding file\n"
    "  map           fold 61->39 or expand 39->61 transcripts\n"
    "  train-asr     run a training schedule, write a checkpoint\n"
    "  decode        greedy or beam decode a feature archive\n"
    "  score         fold and score hypotheses against references\n"
    "  experiment    full pipeline from a config file, append result row";

namespace detail {

struct cli_flags {
  std::map<std::string, std::string> values;
  std::set<std::string> on;

  bool has(const std::string &name) const { return values.count(name) != 0; }
  bool flag(const std::string &name) const { return on.count(name) != 0; }

  const std::string &value(const std::string &name) const {
    auto it = values.find(name);
    require(it != values.end(), errc::usage_error, "missing flag " + name);
    return it->second;
  }
  std::string value_or(const std::string &name, const std::string &def) const {
    return has(name) ? value(name) : def;
  }

  uint64_t u64(const std::string &name) const {
    const std::string &v = value(name);
    size_t pos = 0;
    uint64_t x = 0;
    try {
      x = std::stoull(v, &pos);
    } catch (const std::exception &) {
      fail(errc::usage_error, "flag " + name + ": '" + v + "' is not an integer");
    }
    require(pos == v.size(), errc::usage_error,
            "flag " + name + ": trailing junk in '" + v + "'");
    return x;
  }
  uint64_t u64_or(const std::string &name, uint64_t def) const {
    return has(name) ? u64(name) : def;
  }

  double real(const std::string &name) const {
    const std::string &v = value(name);
    size_t pos = 0;
    double x = 0.0;
    try {
      x = std::stod(v, &pos);
    } catch (const std::exception &) {
      fail(errc::usage_error, "flag " + name + ": '" + v + "' is not a number");
    }
    require(pos == v.size(), errc::usage_error,
            "flag " + name + ": trailing junk in '" + v + "'");
    return x;
  }
  double real_or(const std::string &name, double def) const {
    return has(name) ? real(name) : def;
  }

  uint64_t seed() const { return u64_or("--seed", 0); }
  size_t threads() const {
    uint64_t t = u64_or("--threads", 1);
    require(t >= 1, errc::usage_error, "flag --threads: must be >= 1");
    return static_cast<size_t>(t);
  }
};

// --seed and --threads are accepted everywhere so scripted pipelines can set
// them uniformly.
inline cli_flags parse_flags(const std::vector<std::string> &args,
                             std::set<std::string> valued,
                             const std::set<std::string> &switches = {}) {
  valued.insert("--seed");
  valued.insert("--threads");
  cli_flags f;
  for (size_t i = 0; i < args.size(); ++i) {
    const std::string &tok = args[i];
    require(tok.rfind("--", 0) == 0, errc::usage_error,
            "unexpected argument '" + tok + "'");
    if (switches.count(tok) != 0) {
      require(f.on.insert(tok).second, errc::usage_error, "duplicate flag " + tok);
      continue;
    }
    require(valued.count(tok) != 0, errc::usage_error, "unknown flag '" + tok + "'");
    require(i + 1 < args.size(), errc::usage_error, "flag " + tok + " needs a value");
    require(f.values.emplace(tok, args[i + 1]).second, errc::usage_error,
            "duplicate flag " + tok);
    ++i;
  }
  return f;
}

inline uint64_t argv_hash(const std::string &cmd, const std::vector<std::string> &args) {
  return fnv1a64(cmd + " " + join(args, " "));
}

inline int cmd_prepare(const std::vector<std::string> &args, std::ostream &out) {
  auto f = parse_flags(args, {"--wav-list", "--out", "--mel", "--frame-len",
                              "--frame-hop", "--delta-window"});
  f.threads();
  out << repro_header(f.seed(), argv_hash("prepare", args));

  feature_config fc;
  fc.n_mels = f.u64_or("--mel", fc.n_mels);
  fc.frame_len = f.real_or("--frame-len", fc.frame_len);
  fc.frame_hop = f.real_or("--frame-hop", fc.frame_hop);
  fc.delta_window = f.u64_or("--delta-window", fc.delta_window);

  auto list_text = detail::read_file_bytes(f.value("--wav-list"));
  std::istringstream is(list_text);
  std::string line;
  size_t lineno = 0;
  std::unordered_set<std::string> seen;
  std::vector<utterance> utts;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto tab = line.find('\t');
    require(tab != std::string::npos, errc::malformed_line,
            "wav list line " + std::to_string(lineno) + ": expected 'id<TAB>path'");
    std::string id = trim(line.substr(0, tab));
    std::string path = trim(line.substr(tab + 1));
    require(!id.empty() && !path.empty(), errc::malformed_line,
            "wav list line " + std::to_string(lineno) + ": empty id or path");
    require(seen.insert(id).second, errc::duplicate_symbol,
            "duplicate wav id " + id);
    waveform w = read_wav_pcm16(path);
    fc.sample_rate = static_cast<double>(w.sample_rate);
    fc.validate();
    utterance u;
    u.id = id;
    u.features = add_deltas(compute_fbank(w.samples, fc), fc.delta_window);
    utts.push_back(std::move(u));
  }
  write_archive(utts, f.value("--out"));
  out << "# wrote " << utts.size() << " utterances dim "
      << utts.front().features.cols << " to " << f.value("--out") << "\n";
  return 0;
}

inline int cmd_synth(const std::vector<std::string> &args, std::ostream &out) {
  auto f = parse_flags(args,
                       {"--set", "--count", "--val", "--out", "--noise",
                        "--feat-dim", "--len-min", "--len-max", "--dur-min",
                        "--dur-max"},
                       {"--alternating"});
  f.threads();
  out << repro_header(f.seed(), argv_hash("synth", args));

  synth_spec sp;
  sp.phonemes = parse_phoneme_set(detail::read_file_bytes(f.value("--set")), "synth-set");
  size_t count = static_cast<size_t>(f.u64("--count"));
  require(count >= 1, errc::usage_error, "flag --count: must be >= 1");
  size_t val = static_cast<size_t>(f.u64_or("--val", 0));
  sp.utterance_count = count + val;
  sp.noise_sigma = f.real_or("--noise", sp.noise_sigma);
  sp.feature_dim = f.u64_or("--feat-dim", sp.feature_dim);
  sp.len_min = f.u64_or("--len-min", sp.len_min);
  sp.len_max = f.u64_or("--len-max", sp.len_max);
  sp.dur_min = f.u64_or("--dur-min", sp.dur_min);
  sp.dur_max = f.u64_or("--dur-max", sp.dur_max);
  sp.alternating = f.flag("--alternating");

  rng gen(f.seed());
  auto utts = synth_dataset(sp, gen);
  std::vector<utterance> train(utts.begin(), utts.begin() + static_cast<long>(count));
  std::vector<utterance> vals(utts.begin() + static_cast<long>(count), utts.end());

  const std::string prefix = f.value("--out");
  write_archive(train, prefix + "_train.fbnk");
  write_transcripts(train, prefix + "_train.tsv");
  out << "# wrote " << train.size() << " train utterances to " << prefix
      << "_train.{fbnk,tsv}\n";
  if (val > 0) {
    write_archive(vals, prefix + "_val.fbnk");
    write_transcripts(vals, prefix + "_val.tsv");
    out << "# wrote " << vals.size() << " val utterances to " << prefix
        << "_val.{fbnk,tsv}\n";
  }
  return 0;
}

inline int cmd_train_w2v(const std::vector<std::string> &args, std::ostream &out) {
  auto f = parse_flags(args,
                       {"--corpus", "--out", "--dim", "--algo", "--window",
                        "--negatives", "--lr", "--epochs", "--scale-to"},
                       {"--select-min-cos"});
  f.threads();
  out << repro_header(f.seed(), argv_hash("train-w2v", args));

  phoneme_corpus pc;
  for (const auto &e : read_transcripts(f.value("--corpus"))) pc.push_back(e.phones);

  w2v_config wc;
  std::string algo = f.value_or("--algo", "skipgram");
  if (algo == "skipgram") {
    wc.algorithm = w2v_algo::skipgram;
  } else if (algo == "cbow") {
    wc.algorithm = w2v_algo::cbow;
  } else {
    fail(errc::usage_error, "flag --algo: expected skipgram or cbow, got '" + algo + "'");
  }
  wc.dim = f.u64_or("--dim", wc.dim);
  wc.window = f.u64_or("--window", wc.window);
  wc.negatives = f.u64_or("--negatives", wc.negatives);
  wc.lr = f.real_or("--lr", wc.lr);
  wc.epochs = f.u64_or("--epochs", wc.epochs);
  wc.seed = f.seed();
  wc.select_min_cos = f.flag("--select-min-cos");
  wc.validate();

  w2v_train_log lg;
  embedding_matrix E = train_embeddings(pc, wc, kW2vSpecials, &lg);
  for (size_t i = 0; i < lg.epoch_losses.size(); ++i)
    out << "epoch=" << (i + 1) << " loss=" << format_real(lg.epoch_losses[i], 6)
        << " cos=" << format_real(lg.epoch_cos[i], 6) << "\n";
  out << "# selected epoch " << lg.selected_epoch << "\n";
  if (f.has("--scale-to")) {
    double factor = scale_embeddings(E, f.real("--scale-to"));
    out << "# scaled rows by " << format_real(factor, 6) << "\n";
  }
  save_embeddings(E, f.value("--out"));
  out << "# wrote " << E.vocab.size() << " x " << E.dim << " embeddings to "
      << f.value("--out") << "\n";
  return 0;
}

inline int cmd_embed_report(const std::vector<std::string> &args, std::ostream &out) {
  auto f = parse_flags(args, {"--emb"}, {"--include-specials"});
  f.threads();
  out << repro_header(f.seed(), argv_hash("embed-report", args));
  embedding_matrix E = load_embeddings(f.value("--emb"));
  out << format_dispersion(compute_dispersion(E, !f.flag("--include-specials")))
      << "\n";
  return 0;
}

inline int cmd_map(const std::vector<std::string> &args, std::ostream &out) {
  auto f = parse_flags(args, {"--fwd", "--inv", "--in", "--out"}, {"--inverse"});
  f.threads();
  out << repro_header(f.seed(), argv_hash("map", args));

  auto entries = read_transcripts(f.value("--in"));
  std::string text;
  if (f.flag("--inverse")) {
    auto table = load_mapping_table(f.value("--fwd"), f.value("--inv"));
    rng gen(f.seed());
    for (const auto &e : entries)
      text += e.id + "\t" + join(inverse_map_39_to_61(e.phones, table, gen), " ") + "\n";
  } else {
    auto table = parse_forward_table(detail::read_file_bytes(f.value("--fwd")));
    for (const auto &e : entries)
      text += e.id + "\t" + join(fold_61_to_39(e.phones, table), " ") + "\n";
  }
  detail::write_file_bytes(f.value("--out"), text);
  out << "# mapped " << entries.size() << " transcripts to " << f.value("--out")
      << "\n";
  return 0;
}

inline int cmd_train_asr(const std::vector<std::string> &args, std::ostream &out) {
  auto f = parse_flags(args, {"--config", "--out"});
  f.threads();
  uint64_t seed_override = 0;
  const uint64_t *ov = nullptr;
  if (f.has("--seed")) {
    seed_override = f.u64("--seed");
    ov = &seed_override;
  }
  auto text = detail::read_file_bytes(f.value("--config"));
  auto ec = parse_experiment_config(text, ov);
  out << repro_header(ec.seed, ec.text_hash);
  auto outcome = run_experiment_config(ec, &out);
  save_checkpoint(outcome.train.final_state, f.value("--out"));
  out << "# final val per " << format_real(outcome.per, 6) << "\n";
  out << "# wrote checkpoint " << f.value("--out") << "\n";
  return 0;
}

inline int cmd_decode(const std::vector<std::string> &args, std::ostream &out) {
  auto f = parse_flags(args, {"--model", "--features", "--out", "--beam",
                              "--max-len", "--len-norm"});
  size_t threads = f.threads();
  out << repro_header(f.seed(), argv_hash("decode", args));

  train_state state = load_checkpoint(f.value("--model"));
  const model_params &p = state.best_params;
  auto utts = read_archive(f.value("--features"));
  size_t beam = static_cast<size_t>(f.u64_or("--beam", 1));
  require(beam >= 1, errc::usage_error, "flag --beam: must be >= 1");
  size_t max_len_flag = static_cast<size_t>(f.u64_or("--max-len", 0));
  double alpha = f.real_or("--len-norm", 0.0);

  std::vector<std::string> lines(utts.size());
  auto decode_range = [&](size_t begin, size_t end) {
    for (size_t u = begin; u < end; ++u) {
      size_t ml = max_len_flag ? max_len_flag : default_max_len(utts[u].features.rows);
      std::vector<size_t> ids =
          beam == 1 ? greedy_decode(p, utts[u].features, ml)
                    : beam_search(p, utts[u].features, beam, ml, alpha)
                          .front()
                          .surface(p.vocab);
      lines[u] = utts[u].id + "\t" + join(ids_to_symbols(p.vocab, ids), " ") + "\n";
    }
  };
  size_t n_threads = std::min(threads, utts.size());
  if (n_threads <= 1) {
    decode_range(0, utts.size());
  } else {
    std::vector<std::thread> pool;
    size_t chunk = (utts.size() + n_threads - 1) / n_threads;
    for (size_t t = 0; t < n_threads; ++t) {
      size_t begin = t * chunk;
      size_t end = std::min(begin + chunk, utts.size());
      if (begin < end) pool.emplace_back(decode_range, begin, end);
    }
    for (auto &th : pool) th.join();
  }

  std::string text;
  for (const auto &l : lines) text += l;
  detail::write_file_bytes(f.value("--out"), text);
  out << "# decoded " << utts.size() << " utterances to " << f.value("--out")
      << "\n";
  return 0;
}

inline int cmd_score(const std::vector<std::string> &args, std::ostream &out) {
  auto f = parse_flags(args, {"--refs", "--hyps", "--fwd"}, {"--strip-sil"});
  size_t threads = f.threads();
  out << repro_header(f.seed(), argv_hash("score", args));

  auto refs = read_transcripts(f.value("--refs"));
  auto hyps = read_transcripts(f.value("--hyps"));
  require(refs.size() == hyps.size(), errc::length_mismatch,
          std::to_string(refs.size()) + " refs vs " + std::to_string(hyps.size()) +
              " hyps");
  std::unordered_map<std::string, const transcript_entry *> by_id;
  for (const auto &h : hyps)
    require(by_id.emplace(h.id, &h).second, errc::duplicate_symbol,
            "duplicate hypothesis id " + h.id);
  std::vector<std::vector<std::string>> R, H;
  std::unordered_set<std::string> ref_ids;
  for (const auto &r : refs) {
    require(ref_ids.insert(r.id).second, errc::duplicate_symbol,
            "duplicate reference id " + r.id);
    auto it = by_id.find(r.id);
    require(it != by_id.end(), errc::missing_symbol, "no hypothesis for " + r.id);
    R.push_back(r.phones);
    H.push_back(it->second->phones);
  }

  auto table = parse_forward_table(detail::read_file_bytes(f.value("--fwd")));
  per_breakdown b = score_corpus(R, H, table, f.flag("--strip-sil"), threads);
  out << "S=" << b.substitutions << " D=" << b.deletions << " I=" << b.insertions
      << " ref_len=" << b.ref_len << "\n";
  char per[32];
  std::snprintf(per, sizeof(per), "%.2f", b.per());
  out << "PER=" << per << "%\n";
  return 0;
}

inline int cmd_experiment(const std::vector<std::string> &args, std::ostream &out,
                          std::ostream &err) {
  auto f = parse_flags(args, {"--config"});
  f.threads();
  uint64_t seed_override = 0;
  const uint64_t *ov = nullptr;
  if (f.has("--seed")) {
    seed_override = f.u64("--seed");
    ov = &seed_override;
  }
  return run_experiment(f.value("--config"), out, err, ov);
}

}  // namespace detail

inline int run(const std::vector<std::string> &args, std::ostream &out,
               std::ostream &err) {
  try {
    require(!args.empty(), errc::usage_error, kCliUsage);
    const std::string cmd = args[0];
    std::vector<std::string> rest(args.begin() + 1, args.end());
    if (cmd == "prepare") return detail::cmd_prepare(rest, out);
    if (cmd == "synth") return detail::cmd_synth(rest, out);
    if (cmd == "train-w2v") return detail::cmd_train_w2v(rest, out);
    if (cmd == "embed-report") return detail::cmd_embed_report(rest, out);
    if (cmd == "map") return detail::cmd_map(rest, out);
    if (cmd == "train-asr") return detail::cmd_train_asr(rest, out);
    if (cmd == "decode") return detail::cmd_decode(rest, out);
    if (cmd == "score") return detail::cmd_score(rest, out);
    if (cmd == "experiment") return detail::cmd_experiment(rest, out, err);
    fail(errc::usage_error, "unknown command '" + cmd + "'\n" + kCliUsage);
  } catch (const error &e) {
    err << "error: " << e.what() << "\n";
    return e.code() == errc::usage_error ? 1 : 2;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

inline int run(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace phonseq

#endif  // PHONSEQ_CLI_HPP_
