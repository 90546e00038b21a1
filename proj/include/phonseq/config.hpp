// phonseq/config.hpp

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

// Flat "key = value" experiment configuration.  One assignment per line, '#'
// starts a comment, blank lines are skipped.  Stage keys carry a 1-based
// prefix (stage1_lr, stage2_epochs, ...).  Every key must be recognized, so
// a typo fails loudly instead of silently using a default.

#ifndef PHONSEQ_CONFIG_HPP_
#define PHONSEQ_CONFIG_HPP_

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "phonseq/train.hpp"
#include "phonseq/word2vec.hpp"

namespace phonseq {

// Raw key/value view of a config file.  Getters record which keys were
// consumed; require_all_used() then rejects leftovers as unknown keys.
struct kv_config {
  std::vector<std::pair<std::string, std::string>> entries;  // file order
  std::unordered_map<std::string, size_t> index;
  mutable std::unordered_set<std::string> used;

  bool has(const std::string &key) const { return index.count(key) != 0; }

  const std::string &get(const std::string &key) const {
    auto it = index.find(key);
    require(it != index.end(), errc::config_error, "missing key '" + key + "'");
    used.insert(key);
    return entries[it->second].second;
  }

  std::string get_string(const std::string &key, const std::string &def) const {
    return has(key) ? get(key) : def;
  }

  double get_real(const std::string &key) const {
    const std::string &v = get(key);
    size_t pos = 0;
    double x = 0.0;
    try {
      x = std::stod(v, &pos);
    } catch (const std::exception &) {
      fail(errc::config_error, "key '" + key + "': '" + v + "' is not a number");
    }
    require(pos == v.size(), errc::config_error,
            "key '" + key + "': trailing junk in '" + v + "'");
    return x;
  }
  double get_real(const std::string &key, double def) const {
    return has(key) ? get_real(key) : def;
  }

  uint64_t get_int(const std::string &key) const {
    const std::string &v = get(key);
    size_t pos = 0;
    uint64_t x = 0;
    try {
      x = std::stoull(v, &pos);
    } catch (const std::exception &) {
      fail(errc::config_error, "key '" + key + "': '" + v + "' is not an integer");
    }
    require(pos == v.size(), errc::config_error,
            "key '" + key + "': trailing junk in '" + v + "'");
    return x;
  }
  uint64_t get_int(const std::string &key, uint64_t def) const {
    return has(key) ? get_int(key) : def;
  }

  bool get_bool(const std::string &key, bool def) const {
    if (!has(key)) return def;
    const std::string &v = get(key);
    if (v == "true") return true;
    if (v == "false") return false;
    fail(errc::config_error, "key '" + key + "': expected true or false, got '" + v + "'");
  }

  void require_all_used() const {
    for (const auto &[key, value] : entries)
      require(used.count(key) != 0, errc::config_error, "unknown key '" + key + "'");
  }
};

inline kv_config parse_kv_config(const std::string &text) {
  kv_config cfg;
  std::istringstream is(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_comment(line);
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    require(eq != std::string::npos, errc::config_error,
            "config line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), errc::config_error,
            "config line " + std::to_string(lineno) + ": empty key");
    require(!value.empty(), errc::config_error,
            "config line " + std::to_string(lineno) + ": key '" + key + "' has no value");
    require(cfg.index.emplace(key, cfg.entries.size()).second, errc::config_error,
            "duplicate key '" + key + "'");
    cfg.entries.emplace_back(std::move(key), std::move(value));
  }
  return cfg;
}

// A dataset on disk: binary feature archive plus transcript text.
struct dataset_files {
  std::string features;
  std::string transcripts;
};

struct stage_spec {
  dataset_files data;
  bool inverse_map = false;
  bool resample_each_epoch = true;
  train_config config;
};

// Everything run_experiment needs, decoded and validated.  text_hash is the
// fingerprint of the raw config bytes, reported in the reproducibility
// header.
struct experiment_config {
  std::string set_label;
  std::string fwd_map;
  std::string inv_map;
  std::string init;  // "random" or "w2v"
  uint64_t seed = 0;
  size_t hidden = 32;
  size_t embed = 32;
  size_t layers = 2;
  w2v_config w2v;            // dim is forced to embed
  double w2v_scale_to = 0.0; // 0 disables scale adaptation
  std::vector<stage_spec> stages;
  dataset_files val;
  std::string results;  // may be empty; run_experiment requires it
  uint64_t text_hash = 0;
};

// seed_override, when given, replaces the config's seed before the dependent
// defaults (w2v_seed, stage seeds) are resolved.  The reported hash covers
// the config text and the effective seed, so a rerun is identical iff both
// match.
inline experiment_config parse_experiment_config(const std::string &text,
                                                 const uint64_t *seed_override = nullptr) {
  kv_config kv = parse_kv_config(text);
  experiment_config ec;

  ec.set_label = kv.get("phoneme_set");
  ec.fwd_map = kv.get("fwd_map");
  ec.inv_map = kv.get("inv_map");
  ec.init = kv.get("init");
  require(ec.init == "random" || ec.init == "w2v", errc::config_error,
          "key 'init': expected random or w2v, got '" + ec.init + "'");
  ec.seed = kv.get_int("seed", 0);
  if (seed_override) ec.seed = *seed_override;
  ec.text_hash = fnv1a64("seed:" + std::to_string(ec.seed), fnv1a64(text));
  ec.hidden = kv.get_int("hidden", 32);
  ec.embed = kv.get_int("embed", 32);
  ec.layers = kv.get_int("layers", 2);
  require(ec.hidden >= 1 && ec.embed >= 1 && ec.layers >= 1, errc::config_error,
          "hidden, embed and layers must be >= 1");

  std::string algo = kv.get_string("w2v_algo", "skipgram");
  if (algo == "skipgram") {
    ec.w2v.algorithm = w2v_algo::skipgram;
  } else if (algo == "cbow") {
    ec.w2v.algorithm = w2v_algo::cbow;
  } else {
    fail(errc::config_error, "key 'w2v_algo': expected skipgram or cbow, got '" + algo + "'");
  }
  ec.w2v.window = kv.get_int("w2v_window", 3);
  ec.w2v.negatives = kv.get_int("w2v_negatives", 5);
  ec.w2v.lr = kv.get_real("w2v_lr", 0.025);
  ec.w2v.epochs = kv.get_int("w2v_epochs", 50);
  ec.w2v.dim = ec.embed;
  ec.w2v.seed = kv.get_int("w2v_seed", ec.seed);
  ec.w2v.validate();
  ec.w2v_scale_to = kv.get_real("w2v_scale_to", 0.0);
  require(ec.w2v_scale_to >= 0.0, errc::config_error, "key 'w2v_scale_to': must be >= 0");

  uint64_t n_stages = kv.get_int("stages");
  require(n_stages >= 1 && n_stages <= 32, errc::config_error,
          "key 'stages': expected 1..32 stages");
  for (uint64_t i = 1; i <= n_stages; ++i) {
    std::string p = "stage" + std::to_string(i) + "_";
    stage_spec st;
    st.data.features = kv.get(p + "features");
    st.data.transcripts = kv.get(p + "transcripts");
    st.inverse_map = kv.get_bool(p + "inverse", false);
    st.resample_each_epoch = kv.get_bool(p + "resample", true);
    st.config.lr = kv.get_real(p + "lr", st.config.lr);
    st.config.lr_decay = kv.get_real(p + "lr_decay", st.config.lr_decay);
    st.config.epochs = kv.get_int(p + "epochs", st.config.epochs);
    st.config.batch_size = kv.get_int(p + "batch", st.config.batch_size);
    st.config.sampling_p = kv.get_real(p + "sampling", st.config.sampling_p);
    st.config.grad_clip = kv.get_real(p + "clip", st.config.grad_clip);
    st.config.seed = kv.get_int(p + "seed", ec.seed);
    st.config.validate();
    ec.stages.push_back(std::move(st));
  }

  ec.val.features = kv.get("val_features");
  ec.val.transcripts = kv.get("val_transcripts");
  ec.results = kv.get_string("results", "");

  kv.require_all_used();
  return ec;
}

}  // namespace phonseq

#endif  // PHONSEQ_CONFIG_HPP_
