// phonseq/phoneme_map.hpp

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

// Phoneme inventories, the deterministic 61->39 fold, and the seeded random
// 39->61 inverse mapping used to expand 39-phoneme transcripts into
// 61-phoneme training targets.

#ifndef PHONSEQ_PHONEME_MAP_HPP_
#define PHONSEQ_PHONEME_MAP_HPP_

#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "phonseq/common.hpp"

namespace phonseq {

inline constexpr const char *kSilSymbol = "sil";

// An ordered phoneme inventory.  Symbol order is file order; ids are dense.
struct phoneme_set {
  std::string name;
  std::vector<std::string> symbols;
  std::unordered_map<std::string, size_t> index;

  size_t size() const { return symbols.size(); }
  bool contains(const std::string &s) const { return index.count(s) != 0; }

  size_t id(const std::string &s) const {
    auto it = index.find(s);
    require(it != index.end(), errc::unknown_symbol,
            "phoneme '" + s + "' not in set " + name);
    return it->second;
  }
};

// Builds a phoneme_set from a list of symbols, checking the set invariants.
inline phoneme_set make_phoneme_set(const std::string &name,
                                    const std::vector<std::string> &symbols) {
  phoneme_set set;
  set.name = name;
  for (const auto &sym : symbols) {
    require(!sym.empty(), errc::malformed_line, "empty symbol in set " + name);
    for (char c : sym)
      require(c != ' ' && c != '\t', errc::malformed_line,
              "symbol contains whitespace: '" + sym + "'");
    require(set.index.emplace(sym, set.symbols.size()).second, errc::duplicate_symbol,
            "duplicate phoneme '" + sym + "' in set " + name);
    set.symbols.push_back(sym);
  }
  require(!set.symbols.empty(), errc::empty_set, "phoneme set " + name + " is empty");
  return set;
}

// One symbol per line, '#' starts a comment, blank lines skipped.
inline phoneme_set parse_phoneme_set(const std::string &text,
                                     const std::string &name = "phoneme-set") {
  std::vector<std::string> symbols;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    line = strip_comment(line);
    line = trim(line);
    if (line.empty()) continue;
    auto toks = split_ws(line);
    require(toks.size() == 1, errc::malformed_line,
            "expected one symbol per line, got '" + line + "'");
    symbols.push_back(toks[0]);
  }
  return make_phoneme_set(name, symbols);
}

// The 61<->39 mapping.  forward folds each 61 symbol to one 39 symbol;
// inverse lists, per 39 symbol, the candidate 61-sequences (length 1 or 2)
// it may expand to.
struct mapping_table {
  phoneme_set set61;
  phoneme_set set39;
  std::unordered_map<std::string, std::string> forward;
  // Keyed by 39 symbol; candidate order is file order (selection is uniform).
  std::map<std::string, std::vector<std::vector<std::string>>> inverse;
};

inline std::vector<std::string> strip_sil(const std::vector<std::string> &seq) {
  std::vector<std::string> out;
  out.reserve(seq.size());
  for (const auto &s : seq)
    if (s != kSilSymbol) out.push_back(s);
  return out;
}

// Per-symbol forward substitution, then adjacent "sil" runs collapsed to one.
inline std::vector<std::string> fold_61_to_39(const std::vector<std::string> &seq,
                                              const mapping_table &table) {
  std::vector<std::string> out;
  out.reserve(seq.size());
  for (const auto &sym : seq) {
    auto it = table.forward.find(sym);
    require(it != table.forward.end(), errc::unknown_symbol,
            "no forward mapping for '" + sym + "'");
    const std::string &folded = it->second;
    if (folded == kSilSymbol && !out.empty() && out.back() == kSilSymbol) continue;
    out.push_back(folded);
  }
  return out;
}

// Each 39 symbol is replaced by one uniformly chosen inverse candidate.
// Candidates of length 2 lengthen the sequence.  Deterministic given the
// generator state.
inline std::vector<std::string> inverse_map_39_to_61(const std::vector<std::string> &seq,
                                                     const mapping_table &table,
                                                     rng &gen) {
  std::vector<std::string> out;
  out.reserve(seq.size() + seq.size() / 2);
  for (const auto &sym : seq) {
    auto it = table.inverse.find(sym);
    require(it != table.inverse.end(), errc::unknown_symbol,
            "no inverse mapping for '" + sym + "'");
    const auto &cands = it->second;
    const auto &pick = cands[gen.uniform_index(cands.size())];
    out.insert(out.end(), pick.begin(), pick.end());
  }
  return out;
}

namespace detail {

// A candidate for 39 symbol p must fold back to p alone: after folding and
// deleting sil, exactly [p] remains.  Candidates of "sil" itself are the one
// place that rule cannot apply literally (deleting sil would leave nothing),
// so they must fold to pure silence instead.
inline bool candidate_folds_back(const std::string &p,
                                 const std::vector<std::string> &cand,
                                 const mapping_table &table) {
  auto folded = fold_61_to_39(cand, table);
  if (p == kSilSymbol) return folded.size() == 1 && folded[0] == kSilSymbol;
  auto kept = strip_sil(folded);
  return kept.size() == 1 && kept[0] == p;
}

}  // namespace detail

// fwd lines: "PH61<TAB>PH39".  inv lines: "PH39<TAB>cand(|cand)*" with
// space-separated 61 symbols inside each candidate.  Validates that every 61
// symbol is folded, every 39 symbol has candidates, and that every candidate
// folds back to its key.
inline mapping_table parse_mapping_table(const std::string &fwd_text,
                                         const std::string &inv_text,
                                         const phoneme_set &set61,
                                         const phoneme_set &set39) {
  mapping_table table;
  table.set61 = set61;
  table.set39 = set39;

  std::istringstream fis(fwd_text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(fis, line)) {
    ++lineno;
    line = strip_comment(line);
    if (trim(line).empty()) continue;
    auto toks = split_ws(line);
    require(toks.size() == 2, errc::malformed_line,
            "forward table line " + std::to_string(lineno) + ": expected 'PH61 PH39'");
    require(set61.contains(toks[0]), errc::unknown_symbol,
            "forward table line " + std::to_string(lineno) + ": '" + toks[0] +
                "' not a 61 symbol");
    require(set39.contains(toks[1]), errc::unknown_symbol,
            "forward table line " + std::to_string(lineno) + ": '" + toks[1] +
                "' not a 39 symbol");
    require(table.forward.emplace(toks[0], toks[1]).second, errc::duplicate_symbol,
            "forward table line " + std::to_string(lineno) + ": '" + toks[0] +
                "' mapped twice");
  }
  for (const auto &sym : set61.symbols)
    require(table.forward.count(sym) != 0, errc::missing_forward_entry,
            "61 symbol '" + sym + "' has no forward mapping");

  std::istringstream iis(inv_text);
  lineno = 0;
  while (std::getline(iis, line)) {
    ++lineno;
    line = strip_comment(line);
    if (trim(line).empty()) continue;
    auto tab = line.find('\t');
    require(tab != std::string::npos, errc::malformed_line,
            "inverse table line " + std::to_string(lineno) + ": missing tab");
    std::string key = trim(line.substr(0, tab));
    require(set39.contains(key), errc::unknown_symbol,
            "inverse table line " + std::to_string(lineno) + ": '" + key +
                "' not a 39 symbol");
    std::vector<std::vector<std::string>> cands;
    for (const auto &cand_text : split_on(trim(line.substr(tab + 1)), '|')) {
      auto cand = split_ws(cand_text);
      require(!cand.empty() && cand.size() <= 2, errc::malformed_line,
              "inverse table line " + std::to_string(lineno) +
                  ": candidates must have 1 or 2 symbols");
      for (const auto &c : cand)
        require(set61.contains(c), errc::unknown_symbol,
                "inverse table line " + std::to_string(lineno) + ": '" + c +
                    "' not a 61 symbol");
      cands.push_back(std::move(cand));
    }
    require(!cands.empty(), errc::malformed_line,
            "inverse table line " + std::to_string(lineno) + ": no candidates");
    require(table.inverse.emplace(key, std::move(cands)).second, errc::duplicate_symbol,
            "inverse table line " + std::to_string(lineno) + ": '" + key +
                "' listed twice");
  }
  for (const auto &sym : set39.symbols)
    require(table.inverse.count(sym) != 0, errc::malformed_line,
            "39 symbol '" + sym + "' has no inverse candidates");

  for (const auto &[key, cands] : table.inverse)
    for (const auto &cand : cands)
      require(detail::candidate_folds_back(key, cand, table), errc::bad_candidate,
              "candidate '" + join(cand, " ") + "' of '" + key +
                  "' does not fold back to it");
  return table;
}

// Builds a complete table from forward text alone.  The 61 set is the first
// column in file order, the 39 set the distinct second column, and each 39
// symbol's candidates are its preimages as single-symbol expansions, so every
// candidate folds back by construction.  Scoring needs only this; the
// two-symbol expansions (dcl d) exist only in a real inverse file.
inline mapping_table parse_forward_table(const std::string &fwd_text) {
  std::istringstream is(fwd_text);
  std::string line;
  size_t lineno = 0;
  std::vector<std::string> syms61, syms39;
  std::unordered_map<std::string, size_t> idx39;
  std::vector<std::pair<std::string, std::string>> pairs;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_comment(line);
    if (trim(line).empty()) continue;
    auto toks = split_ws(line);
    require(toks.size() == 2, errc::malformed_line,
            "forward table line " + std::to_string(lineno) + ": expected 'PH61 PH39'");
    syms61.push_back(toks[0]);
    if (idx39.emplace(toks[1], syms39.size()).second) syms39.push_back(toks[1]);
    pairs.emplace_back(toks[0], toks[1]);
  }
  mapping_table table;
  table.set61 = make_phoneme_set("fwd-61", syms61);
  table.set39 = make_phoneme_set("fwd-39", syms39);
  for (const auto &[p61, p39] : pairs) {
    table.forward.emplace(p61, p39);
    table.inverse[p39].push_back({p61});
  }
  return table;
}

// Pronunciation dictionary: word -> alternate phoneme sequences.
struct pron_dict {
  std::map<std::string, std::vector<std::vector<std::string>>> entries;
};

// Lines "WORD  PH1 PH2 ...".  "WORD(2)" merges into WORD's alternatives.
// Words are lower-cased; phoneme symbols are kept verbatim.
inline pron_dict parse_pron_dict(const std::string &text, const phoneme_set &set) {
  pron_dict dict;
  std::istringstream is(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_comment(line);
    if (trim(line).empty()) continue;
    auto toks = split_ws(line);
    require(toks.size() >= 2, errc::malformed_line,
            "line " + std::to_string(lineno) + ": expected 'WORD PH1 ...'");
    std::string word = to_lower(toks[0]);
    auto paren = word.find('(');
    if (paren != std::string::npos && word.back() == ')') word = word.substr(0, paren);
    require(!word.empty(), errc::malformed_line,
            "line " + std::to_string(lineno) + ": empty word");
    std::vector<std::string> phones(toks.begin() + 1, toks.end());
    for (const auto &p : phones)
      require(set.contains(p), errc::unknown_symbol,
              "line " + std::to_string(lineno) + ": unknown phoneme '" + p + "'");
    dict.entries[word].push_back(std::move(phones));
  }
  return dict;
}

// Concatenation of the first pronunciation of each word.
inline std::vector<std::string> transcribe_words(const std::vector<std::string> &words,
                                                 const pron_dict &dict) {
  std::vector<std::string> out;
  for (const auto &w : words) {
    auto it = dict.entries.find(to_lower(w));
    require(it != dict.entries.end(), errc::out_of_vocabulary,
            "word '" + w + "' not in dictionary");
    const auto &first = it->second.front();
    out.insert(out.end(), first.begin(), first.end());
  }
  return out;
}

}  // namespace phonseq

#endif  // PHONSEQ_PHONEME_MAP_HPP_
