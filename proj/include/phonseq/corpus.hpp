// phonseq/corpus.hpp

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

// Utterances, synthetic desk-scale datasets, and the binary feature archive.

#ifndef PHONSEQ_CORPUS_HPP_
#define PHONSEQ_CORPUS_HPP_

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "phonseq/mat.hpp"
#include "phonseq/phoneme_map.hpp"

namespace phonseq {

struct utterance {
  std::string id;
  matf features;  // T x D
  std::vector<std::string> transcript;

  bool operator==(const utterance &o) const {
    return id == o.id && features == o.features && transcript == o.transcript;
  }
};

// ---- synthetic data ---------------------------------------------------------

struct synth_spec {
  phoneme_set phonemes;
  size_t utterance_count = 0;
  size_t len_min = 3, len_max = 8;   // phonemes per utterance
  size_t dur_min = 2, dur_max = 4;   // frames per phoneme
  double noise_sigma = 0.0;
  size_t feature_dim = 20;
  // Alternating-group transcripts instead of uniform ones; see
  // alternating_transcript.
  bool alternating = false;

  void validate() const {
    require(!phonemes.symbols.empty(), errc::empty_set, "synth needs a phoneme set");
    require(!alternating || phonemes.size() >= 2, errc::empty_set,
            "alternation needs >= 2 symbols");
    require(len_min >= 1 && len_min <= len_max, errc::usage_error, "bad length range");
    require(dur_min >= 1 && dur_min <= dur_max, errc::usage_error, "bad duration range");
    require(noise_sigma >= 0.0, errc::usage_error, "noise_sigma must be >= 0");
    require(feature_dim >= 1, errc::usage_error, "feature_dim must be >= 1");
  }
};

// One fixed random prototype vector per phoneme, row order = set order.
inline matd make_prototypes(const phoneme_set &set, size_t dim, rng &gen) {
  matd protos(set.size(), dim);
  for (auto &x : protos.data) x = gen.normal();
  return protos;
}

// Features for a given transcript: each phoneme's prototype repeated for a
// random duration with gaussian noise on every cell.
inline utterance synth_utterance(const std::string &id,
                                 const std::vector<std::string> &transcript,
                                 const phoneme_set &set, const matd &protos,
                                 size_t dur_min, size_t dur_max, double noise_sigma,
                                 rng &gen) {
  utterance utt;
  utt.id = id;
  utt.transcript = transcript;
  std::vector<size_t> durs(transcript.size());
  size_t total = 0;
  for (size_t i = 0; i < transcript.size(); ++i) {
    durs[i] = dur_min + gen.uniform_index(dur_max - dur_min + 1);
    total += durs[i];
  }
  utt.features = matf(total, protos.cols);
  size_t t = 0;
  for (size_t i = 0; i < transcript.size(); ++i) {
    const double *proto = protos.row(set.id(transcript[i]));
    for (size_t d = 0; d < durs[i]; ++d, ++t)
      for (size_t f = 0; f < protos.cols; ++f)
        utt.features(t, f) =
            static_cast<float>(proto[f] + noise_sigma * gen.normal());
  }
  return utt;
}

// Transcript whose adjacent symbols come from opposite halves of the set.
// Uniform transcripts carry no co-occurrence statistics, so embedding
// pretraining has nothing to learn from them; the alternation gives a bigram
// structure while keeping every symbol reachable.
inline std::vector<std::string> alternating_transcript(const phoneme_set &set,
                                                       size_t len, rng &gen) {
  require(set.size() >= 2, errc::empty_set, "alternation needs >= 2 symbols");
  size_t half = set.size() / 2;
  std::vector<std::string> out(len);
  size_t group = gen.uniform_index(2);
  for (auto &p : out) {
    size_t lo = group ? half : 0;
    size_t hi = group ? set.size() : half;
    p = set.symbols[lo + gen.uniform_index(hi - lo)];
    group ^= 1;
  }
  return out;
}

// Random phoneme strings over the spec's set, with prototype features.
// Deterministic given the generator state.
inline std::vector<utterance> synth_dataset(const synth_spec &spec, rng &gen) {
  spec.validate();
  matd protos = make_prototypes(spec.phonemes, spec.feature_dim, gen);
  std::vector<utterance> out;
  out.reserve(spec.utterance_count);
  for (size_t u = 0; u < spec.utterance_count; ++u) {
    size_t len = spec.len_min + gen.uniform_index(spec.len_max - spec.len_min + 1);
    std::vector<std::string> transcript;
    if (spec.alternating) {
      transcript = alternating_transcript(spec.phonemes, len, gen);
    } else {
      transcript.resize(len);
      for (auto &p : transcript)
        p = spec.phonemes.symbols[gen.uniform_index(spec.phonemes.size())];
    }
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%05zu", u);
    out.push_back(synth_utterance(id, transcript, spec.phonemes, protos,
                                  spec.dur_min, spec.dur_max, spec.noise_sigma, gen));
  }
  return out;
}

// ---- binary feature archive -------------------------------------------------
//
// Little-endian layout: magic "FBNK", u32 version=1, u32 count; per
// utterance: u16 id-length, utf-8 id bytes, u32 T, u32 D, then T*D f32
// row-major.  Transcripts travel in the sibling text format below.

namespace detail {

inline void put_u16(std::string &out, uint16_t x) {
  out.push_back(static_cast<char>(x & 0xff));
  out.push_back(static_cast<char>((x >> 8) & 0xff));
}
inline void put_u32(std::string &out, uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}
inline void put_u64(std::string &out, uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}
inline void put_f32(std::string &out, float x) { put_u32(out, std::bit_cast<uint32_t>(x)); }
inline void put_f64(std::string &out, double x) { put_u64(out, std::bit_cast<uint64_t>(x)); }

class byte_reader {
 public:
  byte_reader(const std::string &buf, std::string what)
      : buf_(buf), what_(std::move(what)) {}

  void need(size_t n) {
    require(pos_ + n <= buf_.size(), errc::truncated_file, what_ + ": truncated");
  }
  uint16_t u16() {
    need(2);
    uint16_t x = static_cast<uint16_t>(static_cast<unsigned char>(buf_[pos_]) |
                                       (static_cast<unsigned char>(buf_[pos_ + 1]) << 8));
    pos_ += 2;
    return x;
  }
  uint32_t u32() {
    need(4);
    uint32_t x = 0;
    for (int i = 0; i < 4; ++i)
      x |= static_cast<uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return x;
  }
  uint64_t u64() {
    need(8);
    uint64_t x = 0;
    for (int i = 0; i < 8; ++i)
      x |= static_cast<uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return x;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  size_t pos() const { return pos_; }
  size_t remaining() const { return buf_.size() - pos_; }

 private:
  const std::string &buf_;
  std::string what_;
  size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), errc::io_error, "cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return buf;
}

inline void write_file_bytes(const std::string &path, const std::string &buf) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), errc::io_error, "cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(static_cast<bool>(out), errc::io_error, "short write to " + path);
}

}  // namespace detail

inline constexpr uint32_t kArchiveVersion = 1;

inline void write_archive(const std::vector<utterance> &utts, const std::string &path) {
  require(!utts.empty(), errc::empty_corpus, "archive needs at least one utterance");
  std::string buf;
  buf += "FBNK";
  detail::put_u32(buf, kArchiveVersion);
  detail::put_u32(buf, static_cast<uint32_t>(utts.size()));
  for (const auto &u : utts) {
    require(u.id.size() <= 0xffff, errc::usage_error, "utterance id too long");
    detail::put_u16(buf, static_cast<uint16_t>(u.id.size()));
    buf += u.id;
    detail::put_u32(buf, static_cast<uint32_t>(u.features.rows));
    detail::put_u32(buf, static_cast<uint32_t>(u.features.cols));
    for (float x : u.features.data) detail::put_f32(buf, x);
  }
  detail::write_file_bytes(path, buf);
}

inline std::vector<utterance> read_archive(const std::string &path) {
  std::string buf = detail::read_file_bytes(path);
  detail::byte_reader r(buf, path);
  require(r.bytes(4) == "FBNK", errc::bad_magic, path + ": not a feature archive");
  uint32_t version = r.u32();
  require(version == kArchiveVersion, errc::version_mismatch,
          path + ": archive version " + std::to_string(version));
  uint32_t count = r.u32();
  std::vector<utterance> out(count);
  for (auto &u : out) {
    u.id = r.bytes(r.u16());
    uint32_t T = r.u32(), D = r.u32();
    u.features = matf(T, D);
    for (auto &x : u.features.data) x = r.f32();
  }
  return out;
}

// ---- transcript text format ---------------------------------------------
//
// One utterance per line: "id<TAB>ph1 ph2 ...".

inline std::string format_transcripts(const std::vector<utterance> &utts) {
  std::string out;
  for (const auto &u : utts) out += u.id + "\t" + join(u.transcript, " ") + "\n";
  return out;
}

inline void write_transcripts(const std::vector<utterance> &utts, const std::string &path) {
  detail::write_file_bytes(path, format_transcripts(utts));
}

struct transcript_entry {
  std::string id;
  std::vector<std::string> phones;
};

inline std::vector<transcript_entry> parse_transcripts(const std::string &text) {
  std::vector<transcript_entry> out;
  std::istringstream is(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto tab = line.find('\t');
    require(tab != std::string::npos, errc::malformed_line,
            "transcript line " + std::to_string(lineno) + ": missing tab");
    transcript_entry e;
    e.id = trim(line.substr(0, tab));
    require(!e.id.empty(), errc::malformed_line,
            "transcript line " + std::to_string(lineno) + ": empty id");
    e.phones = split_ws(line.substr(tab + 1));
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<transcript_entry> read_transcripts(const std::string &path) {
  return parse_transcripts(detail::read_file_bytes(path));
}

// Attaches transcripts to archive utterances by id.  Every utterance must be
// covered; extra transcript ids are rejected to catch file mix-ups.
inline void attach_transcripts(std::vector<utterance> &utts,
                               const std::vector<transcript_entry> &entries) {
  std::unordered_map<std::string, const transcript_entry *> by_id;
  for (const auto &e : entries)
    require(by_id.emplace(e.id, &e).second, errc::duplicate_symbol,
            "duplicate transcript id " + e.id);
  for (auto &u : utts) {
    auto it = by_id.find(u.id);
    require(it != by_id.end(), errc::missing_symbol, "no transcript for " + u.id);
    u.transcript = it->second->phones;
  }
}

}  // namespace phonseq

#endif  // PHONSEQ_CORPUS_HPP_
