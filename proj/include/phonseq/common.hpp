// phonseq/common.hpp

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

#ifndef PHONSEQ_COMMON_HPP_
#define PHONSEQ_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace phonseq {

inline constexpr const char *kVersion = "1.0.0";

// Error categories used across all modules.  A single exception type with a
// code keeps error handling testable without a per-module exception zoo.
enum class errc {
  duplicate_symbol,
  empty_set,
  unknown_symbol,
  missing_forward_entry,
  bad_candidate,
  malformed_line,
  out_of_vocabulary,
  too_short,
  bad_magic,
  truncated_file,
  version_mismatch,
  empty_corpus,
  header_mismatch,
  parse_error,
  dimension_mismatch,
  token_out_of_range,
  empty_transcript,
  stale_cache,
  missing_symbol,
  empty_stage,
  corrupt_payload,
  too_few_rows,
  singular_covariance,
  length_mismatch,
  usage_error,
  config_error,
  numeric_error,
  io_error,
};

inline const char *errc_name(errc c) {
  switch (c) {
    case errc::duplicate_symbol: return "DuplicateSymbol";
    case errc::empty_set: return "EmptySet";
    case errc::unknown_symbol: return "UnknownSymbol";
    case errc::missing_forward_entry: return "MissingForwardEntry";
    case errc::bad_candidate: return "BadCandidate";
    case errc::malformed_line: return "MalformedLine";
    case errc::out_of_vocabulary: return "OutOfVocabulary";
    case errc::too_short: return "TooShort";
    case errc::bad_magic: return "BadMagic";
    case errc::truncated_file: return "TruncatedFile";
    case errc::version_mismatch: return "VersionMismatch";
    case errc::empty_corpus: return "EmptyCorpus";
    case errc::header_mismatch: return "HeaderMismatch";
    case errc::parse_error: return "ParseError";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::token_out_of_range: return "TokenOutOfRange";
    case errc::empty_transcript: return "EmptyTranscript";
    case errc::stale_cache: return "StaleCache";
    case errc::missing_symbol: return "MissingSymbol";
    case errc::empty_stage: return "EmptyStage";
    case errc::corrupt_payload: return "CorruptPayload";
    case errc::too_few_rows: return "TooFewRows";
    case errc::singular_covariance: return "SingularCovariance";
    case errc::length_mismatch: return "LengthMismatch";
    case errc::usage_error: return "UsageError";
    case errc::config_error: return "ConfigError";
    case errc::numeric_error: return "NumericError";
    case errc::io_error: return "IoError";
  }
  return "UnknownError";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string &msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg),
        code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string &msg) {
  throw error(code, msg);
}

inline void require(bool cond, errc code, const std::string &msg) {
  if (!cond) fail(code, msg);
}

// Deterministic random source.  The mt19937_64 engine is fully specified by
// the standard; the derived draws below are implemented by hand so that
// sequences are identical on every platform (std distributions are not
// portable across library implementations).
class rng {
 public:
  explicit rng(uint64_t seed = 0) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform integer in [0, n), n >= 1.  Rejection sampling, exactly uniform.
  uint64_t uniform_index(uint64_t n) {
    require(n >= 1, errc::usage_error, "uniform_index needs n >= 1");
    if (n == 1) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform_real() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform_real(double lo, double hi) {
    return lo + (hi - lo) * uniform_real();
  }

  // Standard normal via Box-Muller.  No cached spare, so the engine state is
  // the whole rng state (keeps checkpoint round trips exact).
  double normal() {
    double u1 = 1.0 - uniform_real();  // (0, 1]
    double u2 = uniform_real();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
  }

  bool operator==(const rng &o) const { return eng_ == o.eng_; }

  // Engine state as text (the standard defines this serialization).
  std::string save_state() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
  }
  void load_state(const std::string &s) {
    std::istringstream is(s);
    is >> eng_;
    require(!is.fail(), errc::corrupt_payload, "bad rng state");
  }

 private:
  std::mt19937_64 eng_;
};

// ---- small string helpers -------------------------------------------------

// Strips a '#' comment.  The marker only counts at the start of the line or
// after whitespace, so symbols like "h#" survive.
inline std::string strip_comment(const std::string &line) {
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t'))
      return line.substr(0, i);
  }
  return line;
}

inline std::string trim(const std::string &s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(const std::string &s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline std::vector<std::string> split_on(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string to_lower(std::string s) {
  for (char &c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

inline std::string join(const std::vector<std::string> &v, const std::string &sep) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

inline uint64_t fnv1a64(const void *bytes, size_t n, uint64_t h = 1469598103934665603ull) {
  const unsigned char *p = static_cast<const unsigned char *>(bytes);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string &s, uint64_t h = 1469598103934665603ull) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::string format_real(double x, int digits = 10) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
  return buf;
}

}  // namespace phonseq

#endif  // PHONSEQ_COMMON_HPP_
