// phonseq/features.hpp

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

// Log-mel filterbank features with regression deltas.  40 static
// coefficients plus first and second derivatives give the 120-dim frames the
// recognizer consumes.

#ifndef PHONSEQ_FEATURES_HPP_
#define PHONSEQ_FEATURES_HPP_

#include <cmath>
#include <complex>
#include <vector>

#include "phonseq/mat.hpp"

namespace phonseq {

struct feature_config {
  double sample_rate = 16000.0;
  double frame_len = 0.025;
  double frame_hop = 0.010;
  size_t n_mels = 40;
  size_t delta_window = 2;
  double log_floor = 1e-10;

  void validate() const {
    require(sample_rate > 0, errc::usage_error, "sample_rate must be positive");
    require(frame_hop > 0 && frame_hop <= frame_len, errc::usage_error,
            "need 0 < frame_hop <= frame_len");
    require(n_mels >= 1, errc::usage_error, "n_mels must be >= 1");
    require(log_floor > 0, errc::usage_error, "log_floor must be positive");
  }
};

namespace detail {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

inline size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Iterative radix-2 FFT, in place.  Sizes are always powers of two here.
inline void fft_inplace(std::vector<std::complex<double>> &a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * M_PI / static_cast<double>(len);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (size_t k = 0; k < len / 2; ++k) {
        auto u = a[i + k];
        auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Triangular mel filters over FFT bins 0..nfft/2, spanning 0 Hz to Nyquist.
inline matd mel_filterbank(size_t n_mels, size_t nfft, double sample_rate) {
  const size_t n_bins = nfft / 2 + 1;
  matd filters(n_mels, n_bins, 0.0);
  const double mel_lo = 0.0;
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers_hz(n_mels + 2);
  for (size_t m = 0; m < n_mels + 2; ++m)
    centers_hz[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(m) /
                                           static_cast<double>(n_mels + 1));
  for (size_t m = 0; m < n_mels; ++m) {
    double lo = centers_hz[m], mid = centers_hz[m + 1], hi = centers_hz[m + 2];
    for (size_t k = 0; k < n_bins; ++k) {
      double hz = static_cast<double>(k) * sample_rate / static_cast<double>(nfft);
      double w = 0.0;
      if (hz >= lo && hz <= mid && mid > lo)
        w = (hz - lo) / (mid - lo);
      else if (hz > mid && hz <= hi && hi > mid)
        w = (hi - hz) / (hi - mid);
      filters(m, k) = w;
    }
  }
  return filters;
}

}  // namespace detail

// Center frequency (Hz) of mel bin m under the config's filterbank layout.
inline double mel_bin_center_hz(const feature_config &cfg, size_t m) {
  double mel_hi = detail::hz_to_mel(cfg.sample_rate / 2.0);
  return detail::mel_to_hz(mel_hi * static_cast<double>(m + 1) /
                           static_cast<double>(cfg.n_mels + 1));
}

// Frames the signal (Hann window), takes the magnitude-squared spectrum and
// applies the triangular mel filterbank; returns ln(max(energy, log_floor)),
// one row per frame.
inline matf compute_fbank(const std::vector<float> &samples, const feature_config &cfg) {
  cfg.validate();
  require(!samples.empty(), errc::too_short, "empty waveform");
  const size_t flen = static_cast<size_t>(std::lround(cfg.frame_len * cfg.sample_rate));
  const size_t hop = static_cast<size_t>(std::lround(cfg.frame_hop * cfg.sample_rate));
  require(flen >= 2 && hop >= 1, errc::usage_error, "frame too short");
  require(samples.size() >= flen, errc::too_short,
          "waveform shorter than one frame");
  const size_t n_frames = (samples.size() - flen) / hop + 1;
  const size_t nfft = detail::next_pow2(flen);
  const size_t n_bins = nfft / 2 + 1;

  std::vector<double> window(flen);
  for (size_t i = 0; i < flen; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                     static_cast<double>(flen - 1));

  matd filters = detail::mel_filterbank(cfg.n_mels, nfft, cfg.sample_rate);
  matf out(n_frames, cfg.n_mels);
  std::vector<std::complex<double>> buf(nfft);
  std::vector<double> power(n_bins);
  for (size_t t = 0; t < n_frames; ++t) {
    for (size_t i = 0; i < nfft; ++i)
      buf[i] = (i < flen)
                   ? std::complex<double>(static_cast<double>(samples[t * hop + i]) * window[i], 0.0)
                   : std::complex<double>(0.0, 0.0);
    detail::fft_inplace(buf);
    for (size_t k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
    for (size_t m = 0; m < cfg.n_mels; ++m) {
      double e = dot(filters.row(m), power.data(), n_bins);
      out(t, m) = static_cast<float>(std::log(std::max(e, cfg.log_floor)));
    }
  }
  return out;
}

// Regression deltas with window N; edge frames replicated.  Output columns
// are [static | delta | delta-delta], tripling the feature dimension.
inline matf add_deltas(const matf &feat, size_t delta_window = 2) {
  require(feat.rows >= 1, errc::usage_error, "add_deltas needs at least one frame");
  require(delta_window >= 1, errc::usage_error, "delta window must be >= 1");
  const size_t T = feat.rows, F = feat.cols;
  const long N = static_cast<long>(delta_window);
  double denom = 0.0;
  for (long n = 1; n <= N; ++n) denom += 2.0 * static_cast<double>(n * n);

  auto regress = [&](const matf &src, matf &dst) {
    for (size_t t = 0; t < T; ++t) {
      for (size_t f = 0; f < F; ++f) {
        double acc = 0.0;
        for (long n = 1; n <= N; ++n) {
          long hi = std::min<long>(static_cast<long>(t) + n, static_cast<long>(T) - 1);
          long lo = std::max<long>(static_cast<long>(t) - n, 0);
          acc += static_cast<double>(n) *
                 (static_cast<double>(src(static_cast<size_t>(hi), f)) -
                  static_cast<double>(src(static_cast<size_t>(lo), f)));
        }
        dst(t, f) = static_cast<float>(acc / denom);
      }
    }
  };

  matf d1(T, F), d2(T, F);
  regress(feat, d1);
  regress(d1, d2);
  matf out(T, 3 * F);
  for (size_t t = 0; t < T; ++t)
    for (size_t f = 0; f < F; ++f) {
      out(t, f) = feat(t, f);
      out(t, F + f) = d1(t, f);
      out(t, 2 * F + f) = d2(t, f);
    }
  return out;
}

}  // namespace phonseq

#endif  // PHONSEQ_FEATURES_HPP_
