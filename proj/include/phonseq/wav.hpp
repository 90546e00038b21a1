// phonseq/wav.hpp

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

// Minimal 16-bit PCM mono WAV reader/writer.

#ifndef PHONSEQ_WAV_HPP_
#define PHONSEQ_WAV_HPP_

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "phonseq/common.hpp"

namespace phonseq {

struct waveform {
  uint32_t sample_rate = 0;
  std::vector<float> samples;  // [-1, 1)
};

namespace detail {

inline uint32_t read_u32le_bytes(const unsigned char *p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline uint16_t read_u16le_bytes(const unsigned char *p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

inline waveform parse_wav_pcm16(const std::vector<unsigned char> &bytes) {
  using detail::read_u16le_bytes;
  using detail::read_u32le_bytes;
  require(bytes.size() >= 12, errc::truncated_file, "wav: too short for RIFF header");
  require(std::string(bytes.begin(), bytes.begin() + 4) == "RIFF" &&
              std::string(bytes.begin() + 8, bytes.begin() + 12) == "WAVE",
          errc::bad_magic, "wav: not a RIFF/WAVE file");

  waveform wav;
  bool got_fmt = false, got_data = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    std::string chunk(bytes.begin() + pos, bytes.begin() + pos + 4);
    uint32_t size = read_u32le_bytes(&bytes[pos + 4]);
    pos += 8;
    require(pos + size <= bytes.size(), errc::truncated_file,
            "wav: chunk '" + chunk + "' truncated");
    if (chunk == "fmt ") {
      require(size >= 16, errc::parse_error, "wav: fmt chunk too small");
      uint16_t format = read_u16le_bytes(&bytes[pos]);
      uint16_t channels = read_u16le_bytes(&bytes[pos + 2]);
      uint32_t rate = read_u32le_bytes(&bytes[pos + 4]);
      uint16_t bits = read_u16le_bytes(&bytes[pos + 14]);
      require(format == 1, errc::parse_error, "wav: only PCM supported");
      require(channels == 1, errc::parse_error, "wav: only mono supported");
      require(bits == 16, errc::parse_error, "wav: only 16-bit supported");
      wav.sample_rate = rate;
      got_fmt = true;
    } else if (chunk == "data") {
      wav.samples.reserve(size / 2);
      for (size_t i = 0; i + 1 < size; i += 2) {
        int16_t s = static_cast<int16_t>(read_u16le_bytes(&bytes[pos + i]));
        wav.samples.push_back(static_cast<float>(s) / 32768.0f);
      }
      got_data = true;
    }
    pos += size + (size & 1);  // chunks are word-aligned
  }
  require(got_fmt && got_data, errc::parse_error, "wav: missing fmt or data chunk");
  return wav;
}

inline waveform read_wav_pcm16(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), errc::io_error, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return parse_wav_pcm16(bytes);
}

inline std::vector<unsigned char> encode_wav_pcm16(const waveform &wav) {
  auto push_u32 = [](std::vector<unsigned char> &v, uint32_t x) {
    v.push_back(x & 0xff);
    v.push_back((x >> 8) & 0xff);
    v.push_back((x >> 16) & 0xff);
    v.push_back((x >> 24) & 0xff);
  };
  auto push_u16 = [](std::vector<unsigned char> &v, uint16_t x) {
    v.push_back(x & 0xff);
    v.push_back((x >> 8) & 0xff);
  };
  std::vector<unsigned char> out;
  uint32_t data_size = static_cast<uint32_t>(wav.samples.size() * 2);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  push_u32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  push_u32(out, 16);
  push_u16(out, 1);  // PCM
  push_u16(out, 1);  // mono
  push_u32(out, wav.sample_rate);
  push_u32(out, wav.sample_rate * 2);
  push_u16(out, 2);
  push_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  push_u32(out, data_size);
  for (float s : wav.samples) {
    double clipped = std::max(-1.0, std::min(1.0 - 1.0 / 32768.0, static_cast<double>(s)));
    int16_t q = static_cast<int16_t>(std::lround(clipped * 32768.0));
    push_u16(out, static_cast<uint16_t>(q));
  }
  return out;
}

inline void write_wav_pcm16(const waveform &wav, const std::string &path) {
  auto bytes = encode_wav_pcm16(wav);
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), errc::io_error, "cannot write " + path);
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace phonseq

#endif  // PHONSEQ_WAV_HPP_
