/* Copyright 2026 The AMTNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef AMT_WAV_HPP_
#define AMT_WAV_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "amt/common.hpp"
#include "amt/waveform.hpp"

namespace amt {

// RIFF/WAVE reader and writer covering the subset that hydrophone corpora
// use in practice: PCM 16/24-bit and IEEE float32, any channel count.

struct WavData {
  std::vector<std::vector<double>> channels;  // [-1, 1] nominal range
  double sample_rate = 0.0;
};

namespace wav_detail {

inline std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace wav_detail

inline WavData read_wav(const std::string& path) {
  require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IngestError("not a RIFF/WAVE file: " + path);

  using wav_detail::read_u16;
  using wav_detail::read_u32;

  std::uint16_t format = 0, n_channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t len = read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) throw IngestError("truncated chunk in " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw IngestError("bad fmt chunk in " + path);
      format = read_u16(bytes.data() + body);
      n_channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == 0xFFFE && len >= 40)  // WAVE_FORMAT_EXTENSIBLE
        format = read_u16(bytes.data() + body + 24);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }

  if (!data || n_channels == 0 || rate == 0)
    throw IngestError("missing fmt/data chunk in " + path);
  const bool pcm = format == 1;
  const bool ieee = format == 3;
  if (!((pcm && (bits == 16 || bits == 24)) || (ieee && bits == 32)))
    throw IngestError("unsupported WAV encoding (format " + std::to_string(format) +
                      ", " + std::to_string(bits) + " bits) in " + path);

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_size = bytes_per_sample * n_channels;
  const std::size_t n_frames = data_len / frame_size;

  WavData out;
  out.sample_rate = static_cast<double>(rate);
  out.channels.assign(n_channels, std::vector<double>(n_frames));
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::uint8_t* frame = data + f * frame_size;
    for (std::size_t c = 0; c < n_channels; ++c) {
      const std::uint8_t* s = frame + c * bytes_per_sample;
      double v = 0.0;
      if (pcm && bits == 16) {
        const auto raw = static_cast<std::int16_t>(s[0] | (s[1] << 8));
        v = static_cast<double>(raw) / 32768.0;
      } else if (pcm && bits == 24) {
        std::int32_t raw = s[0] | (s[1] << 8) | (s[2] << 16);
        if (raw & 0x800000) raw |= ~0xFFFFFF;  // sign extend
        v = static_cast<double>(raw) / 8388608.0;
      } else {  // float32
        float fv;
        std::memcpy(&fv, s, 4);
        v = static_cast<double>(fv);
      }
      out.channels[c][f] = v;
    }
  }
  return out;
}

// Multichannel recordings keep only the channel with the highest sound level.
inline Waveform select_loudest_channel(const WavData& wav) {
  if (wav.channels.empty()) throw IngestError("WAV has no channels");
  std::size_t best = 0;
  double best_rms = -1.0;
  for (std::size_t c = 0; c < wav.channels.size(); ++c) {
    double acc = 0.0;
    for (double v : wav.channels[c]) acc += v * v;
    const double rms = wav.channels[c].empty() ? 0.0 : acc / wav.channels[c].size();
    if (rms > best_rms) {
      best_rms = rms;
      best = c;
    }
  }
  return Waveform(wav.channels[best], wav.sample_rate);
}

inline Waveform read_wav_mono(const std::string& path) {
  return select_loudest_channel(read_wav(path));
}

// Writes IEEE float32 WAV (one or more channels).
inline void write_wav_float32(const std::string& path,
                              const std::vector<std::vector<double>>& channels,
                              double sample_rate) {
  require_little_endian();
  if (channels.empty() || channels[0].empty()) throw InvalidInput("empty WAV write");
  const std::uint16_t n_channels = static_cast<std::uint16_t>(channels.size());
  const std::uint32_t n_frames = static_cast<std::uint32_t>(channels[0].size());
  for (const auto& ch : channels)
    if (ch.size() != n_frames) throw InvalidInput("channel length mismatch");

  const std::uint32_t byte_rate = static_cast<std::uint32_t>(sample_rate) * n_channels * 4;
  const std::uint32_t data_len = n_frames * n_channels * 4;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto put_u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };

  out.write("RIFF", 4);
  put_u32(36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(3);  // IEEE float
  put_u16(n_channels);
  put_u32(static_cast<std::uint32_t>(sample_rate));
  put_u32(byte_rate);
  put_u16(static_cast<std::uint16_t>(n_channels * 4));
  put_u16(32);
  out.write("data", 4);
  put_u32(data_len);
  for (std::uint32_t f = 0; f < n_frames; ++f)
    for (std::uint16_t c = 0; c < n_channels; ++c) {
      const float v = static_cast<float>(channels[c][f]);
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
  if (!out) throw IoError("short write to " + path);
}

inline void write_wav_pcm16(const std::string& path,
                            const std::vector<std::vector<double>>& channels,
                            double sample_rate) {
  require_little_endian();
  if (channels.empty() || channels[0].empty()) throw InvalidInput("empty WAV write");
  const std::uint16_t n_channels = static_cast<std::uint16_t>(channels.size());
  const std::uint32_t n_frames = static_cast<std::uint32_t>(channels[0].size());
  const std::uint32_t data_len = n_frames * n_channels * 2;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto put_u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };

  out.write("RIFF", 4);
  put_u32(36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(n_channels);
  put_u32(static_cast<std::uint32_t>(sample_rate));
  put_u32(static_cast<std::uint32_t>(sample_rate) * n_channels * 2);
  put_u16(static_cast<std::uint16_t>(n_channels * 2));
  put_u16(16);
  out.write("data", 4);
  put_u32(data_len);
  for (std::uint32_t f = 0; f < n_frames; ++f)
    for (std::uint16_t c = 0; c < n_channels; ++c) {
      double v = channels[c][f];
      v = std::max(-1.0, std::min(1.0, v));
      // Same 1/32768 scale the reader uses, clamped at the positive rail.
      const auto wide = std::lround(v * 32768.0);
      const auto raw = static_cast<std::int16_t>(std::min(wide, 32767L));
      out.write(reinterpret_cast<const char*>(&raw), 2);
    }
  if (!out) throw IoError("short write to " + path);
}

}  // namespace amt

#endif  // AMT_WAV_HPP_
