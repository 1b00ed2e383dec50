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

// Time-frequency features for underwater recordings: amplitude spectrogram,
// Mel spectrogram, and constant-Q transform, all derived from a shared
// 50 ms / 50% overlap Hann framing of the preprocessed waveform.

#ifndef AMT_FEATURES_HPP_
#define AMT_FEATURES_HPP_

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "amt/common.hpp"
#include "amt/dsp.hpp"
#include "amt/tensor.hpp"
#include "amt/waveform.hpp"

namespace amt {

enum class FeatureKind : std::uint8_t {
  kSpectrogram = 0,
  kMel = 1,
  kCqt = 2,
  // Cache-only kinds emitted by the embedding exporter.
  kEmbedding = 3,
  kRepresentation = 4,
};

inline const char* feature_kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::kSpectrogram: return "spectrogram";
    case FeatureKind::kMel: return "mel";
    case FeatureKind::kCqt: return "cqt";
    case FeatureKind::kEmbedding: return "embedding";
    case FeatureKind::kRepresentation: return "representation";
  }
  throw InvalidInput("unknown feature kind");
}

inline FeatureKind feature_kind_from_name(const std::string& name) {
  if (name == "spectrogram") return FeatureKind::kSpectrogram;
  if (name == "mel") return FeatureKind::kMel;
  if (name == "cqt") return FeatureKind::kCqt;
  if (name == "embedding") return FeatureKind::kEmbedding;
  if (name == "representation") return FeatureKind::kRepresentation;
  throw ConfigError("unknown feature kind: " + name);
}

struct FeatureConfig {
  double sample_rate = 44100.0;
  double band_lo = 10.0;
  double band_hi = 0.0;  // 0 selects Nyquist (22050 at the default rate)
  std::size_t n_mels = 400;
  int cqt_bins_per_octave = 36;
  double cqt_fmin = 10.0;
  bool cqt_ceil_bins = false;  // floor rule by default; ceil keeps the partial octave
  double log_eps = 1e-8;
  std::size_t time_pool = 1;  // average this many consecutive frames (1 = off)

  double resolved_band_hi() const { return band_hi > 0.0 ? band_hi : sample_rate / 2.0; }
  std::size_t frame_len() const {
    return static_cast<std::size_t>(std::llround(0.05 * sample_rate));
  }
  double hop() const { return 0.05 * sample_rate / 2.0; }
  std::size_t n_fft_bins() const { return frame_len() / 2 + 1; }

  void validate() const {
    if (!(sample_rate > 0)) throw ConfigError("feature: sample_rate must be positive");
    if (!(band_lo > 0) || band_lo >= resolved_band_hi())
      throw ConfigError("feature: need 0 < band_lo < band_hi");
    if (n_mels == 0) throw ConfigError("feature: n_mels must be positive");
    if (cqt_bins_per_octave <= 0) throw ConfigError("feature: bins_per_octave must be positive");
    if (!(cqt_fmin > 0) || cqt_fmin >= sample_rate / 2.0)
      throw ConfigError("feature: cqt_fmin must lie below Nyquist");
    if (time_pool == 0) throw ConfigError("feature: time_pool must be positive");
  }
};

struct FeatureMap {
  FeatureKind kind = FeatureKind::kSpectrogram;
  Tensor<float> values;  // (n_frames, n_bins), time-major

  std::size_t n_frames() const { return values.shape()[0]; }
  std::size_t n_bins() const { return values.shape()[1]; }
};

// ---------------------------------------------------------------------------
// Framing
// ---------------------------------------------------------------------------

inline std::size_t frame_count(std::size_t n_samples, const FeatureConfig& cfg) {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(n_samples) / cfg.hop()));
}

// Slices the signal into Hann-windowed frames centered on multiples of the
// hop, using reflection padding of half a frame on each side.
inline Tensor<double> frame_and_window(const Waveform& wave, const FeatureConfig& cfg) {
  const std::size_t frame_len = cfg.frame_len();
  const std::size_t n = wave.samples.size();
  if (n < frame_len)
    throw SignalTooShort("framing: signal shorter than one 50 ms frame");

  const std::size_t pad_left = (frame_len + 1) / 2;
  const std::size_t pad_right = frame_len / 2;
  std::vector<double> padded;
  padded.reserve(n + frame_len);
  for (std::size_t i = pad_left; i >= 1; --i) padded.push_back(wave.samples[i]);
  padded.insert(padded.end(), wave.samples.begin(), wave.samples.end());
  for (std::size_t i = 1; i <= pad_right; ++i) padded.push_back(wave.samples[n - 1 - i]);

  std::vector<double> window(frame_len);
  for (std::size_t i = 0; i < frame_len; ++i)
    window[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / frame_len));

  const std::size_t n_frames = frame_count(n, cfg);
  const double hop = cfg.hop();
  Tensor<double> frames({n_frames, frame_len});
  for (std::size_t f = 0; f < n_frames; ++f) {
    const auto start = static_cast<std::size_t>(std::llround(f * hop));
    double* row = frames.data() + f * frame_len;
    for (std::size_t i = 0; i < frame_len; ++i)
      row[i] = padded[start + i] * window[i];
  }
  return frames;
}

// ---------------------------------------------------------------------------
// STFT
// ---------------------------------------------------------------------------

// Real-input FFT sized to the frame length (no zero padding), reusing one
// plan across frames. Not thread-safe; one instance per thread.
class Stft {
 public:
  explicit Stft(std::size_t n_fft) : n_fft_(n_fft) {
    in_ = fftw_alloc_real(n_fft_);
    out_ = fftw_alloc_complex(n_fft_ / 2 + 1);
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_fft_), in_, out_, FFTW_ESTIMATE);
    if (plan_ == nullptr) throw NumericalError("stft: FFT plan creation failed");
  }
  ~Stft() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  Stft(const Stft&) = delete;
  Stft& operator=(const Stft&) = delete;

  std::size_t n_bins() const { return n_fft_ / 2 + 1; }

  // Writes |X_k| for the non-negative frequencies into `amp` (n_bins values).
  void amplitude(const double* frame, double* amp) {
    std::memcpy(in_, frame, n_fft_ * sizeof(double));
    fftw_execute(plan_);
    const std::size_t nb = n_bins();
    for (std::size_t k = 0; k < nb; ++k)
      amp[k] = std::hypot(out_[k][0], out_[k][1]);
  }

 private:
  std::size_t n_fft_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

// Amplitude spectrogram of pre-windowed frames, shape (n_frames, n_fft/2+1).
inline Tensor<double> amplitude_spectrogram(const Tensor<double>& frames) {
  if (frames.shape().size() != 2) throw ShapeError("spectrogram: frames must be rank 2");
  const std::size_t n_frames = frames.shape()[0];
  const std::size_t frame_len = frames.shape()[1];
  Stft stft(frame_len);
  Tensor<double> amp({n_frames, stft.n_bins()});
  for (std::size_t f = 0; f < n_frames; ++f)
    stft.amplitude(frames.data() + f * frame_len, amp.data() + f * stft.n_bins());
  return amp;
}

// ---------------------------------------------------------------------------
// Mel filter bank
// ---------------------------------------------------------------------------

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

namespace feature_detail {

// Integral of the triangle (0 at c0, 1 at c1, 0 at c2) over [a, b].
inline double triangle_integral(double c0, double c1, double c2, double a, double b) {
  double total = 0.0;
  {
    const double l = std::max(a, c0), u = std::min(b, c1);
    if (u > l && c1 > c0)
      total += ((u - c0) * (u - c0) - (l - c0) * (l - c0)) / (2.0 * (c1 - c0));
  }
  {
    const double l = std::max(a, c1), u = std::min(b, c2);
    if (u > l && c2 > c1)
      total += ((c2 - l) * (c2 - l) - (c2 - u) * (c2 - u)) / (2.0 * (c2 - c1));
  }
  return total;
}

// Integral of exp(-(f-mu)^2 / (2 sigma^2)) over [a, b].
inline double gaussian_integral(double mu, double sigma, double a, double b) {
  const double inv = 1.0 / (sigma * std::sqrt(2.0));
  return sigma * std::sqrt(kPi / 2.0) * (std::erf((b - mu) * inv) - std::erf((a - mu) * inv));
}

}  // namespace feature_detail

// Triangular filters with corners uniformly spaced on the Mel scale between
// band_lo and Nyquist. Each filter is averaged over the FFT bin intervals so
// triangles narrower than the bin spacing still register.
inline Tensor<double> mel_filterbank(const FeatureConfig& cfg) {
  cfg.validate();
  const std::size_t n_bins = cfg.n_fft_bins();
  const double bin_width = cfg.sample_rate / static_cast<double>(cfg.frame_len());
  const double mel_lo = hz_to_mel(cfg.band_lo);
  const double mel_hi = hz_to_mel(cfg.sample_rate / 2.0);

  std::vector<double> corners(cfg.n_mels + 2);
  for (std::size_t i = 0; i < corners.size(); ++i)
    corners[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                        static_cast<double>(cfg.n_mels + 1));

  Tensor<double> bank({cfg.n_mels, n_bins});
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double a = (static_cast<double>(k) - 0.5) * bin_width;
      const double b = (static_cast<double>(k) + 0.5) * bin_width;
      bank.at2(m, k) = feature_detail::triangle_integral(corners[m], corners[m + 1],
                                                         corners[m + 2], a, b) /
                       bin_width;
    }
  }
  return bank;
}

// ---------------------------------------------------------------------------
// Constant-Q kernels
// ---------------------------------------------------------------------------

inline double cqt_quality_factor(int bins_per_octave) {
  return 1.0 / (std::pow(2.0, 1.0 / bins_per_octave) - 1.0);
}

inline std::size_t cqt_bin_count(const FeatureConfig& cfg) {
  const double octaves = std::log2((cfg.sample_rate / 2.0) / cfg.cqt_fmin);
  const double raw = cfg.cqt_bins_per_octave * octaves;
  return static_cast<std::size_t>(cfg.cqt_ceil_bins ? std::ceil(raw) : std::floor(raw));
}

inline double cqt_center_frequency(const FeatureConfig& cfg, std::size_t k) {
  return cfg.cqt_fmin *
         std::pow(2.0, static_cast<double>(k) / cfg.cqt_bins_per_octave);
}

// Gaussian spectral kernels centered on the geometrically spaced frequencies
// f_k, with sigma set to half the constant-Q bandwidth f_k / Q. Rows are
// integrated over FFT bin intervals and normalized to unit sum.
inline Tensor<double> cqt_kernels(const FeatureConfig& cfg) {
  if (!(cfg.cqt_fmin > 0)) throw InvalidCutoff("cqt: f_min must be positive");
  cfg.validate();
  const std::size_t n_bins = cfg.n_fft_bins();
  const double bin_width = cfg.sample_rate / static_cast<double>(cfg.frame_len());
  const double q = cqt_quality_factor(cfg.cqt_bins_per_octave);
  const std::size_t n_cqt = cqt_bin_count(cfg);

  Tensor<double> kernels({n_cqt, n_bins});
  for (std::size_t m = 0; m < n_cqt; ++m) {
    const double fc = cqt_center_frequency(cfg, m);
    const double sigma = fc / q / 2.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double a = (static_cast<double>(k) - 0.5) * bin_width;
      const double b = (static_cast<double>(k) + 0.5) * bin_width;
      const double v = feature_detail::gaussian_integral(fc, sigma, a, b);
      kernels.at2(m, k) = v;
      sum += v;
    }
    if (sum <= 0.0) throw NumericalError("cqt: kernel row vanished");
    for (std::size_t k = 0; k < n_bins; ++k) kernels.at2(m, k) /= sum;
  }
  return kernels;
}

// ---------------------------------------------------------------------------
// End-to-end extraction
// ---------------------------------------------------------------------------

// Resamples, band-passes, and standardizes a raw waveform.
inline Waveform preprocess(const Waveform& wave, const FeatureConfig& cfg) {
  cfg.validate();
  Waveform w = resample(wave, cfg.sample_rate);
  w = bandpass(w, cfg.band_lo, cfg.resolved_band_hi());
  return normalize_waveform(w);
}

namespace feature_detail {

inline Tensor<float> log_compress_and_pool(const Tensor<double>& feat, double eps,
                                           std::size_t time_pool) {
  const std::size_t rows = feat.shape()[0];
  const std::size_t cols = feat.shape()[1];
  const std::size_t out_rows = time_pool > 1 ? rows / time_pool : rows;
  if (out_rows == 0) throw SignalTooShort("feature: too few frames for time_pool");
  Tensor<float> out({out_rows, cols});
  for (std::size_t r = 0; r < out_rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < time_pool; ++j)
        acc += std::log(feat.at2(r * time_pool + j, c) + eps);
      out.at2(r, c) = static_cast<float>(acc / static_cast<double>(time_pool));
    }
  }
  return out;
}

inline Tensor<double> apply_bank(const Tensor<double>& amp, const Tensor<double>& bank) {
  const std::size_t n_frames = amp.shape()[0];
  const std::size_t n_bins = amp.shape()[1];
  const std::size_t n_out = bank.shape()[0];
  if (bank.shape()[1] != n_bins) throw ShapeError("feature: bank/bin mismatch");
  Tensor<double> out({n_frames, n_out});
  for (std::size_t f = 0; f < n_frames; ++f) {
    const double* a = amp.data() + f * n_bins;
    for (std::size_t m = 0; m < n_out; ++m) {
      const double* row = bank.data() + m * n_bins;
      double acc = 0.0;
      for (std::size_t k = 0; k < n_bins; ++k) acc += row[k] * a[k];
      out.at2(f, m) = acc;
    }
  }
  return out;
}

}  // namespace feature_detail

// Computes one feature map from a raw waveform (preprocessing included).
// Spectrogram rows are log-compressed amplitudes like the filtered kinds.
inline FeatureMap compute_feature(const Waveform& wave, const FeatureConfig& cfg,
                                  FeatureKind kind) {
  const Waveform prepped = preprocess(wave, cfg);
  const Tensor<double> frames = frame_and_window(prepped, cfg);
  const Tensor<double> amp = amplitude_spectrogram(frames);

  FeatureMap map;
  map.kind = kind;
  switch (kind) {
    case FeatureKind::kSpectrogram:
      map.values = feature_detail::log_compress_and_pool(amp, cfg.log_eps, cfg.time_pool);
      break;
    case FeatureKind::kMel:
      map.values = feature_detail::log_compress_and_pool(
          feature_detail::apply_bank(amp, mel_filterbank(cfg)), cfg.log_eps, cfg.time_pool);
      break;
    case FeatureKind::kCqt:
      map.values = feature_detail::log_compress_and_pool(
          feature_detail::apply_bank(amp, cqt_kernels(cfg)), cfg.log_eps, cfg.time_pool);
      break;
    default:
      throw InvalidInput("compute_feature: not a spectral feature kind");
  }
  return map;
}

// ---------------------------------------------------------------------------
// Feature cache files
// ---------------------------------------------------------------------------
//
// Layout (little-endian throughout):
//   bytes 0..3   magic "AMTF"
//   byte  4      format version (1)
//   byte  5      feature kind
//   bytes 6..9   rows (u32)
//   bytes 10..13 cols (u32)
//   then rows*cols float32 values, row-major.

inline void write_feature_cache(const std::string& path, const FeatureMap& map) {
  require_little_endian();
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw IoError("feature cache: cannot open for write: " + path);
  const char magic[4] = {'A', 'M', 'T', 'F'};
  const std::uint8_t version = 1;
  const auto kind = static_cast<std::uint8_t>(map.kind);
  const auto rows = static_cast<std::uint32_t>(map.n_frames());
  const auto cols = static_cast<std::uint32_t>(map.n_bins());
  bool ok = std::fwrite(magic, 1, 4, f) == 4 &&
            std::fwrite(&version, 1, 1, f) == 1 &&
            std::fwrite(&kind, 1, 1, f) == 1 &&
            std::fwrite(&rows, 4, 1, f) == 1 &&
            std::fwrite(&cols, 4, 1, f) == 1 &&
            std::fwrite(map.values.data(), sizeof(float), map.values.numel(), f) ==
                map.values.numel();
  ok = std::fclose(f) == 0 && ok;
  if (!ok) throw IoError("feature cache: short write: " + path);
}

inline FeatureMap read_feature_cache(const std::string& path) {
  require_little_endian();
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) throw IoError("feature cache: cannot open: " + path);
  char magic[4];
  std::uint8_t version = 0, kind = 0;
  std::uint32_t rows = 0, cols = 0;
  const bool header_ok = std::fread(magic, 1, 4, f) == 4 &&
                         std::fread(&version, 1, 1, f) == 1 &&
                         std::fread(&kind, 1, 1, f) == 1 &&
                         std::fread(&rows, 4, 1, f) == 1 &&
                         std::fread(&cols, 4, 1, f) == 1;
  if (!header_ok || std::memcmp(magic, "AMTF", 4) != 0 || version != 1 || kind > 4) {
    std::fclose(f);
    throw IoError("feature cache: bad header: " + path);
  }
  FeatureMap map;
  map.kind = static_cast<FeatureKind>(kind);
  map.values = Tensor<float>({rows, cols});
  const bool body_ok =
      std::fread(map.values.data(), sizeof(float), map.values.numel(), f) ==
      map.values.numel();
  std::fclose(f);
  if (!body_ok) throw IoError("feature cache: truncated body: " + path);
  return map;
}

}  // namespace amt

#endif  // AMT_FEATURES_HPP_
