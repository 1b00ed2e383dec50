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

// Deterministic synthetic corpus: class-specific harmonic stacks with the
// three influential factors imposed as physical-style distortions, so the
// label mapping and the full training pipeline run at desk scale.

#ifndef AMT_SYNTHETIC_HPP_
#define AMT_SYNTHETIC_HPP_

#include <cmath>
#include <optional>
#include <vector>

#include "amt/common.hpp"
#include "amt/dataset.hpp"
#include "amt/dsp.hpp"
#include "amt/rng.hpp"
#include "amt/waveform.hpp"

namespace amt {

struct SyntheticSpec {
  int n_classes = 12;
  int n_train = 200;        // recordings; one 30-s segment each at the default duration
  int n_test = 60;
  double duration_s = 30.0;
  double sample_rate = 4410.0;
  // Factor values assigned per recording; a single entry means no variation,
  // std::nullopt entries produce absent annotations.
  std::vector<std::optional<double>> range_values = {20.0, 100.0};
  std::vector<std::optional<double>> depth_values = {4.0, 9.0, 15.0};
  std::vector<std::optional<double>> wind_values = {0.0, 5.0, 14.0};
  // Probability that a recording takes its class's home factor value instead
  // of the class-independent cycle; 0 keeps class and factor uncorrelated,
  // values near 1 confound them.
  double factor_confound = 0.0;

  void validate() const {
    if (n_classes < 1 || n_classes > 12)
      throw ConfigError("synthetic: n_classes must be in [1, 12]");
    if (n_train < 1 || n_test < 0) throw ConfigError("synthetic: bad recording counts");
    if (!(duration_s > 0) || !(sample_rate > 0))
      throw ConfigError("synthetic: duration and sample rate must be positive");
    if (range_values.empty() || depth_values.empty() || wind_values.empty())
      throw ConfigError("synthetic: factor value lists must be non-empty");
    if (factor_confound < 0.0 || factor_confound > 1.0)
      throw ConfigError("synthetic: factor_confound must be in [0, 1]");
  }
};

struct SyntheticDataset {
  Dataset dataset;
  SplitManifest manifest;
};

namespace synth_detail {

// One-pole low-pass in place; models high-frequency loss over distance.
inline void one_pole_lowpass(std::vector<double>& x, double cutoff_hz, double sr) {
  const double alpha = 1.0 - std::exp(-2.0 * kPi * cutoff_hz / sr);
  double y = 0.0;
  for (double& v : x) {
    y += alpha * (v - y);
    v = y;
  }
}

inline std::vector<double> synth_recording(int class_idx, const SyntheticSpec& spec,
                                           std::optional<double> range_m,
                                           std::optional<double> depth_m,
                                           std::optional<double> wind_kmh,
                                           RandomStream& rs) {
  const double sr = spec.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * sr));
  const double nyquist = sr / 2.0;

  // Class-specific harmonic stack with slight per-recording detune and a
  // slow propeller-like amplitude modulation.
  const double f0 = (60.0 + 24.0 * class_idx) * (1.0 + 0.01 * (rs.uniform() - 0.5));
  const double mod_rate = 2.0 + 6.0 * rs.uniform();
  const double mod_phase = 2.0 * kPi * rs.uniform();
  std::vector<double> partial_phase(6);
  for (double& p : partial_phase) p = 2.0 * kPi * rs.uniform();

  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    double s = 0.0;
    for (int h = 1; h <= 6; ++h) {
      const double f = f0 * h;
      if (f >= nyquist * 0.95) break;
      s += std::sin(2.0 * kPi * f * t + partial_phase[h - 1]) / std::pow(h, 0.7);
    }
    x[i] = s * (1.0 + 0.3 * std::sin(2.0 * kPi * mod_rate * t + mod_phase));
  }

  // Source range: propagation loss plus high-frequency roll-off.
  if (range_m.has_value()) {
    const double gain = 1.0 / (1.0 + *range_m / 60.0);
    for (double& v : x) v *= gain;
    const double cutoff = std::clamp(2200.0 - 5.0 * *range_m, 300.0, nyquist * 0.95);
    one_pole_lowpass(x, cutoff, sr);
  }

  // Depth: single bottom-bounce echo as a comb filter.
  if (depth_m.has_value() && *depth_m > 0) {
    const auto delay = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(sr * 2.0 * *depth_m / 1500.0)));
    for (std::size_t i = n; i-- > delay;) x[i] += 0.5 * x[i - delay];
  }

  // Ambient broadband noise.
  for (double& v : x) v += 0.03 * rs.normal();

  // Wind: intermittent band-limited bursts; rate and level grow with speed.
  if (wind_kmh.has_value() && *wind_kmh > 0) {
    const double w = *wind_kmh;
    const double p_burst = std::min(0.8, 0.8 * w / 18.0);
    const double level = 0.45 * w / 18.0;
    std::vector<double> track(n, 0.0);
    const auto block = static_cast<std::size_t>(std::llround(0.5 * sr));
    for (std::size_t start = 0; start < n; start += block) {
      if (rs.uniform() >= p_burst) continue;
      const double amp = level * (0.5 + 0.5 * rs.uniform());
      const std::size_t stop = std::min(n, start + block);
      for (std::size_t i = start; i < stop; ++i) track[i] = amp * rs.normal();
    }
    const double lo = std::min(800.0, 0.36 * nyquist);
    const double hi = std::min(1900.0, 0.86 * nyquist);
    Waveform band = bandpass(Waveform(std::move(track), sr), lo, hi);
    for (std::size_t i = 0; i < n; ++i) x[i] += band.samples[i];
  }

  // Fixed output level so downstream standardization is well-conditioned.
  double rms = 0.0;
  for (double v : x) rms += v * v;
  rms = std::sqrt(rms / static_cast<double>(n));
  const double scale = rms > 0 ? 0.1 / rms : 1.0;
  for (double& v : x) v *= scale;
  return x;
}

}  // namespace synth_detail

// Builds the recordings plus a split manifest assigning the first n_train
// recordings to training. Classes and factor values cycle deterministically;
// the waveforms are a pure function of (spec, seed).
inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto& names = canonical_categories();
  const std::uint64_t base = derive_seed(seed, static_cast<std::uint64_t>(RngPurpose::kSynthesis));

  std::vector<RecordingMeta> metas;
  std::vector<Waveform> waves;
  SplitManifest manifest;
  const int total = spec.n_train + spec.n_test;
  for (int i = 0; i < total; ++i) {
    const int class_idx = i % spec.n_classes;
    const int cycle = i / spec.n_classes;
    const std::uint64_t rec_seed = derive_seed(base, static_cast<std::uint64_t>(i));
    RandomStream pick(derive_seed(rec_seed, 1));
    auto assign = [&](const std::vector<std::optional<double>>& values) {
      const auto len = values.size();
      auto idx = static_cast<std::size_t>(class_idx + cycle) % len;
      if (spec.factor_confound > 0.0 && pick.uniform() < spec.factor_confound)
        idx = static_cast<std::size_t>(class_idx) % len;  // the class's home value
      return values[idx];
    };

    RecordingMeta meta;
    meta.id = i + 1;
    meta.category = names[static_cast<std::size_t>(class_idx)];
    meta.source_range_m = assign(spec.range_values);
    meta.depth_m = assign(spec.depth_values);
    meta.wind_kmh = assign(spec.wind_values);
    meta.duration_s = spec.duration_s;

    RandomStream rs(rec_seed);
    waves.emplace_back(synth_detail::synth_recording(class_idx, spec, meta.source_range_m,
                                                     meta.depth_m, meta.wind_kmh, rs),
                       spec.sample_rate);
    metas.push_back(meta);

    auto& side = i < spec.n_train ? manifest.train_ids : manifest.test_ids;
    side[meta.category].push_back(meta.id);
  }

  SyntheticDataset out;
  out.dataset = make_dataset(std::move(metas), std::move(waves));
  out.manifest = std::move(manifest);
  return out;
}

}  // namespace amt

#endif  // AMT_SYNTHETIC_HPP_
