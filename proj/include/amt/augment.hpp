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

// Local masking and replicating: random passband patches of a training
// spectrogram are replaced by the same-coordinate patches of another sample
// in the mini-batch. Labels are never touched.

#ifndef AMT_AUGMENT_HPP_
#define AMT_AUGMENT_HPP_

#include <algorithm>
#include <cstddef>

#include "amt/common.hpp"
#include "amt/rng.hpp"
#include "amt/tensor.hpp"

namespace amt {

struct LmrConfig {
  int min_patches = 1;
  int max_patches = 3;
  double min_time_frac = 0.05;
  double max_time_frac = 0.15;
  double min_freq_frac = 0.05;
  double max_freq_frac = 0.15;
  // Passband rows (frequency-axis interval) eligible for patching;
  // hi == 0 selects the full axis.
  std::size_t passband_lo = 0;
  std::size_t passband_hi = 0;
  double probability = 0.5;

  void validate(std::size_t n_freq_bins) const {
    auto frac_ok = [](double lo, double hi) {
      return lo > 0.0 && lo <= hi && hi <= 1.0;
    };
    if (!frac_ok(min_time_frac, max_time_frac) || !frac_ok(min_freq_frac, max_freq_frac))
      throw ConfigError("lmr: patch fractions must satisfy 0 < min <= max <= 1");
    if (min_patches < 1 || min_patches > max_patches)
      throw ConfigError("lmr: need 1 <= min_patches <= max_patches");
    if (probability < 0.0 || probability > 1.0)
      throw ConfigError("lmr: probability must be in [0, 1]");
    const std::size_t hi = passband_hi == 0 ? n_freq_bins : passband_hi;
    if (passband_lo >= hi || hi > n_freq_bins)
      throw ConfigError("lmr: passband interval outside the frequency axis");
  }
};

struct LmrStats {
  int samples_augmented = 0;
  bool skipped_small_batch = false;
};

// Augments a batch shaped (N, C, T, F). Patches are read from the original
// input, so a donor is never an already-augmented sample. A batch of one
// cannot be augmented and is returned unchanged (flagged in stats).
template <typename T>
Tensor<T> lmr(const Tensor<T>& batch, const LmrConfig& cfg, RandomStream& rng,
              LmrStats* stats = nullptr) {
  if (batch.shape().size() != 4) throw ShapeError("lmr: batch must be (N, C, T, F)");
  const std::size_t n = batch.shape()[0];
  const std::size_t channels = batch.shape()[1];
  const std::size_t n_time = batch.shape()[2];
  const std::size_t n_freq = batch.shape()[3];
  cfg.validate(n_freq);

  Tensor<T> out = batch;
  if (stats != nullptr) *stats = LmrStats{};
  if (cfg.probability <= 0.0) return out;
  if (n < 2) {
    if (stats != nullptr) stats->skipped_small_batch = true;
    return out;
  }

  const std::size_t band_lo = cfg.passband_lo;
  const std::size_t band_hi = cfg.passband_hi == 0 ? n_freq : cfg.passband_hi;
  const std::size_t band_rows = band_hi - band_lo;

  auto patch_len = [&rng](std::size_t axis, double lo, double hi) {
    const double frac = lo + (hi - lo) * rng.uniform();
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(frac * static_cast<double>(axis))));
  };

  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform() >= cfg.probability) continue;
    if (stats != nullptr) ++stats->samples_augmented;
    const int n_patches =
        cfg.min_patches + static_cast<int>(rng.uniform_int(
                              static_cast<std::uint64_t>(cfg.max_patches - cfg.min_patches + 1)));
    for (int p = 0; p < n_patches; ++p) {
      std::size_t donor = rng.uniform_index(n - 1);
      if (donor >= i) ++donor;  // uniform over the other samples
      const std::size_t t_len = std::min(patch_len(n_time, cfg.min_time_frac, cfg.max_time_frac),
                                         n_time);
      const std::size_t f_len =
          std::min(patch_len(band_rows, cfg.min_freq_frac, cfg.max_freq_frac), band_rows);
      const std::size_t t0 = rng.uniform_index(n_time - t_len + 1);
      const std::size_t f0 = band_lo + rng.uniform_index(band_rows - f_len + 1);
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t t = t0; t < t0 + t_len; ++t)
          for (std::size_t f = f0; f < f0 + f_len; ++f)
            out.at4(i, c, t, f) = batch.at4(donor, c, t, f);
    }
  }
  return out;
}

}  // namespace amt

#endif  // AMT_AUGMENT_HPP_
