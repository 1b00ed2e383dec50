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

#ifndef AMT_WAVEFORM_HPP_
#define AMT_WAVEFORM_HPP_

#include <cmath>
#include <cstddef>
#include <vector>

#include "amt/common.hpp"

namespace amt {

// Single-channel sample sequence, dimensionless amplitude.
struct Waveform {
  std::vector<double> samples;
  double sample_rate = 0.0;

  Waveform() = default;
  Waveform(std::vector<double> s, double rate)
      : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }

  double mean() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (double v : samples) acc += v;
    return acc / static_cast<double>(samples.size());
  }

  // Population variance.
  double variance() const {
    if (samples.empty()) return 0.0;
    const double mu = mean();
    double acc = 0.0;
    for (double v : samples) acc += (v - mu) * (v - mu);
    return acc / static_cast<double>(samples.size());
  }

  double rms() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (double v : samples) acc += v * v;
    return std::sqrt(acc / static_cast<double>(samples.size()));
  }

  // Slice [start_s, start_s + dur_s); clamps to the signal end.
  Waveform slice(double start_s, double dur_s) const {
    const auto begin = static_cast<std::size_t>(std::llround(start_s * sample_rate));
    auto end = static_cast<std::size_t>(std::llround((start_s + dur_s) * sample_rate));
    if (begin >= samples.size()) return Waveform({}, sample_rate);
    end = std::min(end, samples.size());
    return Waveform(std::vector<double>(samples.begin() + begin, samples.begin() + end),
                    sample_rate);
  }
};

}  // namespace amt

#endif  // AMT_WAVEFORM_HPP_
