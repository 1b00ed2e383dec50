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

// Adaptive-moment optimizer with decoupled weight decay. One instance holds
// the moment state for the whole network, keyed by tensor name; steps can be
// restricted to a subset of partitions, and only stepped tensors advance
// their bias-correction counters or experience decay.

#ifndef AMT_OPTIMIZER_HPP_
#define AMT_OPTIMIZER_HPP_

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "amt/nn.hpp"
#include "amt/tensor.hpp"

namespace amt {

template <typename T>
class AdamW {
 public:
  explicit AdamW(double weight_decay = 1e-5, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8)
      : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one update at the given learning rate to every trainable tensor
  // accepted by the filter (all when the filter is empty).
  void step(Registry<T>& registry, double lr,
            const std::function<bool(const NamedTensor<T>&)>& filter = {}) {
    for (auto& entry : registry) {
      if (!entry.trainable || entry.grad == nullptr) continue;
      if (filter && !filter(entry)) continue;
      State& s = state_[entry.name];
      if (s.m.numel() == 0) {
        s.m = Tensor<T>(entry.value->shape());
        s.v = Tensor<T>(entry.value->shape());
      }
      ++s.t;
      const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
      const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
      Tensor<T>& value = *entry.value;
      const Tensor<T>& grad = *entry.grad;
      for (std::size_t i = 0; i < value.numel(); ++i) {
        const double g = static_cast<double>(grad[i]);
        const double m = beta1_ * static_cast<double>(s.m[i]) + (1.0 - beta1_) * g;
        const double v = beta2_ * static_cast<double>(s.v[i]) + (1.0 - beta2_) * g * g;
        s.m[i] = static_cast<T>(m);
        s.v[i] = static_cast<T>(v);
        const double update = (m / bc1) / (std::sqrt(v / bc2) + eps_) +
                              weight_decay_ * static_cast<double>(value[i]);
        value[i] = static_cast<T>(static_cast<double>(value[i]) - lr * update);
      }
    }
  }

  double weight_decay() const { return weight_decay_; }

 private:
  struct State {
    Tensor<T> m, v;
    long t = 0;
  };
  double weight_decay_, beta1_, beta2_, eps_;
  std::map<std::string, State> state_;
};

}  // namespace amt

#endif  // AMT_OPTIMIZER_HPP_
