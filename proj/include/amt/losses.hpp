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

// Cross-entropy losses for the two-task objective and the adversarial
// objective. Training uses the fused softmax + cross-entropy form (loss and
// logit gradients in one pass); a probability-space helper exists for
// metric-style evaluation.

#ifndef AMT_LOSSES_HPP_
#define AMT_LOSSES_HPP_

#include <cmath>
#include <vector>

#include "amt/common.hpp"
#include "amt/dataset.hpp"
#include "amt/rng.hpp"
#include "amt/tensor.hpp"

namespace amt {

// Mean cross-entropy of probability rows against integer labels, skipping
// EXCLUDED entries. Probabilities are floored at 1e-12 inside the log.
template <typename T>
double mean_cross_entropy(const Tensor<T>& probs, const std::vector<int>& labels) {
  if (probs.rank() != 2 || probs.dim(0) != labels.size())
    throw ShapeError("cross_entropy: probs must be (N, K) matching labels");
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kExcludedLabel) continue;
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= probs.dim(1))
      throw InvalidInput("cross_entropy: label out of range");
    total += -std::log(static_cast<double>(probs.at2(i, static_cast<std::size_t>(labels[i]))) +
                       1e-12);
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

// Softmax cross-entropy over logits with EXCLUDED-aware mean reduction.
template <typename T>
struct CeResult {
  double loss = 0.0;
  Tensor<T> dlogits;      // zero rows for excluded samples
  std::size_t counted = 0;
};

template <typename T>
CeResult<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size())
    throw ShapeError("softmax_ce: logits must be (N, K) matching labels");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  CeResult<T> r;
  r.dlogits = Tensor<T>(logits.shape());
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] != kExcludedLabel) ++r.counted;
  if (r.counted == 0) return r;

  const double inv_count = 1.0 / static_cast<double>(r.counted);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == kExcludedLabel) continue;
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k)
      throw InvalidInput("softmax_ce: label out of range");
    double mx = static_cast<double>(logits.at2(i, 0));
    for (std::size_t j = 1; j < k; ++j)
      mx = std::max(mx, static_cast<double>(logits.at2(i, j)));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      z += std::exp(static_cast<double>(logits.at2(i, j)) - mx);
    const auto y = static_cast<std::size_t>(labels[i]);
    r.loss += (std::log(z) - (static_cast<double>(logits.at2(i, y)) - mx)) * inv_count;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(static_cast<double>(logits.at2(i, j)) - mx) / z;
      r.dlogits.at2(i, j) = static_cast<T>((p - (j == y ? 1.0 : 0.0)) * inv_count);
    }
  }
  if (!std::isfinite(r.loss)) throw NumericalError("softmax_ce: non-finite loss");
  return r;
}

// Multi-task loss: mean recognition cross-entropy over the whole batch plus
// mean auxiliary cross-entropy over the annotated samples.
template <typename T>
struct MtLoss {
  double recognition = 0.0;
  double auxiliary = 0.0;
  double total = 0.0;
  Tensor<T> d_main;
  Tensor<T> d_aux;
  bool aux_all_masked = false;
};

template <typename T>
MtLoss<T> loss_mt(const Tensor<T>& main_logits, const std::vector<int>& y,
                  const Tensor<T>& aux_logits, const std::vector<int>& y_aux) {
  for (int label : y)
    if (label == kExcludedLabel)
      throw InvalidInput("loss_mt: recognition labels cannot be excluded");
  CeResult<T> recog = softmax_cross_entropy(main_logits, y);
  CeResult<T> aux = softmax_cross_entropy(aux_logits, y_aux);
  MtLoss<T> out;
  out.recognition = recog.loss;
  out.auxiliary = aux.loss;
  out.total = recog.loss + aux.loss;
  out.d_main = std::move(recog.dlogits);
  out.d_aux = std::move(aux.dlogits);
  out.aux_all_masked = aux.counted == 0;
  return out;
}

// Adversarial loss: mean cross-entropy of the auxiliary prediction against
// the misleading labels (never masked; the labels are synthetic).
template <typename T>
struct AdvLoss {
  double value = 0.0;
  Tensor<T> d_aux;
};

template <typename T>
AdvLoss<T> loss_adv(const Tensor<T>& aux_logits, const std::vector<int>& misleading) {
  for (int label : misleading)
    if (label == kExcludedLabel)
      throw InvalidInput("loss_adv: misleading labels cannot be excluded");
  CeResult<T> ce = softmax_cross_entropy(aux_logits, misleading);
  return {ce.loss, std::move(ce.dlogits)};
}

// Uniform random class indices, redrawn every batch.
inline std::vector<int> sample_misleading_labels(int n_aux, std::size_t batch_size,
                                                 RandomStream& rng) {
  if (n_aux < 2) throw InvalidInput("misleading labels: n_aux must be >= 2");
  std::vector<int> labels(batch_size);
  for (auto& l : labels)
    l = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_aux)));
  return labels;
}

}  // namespace amt

#endif  // AMT_LOSSES_HPP_
