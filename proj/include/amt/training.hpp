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

// Two-stage adversarial multi-task training. Each epoch runs the adversarial
// pass first, then the multi-task pass (so every epoch ends in a validatable
// state); the final epoch is multi-task only. The adversarial pass fits the
// auxiliary head to uniformly random misleading labels at one-fifth of the
// learning rate while the recognition partition stays bitwise frozen.

#ifndef AMT_TRAINING_HPP_
#define AMT_TRAINING_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "amt/augment.hpp"
#include "amt/dataset.hpp"
#include "amt/features.hpp"
#include "amt/losses.hpp"
#include "amt/network.hpp"
#include "amt/optimizer.hpp"
#include "amt/rng.hpp"

namespace amt {

struct TrainConfig {
  int epochs = 200;
  int warmup_epochs = 5;
  double lr_mt = 5e-4;
  double lr_adv = 1e-4;  // one-fifth of lr_mt
  double weight_decay = 1e-5;
  int batch_size = 32;
  std::uint64_t seed = 123;
  Factor factor = Factor::kSourceRange;
  bool adversarial_enabled = true;  // off = plain multi-task baseline
  bool aux_enabled = true;          // off additionally drops the auxiliary loss
  double width_mult = 1.0;
  bool lmr_enabled = true;
  LmrConfig lmr;
  double validation_fraction = 0.10;  // carved from training data by recording

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (warmup_epochs < 0) throw ConfigError("train: warmup_epochs must be >= 0");
    if (!(lr_mt > 0) || !(lr_adv > 0)) throw ConfigError("train: learning rates must be positive");
    if (weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (width_mult <= 0) throw ConfigError("train: width_mult must be positive");
    if (validation_fraction < 0 || validation_fraction >= 1)
      throw ConfigError("train: validation_fraction must be in [0, 1)");
  }
};

// Linear warm-up to the stage maximum, then cosine annealing to ~0 at the
// final epoch. The multiplier applies to both stage learning rates.
inline double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) throw InvalidInput("lr_schedule: epoch out of range");
  const int w = std::min(cfg.warmup_epochs, cfg.epochs);
  if (w > 0 && epoch < w - 1)
    return static_cast<double>(epoch + 1) / static_cast<double>(w);
  const int peak = w > 0 ? w - 1 : 0;
  const int span = cfg.epochs - 1 - peak;
  const double t = span > 0 ? static_cast<double>(epoch - peak) / static_cast<double>(span) : 0.0;
  return std::max(0.5 * (1.0 + std::cos(kPi * t)), 1e-6);
}

// ---------------------------------------------------------------------------
// Run history
// ---------------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double loss_recog = 0.0;
  std::optional<double> loss_aux;
  std::optional<double> loss_adv;
  double val_accuracy = 0.0;
  std::optional<double> val_aux_accuracy;
  double lr_multiplier = 0.0;
};

struct RunHistory {
  std::vector<EpochRecord> epochs;

  // One JSON object per line; keys for absent stages are omitted entirely.
  std::string to_jsonl() const {
    std::ostringstream out;
    out.precision(17);
    for (const auto& e : epochs) {
      out << "{\"epoch\":" << e.epoch << ",\"loss_recog\":" << e.loss_recog;
      if (e.loss_aux) out << ",\"loss_aux\":" << *e.loss_aux;
      if (e.loss_adv) out << ",\"loss_adv\":" << *e.loss_adv;
      out << ",\"val_accuracy\":" << e.val_accuracy;
      if (e.val_aux_accuracy) out << ",\"val_aux_accuracy\":" << *e.val_aux_accuracy;
      out << ",\"lr_multiplier\":" << e.lr_multiplier << "}\n";
    }
    return out.str();
  }

  std::uint64_t checksum() const { return fnv1a(to_jsonl()); }

  static std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

// Checksum over every registered tensor (values only), name-tagged so
// reordering or renaming cannot silently alias.
template <typename T>
std::uint64_t parameter_checksum(AMTNet<T>& net) {
  std::string bytes;
  for (const auto& entry : net.registry()) {
    bytes.append(entry.name);
    const auto* raw = reinterpret_cast<const char*>(entry.value->data());
    bytes.append(raw, entry.value->numel() * sizeof(T));
  }
  return RunHistory::fnv1a(bytes);
}

// ---------------------------------------------------------------------------
// Training data
// ---------------------------------------------------------------------------

template <typename T>
struct TrainSet {
  std::vector<Tensor<T>> features;  // (T, F), uniform shape
  std::vector<int> labels;          // category indices
  std::vector<int> aux_labels;      // active factor; kExcludedLabel when absent
  std::vector<int> recording_ids;

  std::size_t size() const { return features.size(); }
  void check() const {
    if (features.empty()) throw InvalidInput("train set: empty");
    if (labels.size() != features.size() || aux_labels.size() != features.size() ||
        recording_ids.size() != features.size())
      throw InvalidInput("train set: ragged columns");
    for (std::size_t i = 1; i < features.size(); ++i)
      if (!features[i].same_shape(features[0]))
        throw ShapeError("train set: feature shapes differ");
  }
};

// Extracts features for each segment of a split side.
template <typename T>
TrainSet<T> make_train_set(const Dataset& ds, const std::vector<Segment>& segments,
                           const FeatureConfig& fcfg, FeatureKind kind, Factor factor) {
  TrainSet<T> out;
  for (const Segment& seg : segments) {
    const FeatureMap fm = compute_feature(segment_waveform(ds, seg), fcfg, kind);
    out.features.push_back(fm.values.template cast<T>());
    out.labels.push_back(seg.y);
    out.aux_labels.push_back(seg.aux_label(factor));
    out.recording_ids.push_back(seg.recording_id);
  }
  out.check();
  return out;
}

namespace train_detail {

template <typename T>
Tensor<T> make_batch(const TrainSet<T>& data, const std::vector<std::size_t>& order,
                     std::size_t begin, std::size_t end) {
  const auto& shape = data.features[order[begin]].shape();
  Tensor<T> x({end - begin, 1, shape[0], shape[1]});
  const std::size_t plane = shape[0] * shape[1];
  for (std::size_t i = begin; i < end; ++i)
    std::copy_n(data.features[order[i]].data(), plane, x.data() + (i - begin) * plane);
  return x;
}

inline std::vector<int> gather(const std::vector<int>& values,
                               const std::vector<std::size_t>& order, std::size_t begin,
                               std::size_t end) {
  std::vector<int> out(end - begin);
  for (std::size_t i = begin; i < end; ++i) out[i - begin] = values[order[i]];
  return out;
}

inline std::vector<int> argmax_rows(const Tensor<float>& p) {
  std::vector<int> out(p.dim(0));
  for (std::size_t i = 0; i < p.dim(0); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < p.dim(1); ++j)
      if (p.at2(i, j) > p.at2(i, best)) best = j;  // ties keep the lowest index
    out[i] = static_cast<int>(best);
  }
  return out;
}

template <typename T>
std::vector<int> argmax_rows_t(const Tensor<T>& logits) {
  std::vector<int> out(logits.dim(0));
  for (std::size_t i = 0; i < logits.dim(0); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.dim(1); ++j)
      if (logits.at2(i, j) > logits.at2(i, best)) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace train_detail

// ---------------------------------------------------------------------------
// Steps
// ---------------------------------------------------------------------------

struct StepLosses {
  double recognition = 0.0;
  std::optional<double> auxiliary;
};

// One multi-task update: every partition may move.
template <typename T>
StepLosses mt_step(AMTNet<T>& net, AdamW<T>& opt, const Tensor<T>& x,
                   const std::vector<int>& y, const std::vector<int>& y_aux, double lr,
                   bool aux_enabled) {
  net.set_train(true);
  net.zero_grad();
  const bool with_aux = aux_enabled && !net.pruned();
  ForwardResult<T> fwd = net.forward(x, with_aux);
  StepLosses out;
  if (with_aux) {
    MtLoss<T> loss = loss_mt(fwd.main_logits, y, fwd.aux_logits, y_aux);
    out.recognition = loss.recognition;
    out.auxiliary = loss.auxiliary;
    net.backward(&loss.d_main, &loss.d_aux);
  } else {
    CeResult<T> ce = softmax_cross_entropy(fwd.main_logits, y);
    out.recognition = ce.loss;
    net.backward(&ce.dlogits, nullptr);
  }
  Registry<T> reg = net.registry();
  opt.step(reg, lr);
  return out;
}

// One adversarial update: shared and auxiliary partitions only; the
// recognition partition (including batch-norm buffers) never runs.
template <typename T>
double adv_step(AMTNet<T>& net, AdamW<T>& opt, const Tensor<T>& x,
                const std::vector<int>& misleading, double lr_adv) {
  net.set_train(true);
  net.zero_grad();
  ForwardResult<T> fwd = net.forward_adversarial(x);
  AdvLoss<T> loss = loss_adv(fwd.aux_logits, misleading);
  net.backward(nullptr, &loss.d_aux);
  Registry<T> reg = net.registry();
  opt.step(reg, lr_adv, [](const NamedTensor<T>& t) {
    return t.partition != Partition::kRecognition;
  });
  return loss.value;
}

// ---------------------------------------------------------------------------
// Inference over a train set (validation / evaluation plumbing)
// ---------------------------------------------------------------------------

template <typename T>
struct Predictions {
  std::vector<int> recognition;
  std::vector<int> auxiliary;  // empty if the aux head did not run
};

template <typename T>
Predictions<T> predict_set(AMTNet<T>& net, const TrainSet<T>& data,
                           const std::vector<std::size_t>& indices, int batch_size) {
  net.set_train(false);
  Predictions<T> out;
  const bool with_aux = !net.pruned();
  for (std::size_t begin = 0; begin < indices.size();
       begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(indices.size(), begin + static_cast<std::size_t>(batch_size));
    Tensor<T> x = train_detail::make_batch(data, indices, begin, end);
    ForwardResult<T> fwd = net.forward(x, with_aux);
    auto preds = train_detail::argmax_rows_t(fwd.main_logits);
    out.recognition.insert(out.recognition.end(), preds.begin(), preds.end());
    if (with_aux) {
      auto aux_preds = train_detail::argmax_rows_t(fwd.aux_logits);
      out.auxiliary.insert(out.auxiliary.end(), aux_preds.begin(), aux_preds.end());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// The training loop
// ---------------------------------------------------------------------------

template <typename T>
struct TrainOutput {
  RunHistory history;
  std::map<std::string, Tensor<T>> best_state;  // snapshot incl. buffers
  double best_val_accuracy = 0.0;
  int best_epoch = -1;
};

template <typename T>
std::map<std::string, Tensor<T>> snapshot_state(AMTNet<T>& net) {
  std::map<std::string, Tensor<T>> state;
  for (const auto& entry : net.registry()) state[entry.name] = *entry.value;
  return state;
}

template <typename T>
void restore_state(AMTNet<T>& net, const std::map<std::string, Tensor<T>>& state) {
  for (auto& entry : net.registry()) {
    const auto it = state.find(entry.name);
    if (it == state.end()) throw InvalidInput("restore_state: missing tensor " + entry.name);
    if (!it->second.same_shape(*entry.value))
      throw ShapeError("restore_state: shape mismatch for " + entry.name);
    *entry.value = it->second;
  }
}

template <typename T>
TrainOutput<T> train(AMTNet<T>& net, const TrainSet<T>& data, const TrainConfig& cfg) {
  cfg.validate();
  data.check();

  RandomStream shuffle_rng = make_stream(cfg.seed, RngPurpose::kBatchShuffle);
  RandomStream lmr_rng = make_stream(cfg.seed, RngPurpose::kLmr);
  RandomStream mislead_rng = make_stream(cfg.seed, RngPurpose::kMisleadingLabels);
  RandomStream valsplit_rng = make_stream(cfg.seed, RngPurpose::kValidationSplit);

  // Validation recordings carved from the training set, never mixed with it.
  std::vector<int> rec_ids(data.recording_ids);
  std::sort(rec_ids.begin(), rec_ids.end());
  rec_ids.erase(std::unique(rec_ids.begin(), rec_ids.end()), rec_ids.end());
  std::set<int> val_recs;
  if (cfg.validation_fraction > 0 && rec_ids.size() >= 2) {
    std::vector<int> pool = rec_ids;
    valsplit_rng.shuffle(pool);
    auto n_val = static_cast<std::size_t>(
        std::llround(cfg.validation_fraction * static_cast<double>(pool.size())));
    n_val = std::min(std::max<std::size_t>(n_val, 1), pool.size() - 1);
    val_recs.insert(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_val));
  }
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < data.size(); ++i)
    (val_recs.count(data.recording_ids[i]) ? val_idx : train_idx).push_back(i);
  if (train_idx.empty()) throw InvalidInput("train: validation split consumed all data");
  const std::vector<std::size_t>& eval_idx = val_idx.empty() ? train_idx : val_idx;

  AdamW<T> opt(cfg.weight_decay);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  TrainOutput<T> out;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double mult = lr_schedule(epoch, cfg);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr_multiplier = mult;

    const bool run_adv = cfg.adversarial_enabled && cfg.aux_enabled && !net.pruned() &&
                         epoch != cfg.epochs - 1;
    if (run_adv) {
      std::vector<std::size_t> order = train_idx;
      shuffle_rng.shuffle(order);
      double adv_sum = 0.0;
      for (std::size_t begin = 0; begin < order.size(); begin += bs) {
        const std::size_t end = std::min(order.size(), begin + bs);
        Tensor<T> x = train_detail::make_batch(data, order, begin, end);
        const auto misleading =
            sample_misleading_labels(net.n_aux(), end - begin, mislead_rng);
        adv_sum += adv_step(net, opt, x, misleading, cfg.lr_adv * mult) *
                   static_cast<double>(end - begin);
      }
      rec.loss_adv = adv_sum / static_cast<double>(order.size());
    }

    {
      std::vector<std::size_t> order = train_idx;
      shuffle_rng.shuffle(order);
      double recog_sum = 0.0, aux_sum = 0.0;
      for (std::size_t begin = 0; begin < order.size(); begin += bs) {
        const std::size_t end = std::min(order.size(), begin + bs);
        Tensor<T> x = train_detail::make_batch(data, order, begin, end);
        if (cfg.lmr_enabled) x = lmr(x, cfg.lmr, lmr_rng);
        const auto y = train_detail::gather(data.labels, order, begin, end);
        const auto y_aux = train_detail::gather(data.aux_labels, order, begin, end);
        const StepLosses losses =
            mt_step(net, opt, x, y, y_aux, cfg.lr_mt * mult, cfg.aux_enabled);
        recog_sum += losses.recognition * static_cast<double>(end - begin);
        if (losses.auxiliary) aux_sum += *losses.auxiliary * static_cast<double>(end - begin);
      }
      rec.loss_recog = recog_sum / static_cast<double>(order.size());
      if (cfg.aux_enabled) rec.loss_aux = aux_sum / static_cast<double>(order.size());
    }

    // Validation always follows the multi-task pass.
    {
      const Predictions<T> preds = predict_set(net, data, eval_idx, cfg.batch_size);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < eval_idx.size(); ++i)
        if (preds.recognition[i] == data.labels[eval_idx[i]]) ++correct;
      rec.val_accuracy = static_cast<double>(correct) / static_cast<double>(eval_idx.size());
      if (cfg.aux_enabled && !preds.auxiliary.empty()) {
        std::size_t aux_correct = 0, aux_total = 0;
        for (std::size_t i = 0; i < eval_idx.size(); ++i) {
          if (data.aux_labels[eval_idx[i]] == kExcludedLabel) continue;
          ++aux_total;
          if (preds.auxiliary[i] == data.aux_labels[eval_idx[i]]) ++aux_correct;
        }
        if (aux_total > 0)
          rec.val_aux_accuracy =
              static_cast<double>(aux_correct) / static_cast<double>(aux_total);
      }
    }

    if (out.best_epoch < 0 || rec.val_accuracy > out.best_val_accuracy) {
      out.best_val_accuracy = rec.val_accuracy;
      out.best_epoch = epoch;
      out.best_state = snapshot_state(net);
    }
    out.history.epochs.push_back(rec);
  }
  return out;
}

}  // namespace amt

#endif  // AMT_TRAINING_HPP_
