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

// Segment-level metrics, multi-seed aggregation, embedding export, and the
// cosine-similarity robustness analysis. All metrics operate on 30-second
// segments, never on whole record files.

#ifndef AMT_EVALUATION_HPP_
#define AMT_EVALUATION_HPP_

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "amt/dataset.hpp"
#include "amt/features.hpp"
#include "amt/network.hpp"
#include "amt/training.hpp"
#include "amt/waveform.hpp"

namespace amt {

// ---------------------------------------------------------------------------
// Per-segment prediction
// ---------------------------------------------------------------------------

struct ClassPrediction {
  int label = 0;
  std::vector<double> probabilities;
};

// Single-segment classification. Argmax ties resolve to the lowest index.
template <typename T>
ClassPrediction classify(AMTNet<T>& net, const Tensor<T>& feature) {
  if (feature.rank() != 2) throw ShapeError("classify: feature must be (frames, bins)");
  net.set_train(false);
  Tensor<T> x({1, 1, feature.dim(0), feature.dim(1)});
  std::copy_n(feature.data(), feature.numel(), x.data());
  ForwardResult<T> fwd = net.forward(x, false);
  const Tensor<T> p = softmax_rows(fwd.main_logits);
  ClassPrediction out;
  out.probabilities.resize(p.dim(1));
  for (std::size_t j = 0; j < p.dim(1); ++j) {
    out.probabilities[j] = static_cast<double>(p.at2(0, j));
    if (out.probabilities[j] > out.probabilities[static_cast<std::size_t>(out.label)])
      out.label = static_cast<int>(j);
  }
  return out;
}

template <typename T>
int predict_class(AMTNet<T>& net, const Tensor<T>& feature) {
  return classify(net, feature).label;
}

inline double segment_accuracy(const std::vector<int>& predictions,
                               const std::vector<int>& labels) {
  if (predictions.empty()) throw InvalidInput("segment_accuracy: empty input");
  if (predictions.size() != labels.size())
    throw InvalidInput("segment_accuracy: length mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

inline std::vector<std::vector<long long>> confusion_matrix(const std::vector<int>& predictions,
                                                            const std::vector<int>& labels,
                                                            int n_class) {
  if (predictions.size() != labels.size())
    throw InvalidInput("confusion_matrix: length mismatch");
  std::vector<std::vector<long long>> counts(
      static_cast<std::size_t>(n_class),
      std::vector<long long>(static_cast<std::size_t>(n_class), 0));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_class || predictions[i] < 0 ||
        predictions[i] >= n_class)
      throw InvalidInput("confusion_matrix: class index out of range");
    ++counts[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
  }
  return counts;
}

// ---------------------------------------------------------------------------
// Multi-seed aggregation
// ---------------------------------------------------------------------------

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) throw InvalidInput("mean_of: empty input");
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

inline double population_stdev(const std::vector<double>& xs) {
  const double mu = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

// Seed-spread convention: population stdev divided by sqrt(n). Two runs at
// 75.00% and 76.19% report 75.60 +/- 0.42.
inline double multi_seed_stdev(const std::vector<double>& xs) {
  return population_stdev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

// Percent with two decimals, rounding half away from zero in decimal space.
// Accuracies enter with at most four meaningful decimals, so the mean of
// 0.7500 and 0.7619 must print as 75.60 even though the nearest binary double
// to 75.595 sits just below the decimal midpoint.
inline std::string format_percent(double pct) {
  const long long micro = std::llround(pct * 1e6);
  const long long hund = (micro + (micro >= 0 ? 5000 : -5000)) / 10000;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%lld.%02lld", hund < 0 ? "-" : "",
                std::llabs(hund) / 100, std::llabs(hund) % 100);
  return buf;
}

inline std::string format_mean_stdev(double mean_frac, double stdev_frac) {
  return format_percent(mean_frac * 100.0) + " ± " + format_percent(stdev_frac * 100.0);
}

// One seed's train+eval outcome, as produced by the injected runner.
struct SeedRun {
  double recognition_accuracy = 0.0;
  std::optional<double> auxiliary_accuracy;
  std::vector<std::vector<long long>> confusion;  // may be empty
};

struct EvalReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> recognition_accuracies;
  std::vector<double> auxiliary_accuracies;  // populated only if every seed reported one
  double recognition_mean = 0.0;
  double recognition_stdev = 0.0;
  std::optional<double> auxiliary_mean;
  std::optional<double> auxiliary_stdev;
  std::vector<std::vector<long long>> confusion;  // summed over seeds

  std::string summary() const { return format_mean_stdev(recognition_mean, recognition_stdev); }

  void validate() const {
    for (double a : recognition_accuracies)
      if (a < 0.0 || a > 1.0) throw InvalidInput("eval report: accuracy outside [0, 1]");
    for (double a : auxiliary_accuracies)
      if (a < 0.0 || a > 1.0) throw InvalidInput("eval report: accuracy outside [0, 1]");
    if (recognition_stdev < 0.0) throw InvalidInput("eval report: negative stdev");
  }

  std::string serialize() const {
    std::ostringstream out;
    out << "seeds:";
    for (auto s : seeds) out << ' ' << s;
    out << '\n';
    out << "recognition: " << summary() << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < recognition_accuracies.size(); ++i)
      out << "seed_accuracy: " << seeds[i] << ' ' << recognition_accuracies[i] << '\n';
    if (auxiliary_mean)
      out << "auxiliary: " << format_mean_stdev(*auxiliary_mean, *auxiliary_stdev) << '\n';
    for (const auto& row : confusion) {
      out << "confusion:";
      for (long long c : row) out << ' ' << c;
      out << '\n';
    }
    return out.str();
  }
};

// Runs the injected per-seed pipeline (signature: SeedRun(uint64_t seed)) and
// aggregates. A failed seed propagates and fails the whole report.
template <typename Runner>
EvalReport multi_seed_report(const std::vector<std::uint64_t>& seeds, Runner&& run_seed) {
  if (seeds.empty()) throw InvalidInput("multi_seed_report: need at least one seed");
  EvalReport report;
  report.seeds = seeds;
  bool aux_everywhere = true;
  for (std::uint64_t seed : seeds) {
    const SeedRun run = run_seed(seed);
    report.recognition_accuracies.push_back(run.recognition_accuracy);
    if (run.auxiliary_accuracy)
      report.auxiliary_accuracies.push_back(*run.auxiliary_accuracy);
    else
      aux_everywhere = false;
    if (!run.confusion.empty()) {
      if (report.confusion.empty())
        report.confusion.assign(run.confusion.size(),
                                std::vector<long long>(run.confusion.size(), 0));
      for (std::size_t i = 0; i < run.confusion.size(); ++i)
        for (std::size_t j = 0; j < run.confusion[i].size(); ++j)
          report.confusion[i][j] += run.confusion[i][j];
    }
  }
  report.recognition_mean = mean_of(report.recognition_accuracies);
  report.recognition_stdev = multi_seed_stdev(report.recognition_accuracies);
  if (aux_everywhere && !report.auxiliary_accuracies.empty()) {
    report.auxiliary_mean = mean_of(report.auxiliary_accuracies);
    report.auxiliary_stdev = multi_seed_stdev(report.auxiliary_accuracies);
  } else {
    report.auxiliary_accuracies.clear();
  }
  report.validate();
  return report;
}

// ---------------------------------------------------------------------------
// Cosine similarity and the robustness analysis
// ---------------------------------------------------------------------------

template <typename T>
double cosine_similarity(const T* a, const T* b, std::size_t n) {
  if (n == 0) throw InvalidInput("cosine_similarity: empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  if (na == 0.0 || nb == 0.0) throw DegenerateEmbedding("cosine_similarity: zero-norm vector");
  const double sim = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::min(1.0, std::max(-1.0, sim));
}

template <typename T>
double cosine_similarity(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.size() != b.size()) throw InvalidInput("cosine_similarity: length mismatch");
  return cosine_similarity(a.data(), b.data(), a.size());
}

struct RobustnessResult {
  std::vector<std::vector<double>> pairwise;  // symmetric, unit diagonal
  double average = 0.0;                       // mean over distinct pairs
};

// Embeds the first 30 s of each recording and crosses all pairs. Intended for
// recordings of one target captured under different factor conditions.
template <typename T>
RobustnessResult robustness_analysis(AMTNet<T>& net, const std::vector<Waveform>& recordings,
                                     const FeatureConfig& fcfg, FeatureKind kind) {
  if (recordings.size() < 2)
    throw InvalidInput("robustness_analysis: need at least two recordings");
  net.set_train(false);
  std::vector<std::vector<T>> embeddings;
  for (const Waveform& rec : recordings) {
    if (rec.duration_s() + 1e-9 < kSegmentSeconds)
      throw InvalidInput("robustness_analysis: recording shorter than 30 s");
    const FeatureMap fm = compute_feature(rec.slice(0.0, kSegmentSeconds), fcfg, kind);
    Tensor<T> x({1, 1, fm.values.dim(0), fm.values.dim(1)});
    const Tensor<T> feat = fm.values.template cast<T>();
    std::copy_n(feat.data(), feat.numel(), x.data());
    ForwardResult<T> fwd = net.forward(x, false);
    embeddings.emplace_back(fwd.main_embedding.data(),
                            fwd.main_embedding.data() + fwd.main_embedding.numel());
  }
  const std::size_t n = embeddings.size();
  RobustnessResult out;
  out.pairwise.assign(n, std::vector<double>(n, 1.0));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double sim = cosine_similarity(embeddings[i], embeddings[j]);
      out.pairwise[i][j] = out.pairwise[j][i] = sim;
      sum += sim;
      ++pairs;
    }
  }
  out.average = sum / static_cast<double>(pairs);
  return out;
}

// ---------------------------------------------------------------------------
// Embedding export
// ---------------------------------------------------------------------------

struct EmbeddingTables {
  Tensor<float> head;    // (N, embedding_dim)
  Tensor<float> shared;  // (N, flattened shared-layer output)
};

template <typename T>
EmbeddingTables compute_embeddings(AMTNet<T>& net, const TrainSet<T>& data, int batch_size) {
  data.check();
  net.set_train(false);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  EmbeddingTables out;
  const auto bs = static_cast<std::size_t>(batch_size);
  std::size_t row = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += bs) {
    const std::size_t end = std::min(order.size(), begin + bs);
    Tensor<T> x = train_detail::make_batch(data, order, begin, end);
    ForwardResult<T> fwd = net.forward(x, false);
    const std::size_t edim = fwd.main_embedding.dim(1);
    const std::size_t sdim = fwd.representation.numel() / fwd.representation.dim(0);
    if (row == 0) {
      out.head = Tensor<float>({data.size(), edim});
      out.shared = Tensor<float>({data.size(), sdim});
    }
    for (std::size_t i = 0; i < end - begin; ++i, ++row) {
      for (std::size_t j = 0; j < edim; ++j)
        out.head.at2(row, j) = static_cast<float>(fwd.main_embedding.at2(i, j));
      const T* rep = fwd.representation.data() + i * sdim;
      for (std::size_t j = 0; j < sdim; ++j)
        out.shared.at2(row, j) = static_cast<float>(rep[j]);
    }
  }
  return out;
}

// Writes the two cache files plus a delimited index with one line per row:
// "recording_id, category, factor_label".
template <typename T>
void write_embedding_export(const std::string& dir, const EmbeddingTables& tables,
                            const TrainSet<T>& data, const std::vector<std::string>& categories) {
  write_feature_cache(dir + "/embeddings.amtf", {FeatureKind::kEmbedding, tables.head});
  write_feature_cache(dir + "/representations.amtf", {FeatureKind::kRepresentation, tables.shared});
  std::ostringstream index;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto label = static_cast<std::size_t>(data.labels[i]);
    if (label >= categories.size()) throw InvalidInput("embedding export: label out of range");
    index << data.recording_ids[i] << ", " << categories[label] << ", " << data.aux_labels[i]
          << '\n';
  }
  std::FILE* f = std::fopen((dir + "/index.txt").c_str(), "wb");
  if (f == nullptr) throw IoError("embedding export: cannot open index file");
  const std::string text = index.str();
  const std::size_t written = std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
  if (written != text.size()) throw IoError("embedding export: short write on index file");
}

// ---------------------------------------------------------------------------
// Whole-set evaluation
// ---------------------------------------------------------------------------

struct SplitEvaluation {
  double recognition_accuracy = 0.0;
  std::optional<double> auxiliary_accuracy;
  std::vector<std::vector<long long>> confusion;
  std::vector<int> predictions;
};

template <typename T>
SplitEvaluation evaluate_set(AMTNet<T>& net, const TrainSet<T>& data, int batch_size) {
  data.check();
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const Predictions<T> preds = predict_set(net, data, order, batch_size);
  SplitEvaluation out;
  out.predictions = preds.recognition;
  out.recognition_accuracy = segment_accuracy(preds.recognition, data.labels);
  out.confusion = confusion_matrix(preds.recognition, data.labels, net.n_class());
  if (!preds.auxiliary.empty()) {
    std::size_t correct = 0, total = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.aux_labels[i] == kExcludedLabel) continue;
      ++total;
      if (preds.auxiliary[i] == data.aux_labels[i]) ++correct;
    }
    if (total > 0)
      out.auxiliary_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  }
  return out;
}

}  // namespace amt

#endif  // AMT_EVALUATION_HPP_
