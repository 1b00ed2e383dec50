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

// amt: feature extraction, synthetic corpus generation, training, evaluation,
// prediction, embedding export, branch pruning, and plot emission.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "amt/config.hpp"
#include "amt/dataset.hpp"
#include "amt/evaluation.hpp"
#include "amt/features.hpp"
#include "amt/network.hpp"
#include "amt/synthetic.hpp"
#include "amt/training.hpp"
#include "amt/wav.hpp"

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config_path;
  std::string out_dir;
  std::string feature;
  std::string factor;
  std::string data_root;
  std::string checkpoint;
  std::string input;
  std::string kind = "spectrogram";
  std::string embeddings_dir;
  std::uint64_t seed = 0;
  int epochs = 0;
  double width = 0.0;
  bool no_adversarial = false;
  bool synthetic = false;
  bool force = false;
  bool multi_seed = false;
};

// Shared option wiring; each subcommand opts into the pieces it uses.
void add_common_options(CLI::App* cmd, Flags* f) {
  cmd->add_option("--config", f->config_path, "JSON config file");
  cmd->add_option("--out", f->out_dir, "output directory");
  cmd->add_option("--feature", f->feature, "feature kind")
      ->check(CLI::IsMember({"spectrogram", "mel", "cqt"}));
  cmd->add_option("--factor", f->factor, "auxiliary factor")
      ->check(CLI::IsMember({"range", "depth", "wind"}));
  cmd->add_option("--seed", f->seed, "seed for every random stream");
  cmd->add_option("--epochs", f->epochs, "training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--data-root", f->data_root, "corpus directory (default $AMT_DATA_ROOT)");
  cmd->add_flag("--no-adversarial", f->no_adversarial, "disable the adversarial stage");
  cmd->add_flag("--synthetic", f->synthetic, "use the built-in synthetic corpus");
}

// Precedence: flags > config file > defaults.
amt::RunConfig resolve_config(const CLI::App* cmd, const Flags& f) {
  amt::RunConfig cfg;
  if (!f.config_path.empty()) cfg = amt::load_run_config(f.config_path, cfg);
  if (cmd->count("--out") > 0) cfg.out_dir = f.out_dir;
  if (cmd->count("--feature") > 0) cfg.feature = amt::feature_kind_from_name(f.feature);
  if (cmd->count("--factor") > 0) cfg.train.factor = amt::factor_from_name(f.factor);
  if (cmd->count("--seed") > 0) {
    cfg.train.seed = f.seed;
    cfg.seeds = {f.seed};
  }
  if (cmd->count("--epochs") > 0) cfg.train.epochs = f.epochs;
  if (cmd->count("--data-root") > 0) cfg.data_root = f.data_root;
  if (f.no_adversarial) cfg.train.adversarial_enabled = false;
  if (f.synthetic) cfg.synthetic = true;
  if (cfg.data_root.empty()) {
    const char* env = std::getenv("AMT_DATA_ROOT");
    if (env != nullptr) cfg.data_root = env;
  }
  cfg.validate();
  return cfg;
}

void emit_resolved_config(const amt::RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  amt::write_run_config(cfg.out_dir + "/config.json", cfg);
}

struct Corpus {
  amt::Dataset dataset;
  amt::SplitManifest manifest;
};

Corpus load_corpus(const amt::RunConfig& cfg) {
  Corpus corpus;
  if (cfg.synthetic) {
    amt::SyntheticDataset synth = amt::generate_synthetic(amt::SyntheticSpec{}, cfg.train.seed);
    corpus.dataset = std::move(synth.dataset);
    corpus.manifest = std::move(synth.manifest);
    return corpus;
  }
  if (cfg.data_root.empty())
    throw amt::ConfigError("no corpus: pass --data-root, set AMT_DATA_ROOT, or use --synthetic");
  std::ifstream meta_in(cfg.data_root + "/metadata.txt");
  if (!meta_in)
    throw amt::IngestError("cannot open " + cfg.data_root + "/metadata.txt");
  const std::vector<amt::RecordingMeta> metas = amt::parse_metadata_manifest(meta_in);
  std::ifstream split_in(cfg.data_root + "/split.txt");
  corpus.manifest = split_in ? amt::parse_split_manifest(split_in) : amt::default_split_manifest();
  corpus.dataset = amt::load_shipsear(cfg.data_root, metas);
  return corpus;
}

// The synthetic corpus runs at a low sample rate; honoring the configured
// rate would only upsample silence above the source Nyquist.
amt::FeatureConfig effective_feature_config(const amt::RunConfig& cfg, const amt::Dataset& ds) {
  amt::FeatureConfig fcfg = cfg.feature_cfg;
  if (cfg.synthetic && !ds.waveforms.empty() &&
      ds.waveforms[0].sample_rate < fcfg.sample_rate) {
    fcfg.sample_rate = ds.waveforms[0].sample_rate;
    if (fcfg.band_hi > fcfg.sample_rate / 2.0) fcfg.band_hi = 0.0;
    if (fcfg.n_mels > 64) fcfg.n_mels = 64;
    if (fcfg.time_pool < 10) fcfg.time_pool = 10;
  }
  return fcfg;
}

std::string cache_name(int recording_id, int segment_index, amt::FeatureKind kind) {
  std::ostringstream name;
  name << recording_id << '_' << segment_index << '_' << amt::feature_kind_name(kind)
       << ".amtf";
  return name.str();
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_synth(const amt::RunConfig& cfg) {
  emit_resolved_config(cfg);
  amt::SyntheticDataset synth = amt::generate_synthetic(amt::SyntheticSpec{}, cfg.train.seed);
  const std::string dir = cfg.out_dir + "/corpus";
  fs::create_directories(dir);
  for (std::size_t i = 0; i < synth.dataset.recordings.size(); ++i) {
    const auto& meta = synth.dataset.recordings[i];
    amt::write_wav_float32(dir + "/" + std::to_string(meta.id) + ".wav",
                           {synth.dataset.waveforms[i].samples},
                           synth.dataset.waveforms[i].sample_rate);
  }
  std::ofstream meta_out(dir + "/metadata.txt", std::ios::binary);
  meta_out << amt::serialize_metadata_manifest(synth.dataset.recordings);
  std::ofstream split_out(dir + "/split.txt", std::ios::binary);
  split_out << amt::serialize_split_manifest(synth.manifest);
  if (!meta_out || !split_out) throw amt::IoError("synth: manifest write failed");
  std::cout << "wrote " << synth.dataset.recordings.size() << " recordings to " << dir << "\n";
  return 0;
}

int cmd_extract(const amt::RunConfig& cfg, bool force) {
  emit_resolved_config(cfg);
  const Corpus corpus = load_corpus(cfg);
  const amt::FeatureConfig fcfg = effective_feature_config(cfg, corpus.dataset);
  const std::string dir = cfg.out_dir + "/cache";
  fs::create_directories(dir);
  std::size_t written = 0, skipped = 0, failures = 0;
  for (std::size_t r = 0; r < corpus.dataset.recordings.size(); ++r) {
    const std::vector<amt::Segment> segments = amt::segment_recording(corpus.dataset, r);
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const std::string path =
          dir + "/" + cache_name(segments[s].recording_id, static_cast<int>(s), cfg.feature);
      if (!force && fs::exists(path)) {
        ++skipped;
        continue;
      }
      try {
        const amt::FeatureMap map = amt::compute_feature(
            amt::segment_waveform(corpus.dataset, segments[s]), fcfg, cfg.feature);
        amt::write_feature_cache(path, map);
        ++written;
      } catch (const amt::Error& e) {
        ++failures;
        std::cerr << "recording " << segments[s].recording_id << " segment " << s << ": "
                  << e.what() << "\n";
      }
    }
  }
  std::cout << "cache: " << written << " written, " << skipped << " skipped, " << failures
            << " failed\n";
  return failures == 0 ? 0 : 1;
}

struct PreparedData {
  amt::TrainSet<float> train;
  amt::TrainSet<float> test;
  amt::Split split;
  amt::FeatureConfig fcfg;
  int n_class = 0;
};

PreparedData prepare_data(const amt::RunConfig& cfg) {
  PreparedData out;
  Corpus corpus = load_corpus(cfg);
  out.fcfg = effective_feature_config(cfg, corpus.dataset);
  out.split = amt::build_split(corpus.manifest, corpus.dataset);
  out.train = amt::make_train_set<float>(corpus.dataset, out.split.train, out.fcfg, cfg.feature,
                                         cfg.train.factor);
  out.test = amt::make_train_set<float>(corpus.dataset, out.split.test, out.fcfg, cfg.feature,
                                        cfg.train.factor);
  out.n_class = static_cast<int>(corpus.dataset.categories.size());
  return out;
}

int cmd_train(const amt::RunConfig& cfg) {
  emit_resolved_config(cfg);
  const PreparedData data = prepare_data(cfg);
  const int n_aux = amt::aux_task_spec(cfg.train.factor).n_aux;
  amt::AMTNet<float> net(data.n_class, n_aux, cfg.train.width_mult);
  net.init(cfg.train.seed);
  amt::TrainOutput<float> result = amt::train(net, data.train, cfg.train);

  const std::string config_json = amt::serialize_run_config(cfg);
  amt::save_checkpoint(cfg.out_dir + "/final.amtc", net, config_json);
  amt::restore_state(net, result.best_state);
  amt::save_checkpoint(cfg.out_dir + "/best.amtc", net, config_json);
  std::ofstream log(cfg.out_dir + "/history.jsonl", std::ios::binary);
  log << result.history.to_jsonl();
  if (!log) throw amt::IoError("train: cannot write history.jsonl");

  const amt::SplitEvaluation eval = amt::evaluate_set(net, data.test, cfg.train.batch_size);
  std::cout << "best epoch " << result.best_epoch << ", val accuracy "
            << result.best_val_accuracy << ", test accuracy " << eval.recognition_accuracy
            << "\n";
  return 0;
}

int cmd_eval(const amt::RunConfig& cfg, const std::string& checkpoint, bool multi_seed) {
  emit_resolved_config(cfg);
  std::ostringstream report;
  if (multi_seed) {
    const amt::EvalReport rep =
        amt::multi_seed_report(cfg.seeds, [&cfg](std::uint64_t seed) {
          amt::RunConfig run = cfg;
          run.train.seed = seed;
          const PreparedData data = prepare_data(run);
          const int n_aux = amt::aux_task_spec(run.train.factor).n_aux;
          amt::AMTNet<float> net(data.n_class, n_aux, run.train.width_mult);
          net.init(seed);
          amt::TrainOutput<float> result = amt::train(net, data.train, run.train);
          amt::restore_state(net, result.best_state);
          const amt::SplitEvaluation ev = amt::evaluate_set(net, data.test, run.train.batch_size);
          amt::SeedRun sr;
          sr.recognition_accuracy = ev.recognition_accuracy;
          sr.auxiliary_accuracy = ev.auxiliary_accuracy;
          sr.confusion = ev.confusion;
          return sr;
        });
    report << rep.serialize();
    std::cout << "recognition: " << rep.summary() << "\n";
  } else {
    if (checkpoint.empty()) throw amt::ConfigError("eval: --checkpoint required");
    const amt::Checkpoint ck = amt::read_checkpoint(checkpoint);
    auto net = amt::network_from_checkpoint<float>(ck);
    const PreparedData data = prepare_data(cfg);
    const amt::SplitEvaluation ev = amt::evaluate_set(*net, data.test, cfg.train.batch_size);
    report << "accuracy: " << ev.recognition_accuracy << "\n";
    if (ev.auxiliary_accuracy) report << "auxiliary_accuracy: " << *ev.auxiliary_accuracy << "\n";
    for (const auto& row : ev.confusion) {
      report << "confusion:";
      for (long long c : row) report << ' ' << c;
      report << "\n";
    }
    std::cout << "test accuracy " << ev.recognition_accuracy << " over " << data.test.size()
              << " segments\n";
  }
  std::ofstream out(cfg.out_dir + "/report.txt", std::ios::binary);
  out << report.str();
  if (!out) throw amt::IoError("eval: cannot write report.txt");
  return 0;
}

int cmd_predict(const amt::RunConfig& cfg, const std::string& checkpoint,
                const std::string& input) {
  emit_resolved_config(cfg);
  if (checkpoint.empty() || input.empty())
    throw amt::ConfigError("predict: --checkpoint and --input required");
  const amt::Checkpoint ck = amt::read_checkpoint(checkpoint);
  auto net = amt::network_from_checkpoint<float>(ck);
  const amt::Waveform wave = amt::read_wav_mono(input);
  const std::vector<double> starts = amt::segment_starts(wave.duration_s());
  if (starts.empty()) throw amt::SignalTooShort("predict: input shorter than one segment");
  amt::FeatureConfig fcfg = cfg.feature_cfg;
  std::ofstream out(cfg.out_dir + "/predictions.txt", std::ios::binary);
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const amt::FeatureMap map = amt::compute_feature(
        wave.slice(starts[s], amt::kSegmentSeconds), fcfg, cfg.feature);
    const amt::ClassPrediction pred = amt::classify(*net, map.values);
    out << starts[s] << ", " << pred.label;
    for (double p : pred.probabilities) out << ", " << p;
    out << "\n";
    std::cout << "t=" << starts[s] << "s -> class " << pred.label << " (p="
              << pred.probabilities[static_cast<std::size_t>(pred.label)] << ")\n";
  }
  if (!out) throw amt::IoError("predict: cannot write predictions.txt");
  return 0;
}

int cmd_embed(const amt::RunConfig& cfg, const std::string& checkpoint) {
  emit_resolved_config(cfg);
  if (checkpoint.empty()) throw amt::ConfigError("embed: --checkpoint required");
  const amt::Checkpoint ck = amt::read_checkpoint(checkpoint);
  auto net = amt::network_from_checkpoint<float>(ck);
  Corpus corpus = load_corpus(cfg);
  const amt::FeatureConfig fcfg = effective_feature_config(cfg, corpus.dataset);
  const amt::Split split = amt::build_split(corpus.manifest, corpus.dataset);
  const amt::TrainSet<float> data = amt::make_train_set<float>(
      corpus.dataset, split.test, fcfg, cfg.feature, cfg.train.factor);
  const amt::EmbeddingTables tables =
      amt::compute_embeddings(*net, data, cfg.train.batch_size);
  amt::write_embedding_export(cfg.out_dir, tables, data, corpus.dataset.categories);
  std::cout << "exported " << data.size() << " embeddings to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_prune(const amt::RunConfig& cfg, const std::string& checkpoint) {
  emit_resolved_config(cfg);
  if (checkpoint.empty()) throw amt::ConfigError("prune: --checkpoint required");
  const amt::Checkpoint ck = amt::read_checkpoint(checkpoint);
  auto net = amt::network_from_checkpoint<float>(ck);
  const std::size_t full = net->parameter_count();
  net->prune_aux();
  const std::size_t pruned = net->parameter_count();
  amt::save_checkpoint(cfg.out_dir + "/pruned.amtc", *net, ck.config_json);
  std::cout << "parameters " << full << " -> " << pruned << " (ratio "
            << static_cast<double>(pruned) / static_cast<double>(full) << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Plot emission: PPM spectrogram images and t-SNE embedding scatters
// ---------------------------------------------------------------------------

struct Image {
  std::size_t width = 0, height = 0;
  std::vector<unsigned char> rgb;  // row-major, 3 bytes per pixel

  Image(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 255) {}
  void set(std::size_t x, std::size_t y, unsigned char r, unsigned char g, unsigned char b) {
    if (x >= width || y >= height) return;
    unsigned char* p = &rgb[(y * width + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
};

void write_ppm(const std::string& path, const Image& img) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw amt::IoError("plot: cannot open " + path);
  std::fprintf(f, "P6\n%zu %zu\n255\n", img.width, img.height);
  const bool ok = std::fwrite(img.rgb.data(), 1, img.rgb.size(), f) == img.rgb.size();
  std::fclose(f);
  if (!ok) throw amt::IoError("plot: short write on " + path);
}

// Dark-blue to yellow ramp; perceptually ordered enough for magnitudes.
void heat_color(double v, unsigned char* rgb) {
  v = std::min(1.0, std::max(0.0, v));
  rgb[0] = static_cast<unsigned char>(255.0 * std::min(1.0, 2.0 * v));
  rgb[1] = static_cast<unsigned char>(255.0 * std::min(1.0, std::max(0.0, 1.6 * v - 0.3)));
  rgb[2] = static_cast<unsigned char>(255.0 * std::max(0.0, 0.9 - 1.2 * v));
}

void spectrogram_image(const amt::Tensor<float>& values, const std::string& path) {
  const std::size_t frames = values.dim(0), bins = values.dim(1);
  float lo = values.data()[0], hi = values.data()[0];
  for (std::size_t i = 0; i < values.numel(); ++i) {
    lo = std::min(lo, values.data()[i]);
    hi = std::max(hi, values.data()[i]);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  Image img(frames, bins);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t b = 0; b < bins; ++b) {
      unsigned char rgb[3];
      heat_color((values.at2(t, b) - lo) / span, rgb);
      img.set(t, bins - 1 - b, rgb[0], rgb[1], rgb[2]);  // low frequencies at the bottom
    }
  }
  write_ppm(path, img);
}

// Exact t-SNE (quadratic in N); fine for the corpus sizes this tool plots.
std::vector<std::array<double, 2>> tsne_2d(const amt::Tensor<float>& x, double perplexity,
                                           std::uint64_t seed) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (n < 3) throw amt::InvalidInput("tsne: need at least three rows");
  perplexity = std::min(perplexity, static_cast<double>(n - 1) / 3.0);

  std::vector<double> d2(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = static_cast<double>(x.at2(i, k)) - static_cast<double>(x.at2(j, k));
        acc += diff * diff;
      }
      d2[i * n + j] = d2[j * n + i] = acc;
    }

  // Per-point precision via bisection on the entropy.
  std::vector<double> p(n * n, 0.0);
  const double target = std::log(perplexity);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0, beta_lo = 0.0, beta_hi = 1e300;
    for (int it = 0; it < 64; ++it) {
      double sum = 0.0, dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = std::exp(-beta * d2[i * n + j]);
        sum += w;
        dot += w * d2[i * n + j];
      }
      const double entropy = sum > 0 ? std::log(sum) + beta * dot / sum : 0.0;
      if (std::abs(entropy - target) < 1e-5) break;
      if (entropy > target) {
        beta_lo = beta;
        beta = beta_hi > 1e299 ? beta * 2.0 : (beta + beta_hi) / 2.0;
      } else {
        beta_hi = beta;
        beta = (beta + beta_lo) / 2.0;
      }
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sum += std::exp(-beta * d2[i * n + j]);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) p[i * n + j] = std::exp(-beta * d2[i * n + j]) / std::max(sum, 1e-300);
  }
  // Symmetrize.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::max((p[i * n + j] + p[j * n + i]) / (2.0 * n), 1e-12);
      p[i * n + j] = p[j * n + i] = v;
    }

  amt::RandomStream rng(seed);
  std::vector<std::array<double, 2>> y(n), inc(n, {0.0, 0.0});
  for (auto& pt : y) pt = {rng.normal() * 1e-4, rng.normal() * 1e-4};

  const int iters = 500;
  std::vector<double> q(n * n);
  std::vector<std::array<double, 2>> grad(n);
  for (int it = 0; it < iters; ++it) {
    const double exaggeration = it < 100 ? 4.0 : 1.0;
    const double momentum = it < 250 ? 0.5 : 0.8;
    double qsum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dy0 = y[i][0] - y[j][0], dy1 = y[i][1] - y[j][1];
        const double w = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
        q[i * n + j] = q[j * n + i] = w;
        qsum += 2.0 * w;
      }
    for (auto& g : grad) g = {0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = q[i * n + j];
        const double coeff = 4.0 * (exaggeration * p[i * n + j] - w / qsum) * w;
        grad[i][0] += coeff * (y[i][0] - y[j][0]);
        grad[i][1] += coeff * (y[i][1] - y[j][1]);
      }
    for (std::size_t i = 0; i < n; ++i)
      for (int k = 0; k < 2; ++k) {
        inc[i][k] = momentum * inc[i][k] - 200.0 * grad[i][k];
        y[i][k] += inc[i][k];
      }
  }
  return y;
}

void scatter_image(const std::vector<std::array<double, 2>>& pts,
                   const std::vector<int>& colors, const std::string& path) {
  static const unsigned char palette[13][3] = {
      {31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},  {148, 103, 189},
      {140, 86, 75},  {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207},
      {0, 0, 0},      {255, 0, 255},  {170, 170, 170}};  // last entry: unlabeled
  double lo0 = pts[0][0], hi0 = pts[0][0], lo1 = pts[0][1], hi1 = pts[0][1];
  for (const auto& pt : pts) {
    lo0 = std::min(lo0, pt[0]);
    hi0 = std::max(hi0, pt[0]);
    lo1 = std::min(lo1, pt[1]);
    hi1 = std::max(hi1, pt[1]);
  }
  const double s0 = hi0 > lo0 ? hi0 - lo0 : 1.0, s1 = hi1 > lo1 ? hi1 - lo1 : 1.0;
  const std::size_t size = 512, margin = 16;
  Image img(size, size);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto x = static_cast<std::size_t>(
        margin + (pts[i][0] - lo0) / s0 * static_cast<double>(size - 2 * margin));
    const auto y = static_cast<std::size_t>(
        margin + (pts[i][1] - lo1) / s1 * static_cast<double>(size - 2 * margin));
    const int c = colors[i] >= 0 && colors[i] < 12 ? colors[i] : 12;
    for (std::size_t dx = 0; dx < 3; ++dx)
      for (std::size_t dy = 0; dy < 3; ++dy)
        img.set(x + dx - 1, y + dy - 1, palette[c][0], palette[c][1], palette[c][2]);
  }
  write_ppm(path, img);
}

int cmd_plot(const amt::RunConfig& cfg, const Flags& f) {
  emit_resolved_config(cfg);
  if (f.kind == "spectrogram") {
    if (f.input.empty()) throw amt::ConfigError("plot: --input WAV required");
    const amt::Waveform wave = amt::read_wav_mono(f.input);
    const std::vector<double> starts = amt::segment_starts(wave.duration_s());
    if (starts.empty()) throw amt::SignalTooShort("plot: input shorter than one segment");
    const amt::FeatureMap map = amt::compute_feature(
        wave.slice(starts[0], amt::kSegmentSeconds), cfg.feature_cfg, cfg.feature);
    const std::string path = cfg.out_dir + "/spectrogram.ppm";
    spectrogram_image(map.values, path);
    std::cout << "wrote " << path << "\n";
    return 0;
  }
  if (f.kind == "embedding") {
    if (f.embeddings_dir.empty())
      throw amt::ConfigError("plot: --embeddings directory required (from `amt embed`)");
    const amt::FeatureMap head =
        amt::read_feature_cache(f.embeddings_dir + "/embeddings.amtf");
    std::ifstream index_in(f.embeddings_dir + "/index.txt");
    if (!index_in) throw amt::IoError("plot: cannot open index.txt");
    std::vector<int> category_color, factor_color;
    const auto& names = amt::canonical_categories();
    std::string line;
    while (std::getline(index_in, line)) {
      if (line.empty()) continue;
      std::stringstream row(line);
      std::string id, category, aux;
      std::getline(row, id, ',');
      std::getline(row, category, ',');
      std::getline(row, aux, ',');
      category = category.substr(category.find_first_not_of(' '));
      const auto it = std::find(names.begin(), names.end(), category);
      category_color.push_back(
          it == names.end() ? -1 : static_cast<int>(it - names.begin()));
      factor_color.push_back(std::stoi(aux));
    }
    if (category_color.size() != head.values.dim(0))
      throw amt::InvalidInput("plot: index rows do not match embedding rows");
    const auto pts = tsne_2d(head.values, 30.0, cfg.train.seed);
    scatter_image(pts, category_color, cfg.out_dir + "/embedding_by_category.ppm");
    scatter_image(pts, factor_color, cfg.out_dir + "/embedding_by_factor.ppm");
    std::cout << "wrote " << cfg.out_dir << "/embedding_by_{category,factor}.ppm\n";
    return 0;
  }
  throw amt::ConfigError("plot: unknown --kind '" + f.kind + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial multi-task underwater target recognition toolkit"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* synth = app.add_subcommand("synth", "generate the synthetic corpus as WAVs");
  CLI::App* extract = app.add_subcommand("extract", "extract per-segment feature caches");
  extract->add_flag("--force", f.force, "overwrite existing cache files");
  CLI::App* train = app.add_subcommand("train", "train a model");
  CLI::App* eval = app.add_subcommand("eval", "evaluate on the test split");
  eval->add_option("--checkpoint", f.checkpoint, "checkpoint to evaluate");
  eval->add_flag("--multi-seed", f.multi_seed, "train and evaluate every configured seed");
  CLI::App* predict = app.add_subcommand("predict", "classify the segments of one WAV");
  predict->add_option("--checkpoint", f.checkpoint, "trained checkpoint");
  predict->add_option("--input", f.input, "input WAV file");
  CLI::App* embed = app.add_subcommand("embed", "export test-split embeddings");
  embed->add_option("--checkpoint", f.checkpoint, "trained checkpoint");
  CLI::App* prune = app.add_subcommand("prune", "drop the auxiliary branch from a checkpoint");
  prune->add_option("--checkpoint", f.checkpoint, "checkpoint to prune");
  CLI::App* plot = app.add_subcommand("plot", "emit spectrogram or embedding images");
  plot->add_option("--kind", f.kind, "plot kind")
      ->check(CLI::IsMember({"spectrogram", "embedding"}));
  plot->add_option("--input", f.input, "input WAV for spectrogram plots");
  plot->add_option("--embeddings", f.embeddings_dir, "directory written by `amt embed`");
  for (CLI::App* cmd : {synth, extract, train, eval, predict, embed, prune, plot})
    add_common_options(cmd, &f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    const amt::RunConfig cfg = resolve_config(cmd, f);
    if (cmd == synth) return cmd_synth(cfg);
    if (cmd == extract) return cmd_extract(cfg, f.force);
    if (cmd == train) return cmd_train(cfg);
    if (cmd == eval) return cmd_eval(cfg, f.checkpoint, f.multi_seed);
    if (cmd == predict) return cmd_predict(cfg, f.checkpoint, f.input);
    if (cmd == embed) return cmd_embed(cfg, f.checkpoint);
    if (cmd == prune) return cmd_prune(cfg, f.checkpoint);
    if (cmd == plot) return cmd_plot(cfg, f);
    return 2;
  } catch (const amt::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
