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

// Run configuration: a JSON file with keys under `feature.*`, `train.*` and
// `augmentation.lmr.*` plus a handful of top-level keys. Unknown keys are
// rejected and every problem in a file is reported in one pass.

#ifndef AMT_CONFIG_HPP_
#define AMT_CONFIG_HPP_

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "amt/augment.hpp"
#include "amt/common.hpp"
#include "amt/dataset.hpp"
#include "amt/features.hpp"
#include "amt/training.hpp"

namespace amt {

struct RunConfig {
  std::string data_root;  // corpus directory; empty defers to AMT_DATA_ROOT
  std::string out_dir = "out";
  FeatureKind feature = FeatureKind::kCqt;
  bool synthetic = false;
  std::vector<std::uint64_t> seeds = {123, 3407};
  FeatureConfig feature_cfg;
  TrainConfig train;

  void validate() const {
    train.validate();
    feature_cfg.validate();
    if (seeds.empty()) throw ConfigError("config: seeds must be non-empty");
  }
};

namespace config_detail {

using nlohmann::json;

class Reader {
 public:
  explicit Reader(std::vector<std::string>* errors) : errors_(errors) {}

  // Consumes obj[key] if present; type mismatches are recorded, not thrown.
  template <typename T>
  void take(json& obj, const std::string& path, const std::string& key, T* out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
      *out = it->template get<T>();
    } catch (const json::exception&) {
      errors_->push_back(path + key + ": wrong type");
    }
    obj.erase(it);
  }

  void take_enum(json& obj, const std::string& path, const std::string& key,
                 FeatureKind* out) {
    std::string text;
    bool present = obj.contains(key);
    take(obj, path, key, &text);
    if (!present || text.empty()) return;
    try {
      *out = feature_kind_from_name(text);
    } catch (const Error& e) {
      errors_->push_back(path + key + ": " + e.what());
    }
  }

  void take_enum(json& obj, const std::string& path, const std::string& key, Factor* out) {
    std::string text;
    bool present = obj.contains(key);
    take(obj, path, key, &text);
    if (!present || text.empty()) return;
    try {
      *out = factor_from_name(text);
    } catch (const Error& e) {
      errors_->push_back(path + key + ": " + e.what());
    }
  }

  // Anything still left in the object is an unknown key.
  void reject_leftovers(const json& obj, const std::string& path) {
    for (const auto& item : obj.items())
      errors_->push_back(path + item.key() + ": unknown key");
  }

 private:
  std::vector<std::string>* errors_;
};

inline void read_feature(json obj, Reader& r, FeatureConfig* cfg) {
  const std::string p = "feature.";
  r.take(obj, p, "sample_rate", &cfg->sample_rate);
  r.take(obj, p, "band_lo", &cfg->band_lo);
  r.take(obj, p, "band_hi", &cfg->band_hi);
  r.take(obj, p, "n_mels", &cfg->n_mels);
  r.take(obj, p, "cqt_bins_per_octave", &cfg->cqt_bins_per_octave);
  r.take(obj, p, "cqt_fmin", &cfg->cqt_fmin);
  r.take(obj, p, "cqt_ceil_bins", &cfg->cqt_ceil_bins);
  r.take(obj, p, "log_eps", &cfg->log_eps);
  r.take(obj, p, "time_pool", &cfg->time_pool);
  r.reject_leftovers(obj, p);
}

inline void read_lmr(json obj, Reader& r, LmrConfig* cfg) {
  const std::string p = "augmentation.lmr.";
  r.take(obj, p, "min_patches", &cfg->min_patches);
  r.take(obj, p, "max_patches", &cfg->max_patches);
  r.take(obj, p, "min_time_frac", &cfg->min_time_frac);
  r.take(obj, p, "max_time_frac", &cfg->max_time_frac);
  r.take(obj, p, "min_freq_frac", &cfg->min_freq_frac);
  r.take(obj, p, "max_freq_frac", &cfg->max_freq_frac);
  r.take(obj, p, "passband_lo", &cfg->passband_lo);
  r.take(obj, p, "passband_hi", &cfg->passband_hi);
  r.take(obj, p, "probability", &cfg->probability);
  r.reject_leftovers(obj, p);
}

inline void read_train(json obj, Reader& r, TrainConfig* cfg) {
  const std::string p = "train.";
  r.take(obj, p, "epochs", &cfg->epochs);
  r.take(obj, p, "warmup_epochs", &cfg->warmup_epochs);
  r.take(obj, p, "lr_mt", &cfg->lr_mt);
  r.take(obj, p, "lr_adv", &cfg->lr_adv);
  r.take(obj, p, "weight_decay", &cfg->weight_decay);
  r.take(obj, p, "batch_size", &cfg->batch_size);
  r.take(obj, p, "seed", &cfg->seed);
  r.take_enum(obj, p, "factor", &cfg->factor);
  r.take(obj, p, "adversarial", &cfg->adversarial_enabled);
  r.take(obj, p, "auxiliary", &cfg->aux_enabled);
  r.take(obj, p, "width_mult", &cfg->width_mult);
  r.take(obj, p, "lmr", &cfg->lmr_enabled);
  r.take(obj, p, "validation_fraction", &cfg->validation_fraction);
  r.reject_leftovers(obj, p);
}

}  // namespace config_detail

// Applies a JSON config text on top of `base` (defaults or an already
// flag-seeded config). Collects every unknown key, type error, and invalid
// value before throwing a single ConfigError.
inline RunConfig parse_run_config(const std::string& text, RunConfig base = RunConfig()) {
  using config_detail::json;
  std::vector<std::string> errors;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");

  config_detail::Reader r(&errors);
  r.take(root, "", "data_root", &base.data_root);
  r.take(root, "", "out_dir", &base.out_dir);
  r.take_enum(root, "", "feature", &base.feature);
  r.take(root, "", "synthetic", &base.synthetic);
  r.take(root, "", "seeds", &base.seeds);

  auto take_section = [&](const char* key, auto&& fn) {
    const auto it = root.find(key);
    if (it == root.end()) return;
    if (it->is_object())
      fn(*it);
    else
      errors.push_back(std::string(key) + ": must be an object");
    root.erase(it);
  };
  take_section("feature_options",
               [&](json& obj) { config_detail::read_feature(obj, r, &base.feature_cfg); });
  take_section("train", [&](json& obj) { config_detail::read_train(obj, r, &base.train); });
  take_section("augmentation", [&](json& obj) {
    config_detail::Reader inner(&errors);
    const auto it = obj.find("lmr");
    if (it != obj.end()) {
      if (it->is_object())
        config_detail::read_lmr(*it, inner, &base.train.lmr);
      else
        errors.push_back("augmentation.lmr: must be an object");
      obj.erase(it);
    }
    inner.reject_leftovers(obj, "augmentation.");
  });
  r.reject_leftovers(root, "");

  try {
    base.validate();
  } catch (const Error& e) {
    errors.push_back(e.what());
  }
  if (!errors.empty()) {
    std::string joined = "config invalid:";
    for (const auto& e : errors) joined += "\n  " + e;
    throw ConfigError(joined);
  }
  return base;
}

inline RunConfig load_run_config(const std::string& path, RunConfig base = RunConfig()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), std::move(base));
}

// Full round-trippable serialization; every key is written explicitly so the
// emitted file documents the resolved run.
inline std::string serialize_run_config(const RunConfig& cfg) {
  using config_detail::json;
  json root;
  root["data_root"] = cfg.data_root;
  root["out_dir"] = cfg.out_dir;
  root["feature"] = feature_kind_name(cfg.feature);
  root["synthetic"] = cfg.synthetic;
  root["seeds"] = cfg.seeds;
  json& f = root["feature_options"];
  f["sample_rate"] = cfg.feature_cfg.sample_rate;
  f["band_lo"] = cfg.feature_cfg.band_lo;
  f["band_hi"] = cfg.feature_cfg.band_hi;
  f["n_mels"] = cfg.feature_cfg.n_mels;
  f["cqt_bins_per_octave"] = cfg.feature_cfg.cqt_bins_per_octave;
  f["cqt_fmin"] = cfg.feature_cfg.cqt_fmin;
  f["cqt_ceil_bins"] = cfg.feature_cfg.cqt_ceil_bins;
  f["log_eps"] = cfg.feature_cfg.log_eps;
  f["time_pool"] = cfg.feature_cfg.time_pool;
  json& t = root["train"];
  t["epochs"] = cfg.train.epochs;
  t["warmup_epochs"] = cfg.train.warmup_epochs;
  t["lr_mt"] = cfg.train.lr_mt;
  t["lr_adv"] = cfg.train.lr_adv;
  t["weight_decay"] = cfg.train.weight_decay;
  t["batch_size"] = cfg.train.batch_size;
  t["seed"] = cfg.train.seed;
  t["factor"] = factor_name(cfg.train.factor);
  t["adversarial"] = cfg.train.adversarial_enabled;
  t["auxiliary"] = cfg.train.aux_enabled;
  t["width_mult"] = cfg.train.width_mult;
  t["lmr"] = cfg.train.lmr_enabled;
  t["validation_fraction"] = cfg.train.validation_fraction;
  json& l = root["augmentation"]["lmr"];
  l["min_patches"] = cfg.train.lmr.min_patches;
  l["max_patches"] = cfg.train.lmr.max_patches;
  l["min_time_frac"] = cfg.train.lmr.min_time_frac;
  l["max_time_frac"] = cfg.train.lmr.max_time_frac;
  l["min_freq_frac"] = cfg.train.lmr.min_freq_frac;
  l["max_freq_frac"] = cfg.train.lmr.max_freq_frac;
  l["passband_lo"] = cfg.train.lmr.passband_lo;
  l["passband_hi"] = cfg.train.lmr.passband_hi;
  l["probability"] = cfg.train.lmr.probability;
  return root.dump(2) + "\n";
}

inline void write_run_config(const std::string& path, const RunConfig& cfg) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw IoError("config: cannot write " + path);
  const std::string text = serialize_run_config(cfg);
  const std::size_t written = std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
  if (written != text.size()) throw IoError("config: short write on " + path);
}

}  // namespace amt

#endif  // AMT_CONFIG_HPP_
