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

// Metadata parsing, label mapping, segmentation, split construction,
// synthetic corpus generation, augmentation, and run configuration.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "amt/augment.hpp"
#include "amt/config.hpp"
#include "amt/dataset.hpp"
#include "amt/synthetic.hpp"
#include "test_util.hpp"

using namespace amt;

#ifndef AMT_DATA_DIR
#error "AMT_DATA_DIR must point at the repository data directory"
#endif

// ---------------------------------------------------------------------------
// Auxiliary label mapping
// ---------------------------------------------------------------------------

TEST_CASE("auxiliary tasks have 2, 3, and 3 classes") {
  CHECK(aux_task_spec(Factor::kSourceRange).n_aux == 2);
  CHECK(aux_task_spec(Factor::kDepth).n_aux == 3);
  CHECK(aux_task_spec(Factor::kWind).n_aux == 3);
}

TEST_CASE("source range boundaries") {
  const auto spec = aux_task_spec(Factor::kSourceRange);
  CHECK(map_aux_label(spec, 0.01) == 0);
  CHECK(map_aux_label(spec, 49.99) == 0);
  CHECK(map_aux_label(spec, 50.0) == 1);
  CHECK(map_aux_label(spec, 350.0) == 1);
  CHECK_THROWS_AS(map_aux_label(spec, 0.0), OutOfMappingRange);
  CHECK_THROWS_AS(map_aux_label(spec, 350.01), OutOfMappingRange);
  CHECK(map_aux_label(spec, std::nullopt) == kExcludedLabel);
}

TEST_CASE("depth boundaries") {
  const auto spec = aux_task_spec(Factor::kDepth);
  CHECK(map_aux_label(spec, 5.99) == 0);
  CHECK(map_aux_label(spec, 6.0) == 1);
  CHECK(map_aux_label(spec, 12.0) == 1);
  CHECK(map_aux_label(spec, 12.0001) == 2);
  CHECK(map_aux_label(spec, 20.0) == 2);
  CHECK_THROWS_AS(map_aux_label(spec, 0.0), OutOfMappingRange);
  CHECK_THROWS_AS(map_aux_label(spec, 20.01), OutOfMappingRange);
  CHECK(map_aux_label(spec, std::nullopt) == kExcludedLabel);
}

TEST_CASE("wind boundaries treat exact calm as its own class") {
  const auto spec = aux_task_spec(Factor::kWind);
  CHECK(map_aux_label(spec, 0.0) == 0);
  CHECK(map_aux_label(spec, 0.1) == 1);
  CHECK(map_aux_label(spec, 10.99) == 1);
  CHECK(map_aux_label(spec, 11.0) == 2);
  CHECK(map_aux_label(spec, 18.0) == 2);
  CHECK_THROWS_AS(map_aux_label(spec, 18.5), OutOfMappingRange);
  CHECK_THROWS_AS(map_aux_label(spec, -1.0), OutOfMappingRange);
  CHECK(map_aux_label(spec, std::nullopt) == kExcludedLabel);
}

// ---------------------------------------------------------------------------
// Metadata manifests
// ---------------------------------------------------------------------------

TEST_CASE("a manifest row maps fields positionally") {
  std::istringstream in("28, Trawler, 100, 15, 0\n");
  const auto metas = parse_metadata_manifest(in);
  REQUIRE(metas.size() == 1);
  CHECK(metas[0].id == 28);
  CHECK(metas[0].category == "Trawler");
  CHECK(metas[0].source_range_m == 100.0);
  CHECK(metas[0].depth_m == 15.0);
  CHECK(metas[0].wind_kmh == 0.0);
}

TEST_CASE("dash entries mean an absent annotation") {
  std::istringstream in(
      "1, Sailboat, -, 8, 5\n"
      "2, Sailboat, 40, \xE2\x80\x94, \xE2\x80\x94\n");  // em dash
  const auto metas = parse_metadata_manifest(in);
  REQUIRE(metas.size() == 2);
  CHECK_FALSE(metas[0].source_range_m.has_value());
  CHECK(metas[0].depth_m == 8.0);
  CHECK(metas[1].source_range_m == 40.0);
  CHECK_FALSE(metas[1].depth_m.has_value());
  CHECK_FALSE(metas[1].wind_kmh.has_value());
}

TEST_CASE("a sixth manifest column provides the duration") {
  std::istringstream in("3, Tugboat, 30, 5, 2, 140\n");
  const auto metas = parse_metadata_manifest(in);
  REQUIRE(metas.size() == 1);
  CHECK(metas[0].duration_s == 140.0);
}

TEST_CASE("comments and blank lines are ignored") {
  std::istringstream in(
      "# header comment\n"
      "\n"
      "5, Pilotship, 20, 4, 0\n");
  CHECK(parse_metadata_manifest(in).size() == 1);
}

TEST_CASE("an empty manifest parses to an empty list") {
  std::istringstream in("");
  CHECK(parse_metadata_manifest(in).empty());
}

TEST_CASE("malformed manifests report the offending line") {
  std::istringstream too_few("6, Passenger ship, 20\n");
  CHECK_THROWS_AS(parse_metadata_manifest(too_few), ManifestError);
  std::istringstream bad_number("1, Sailboat, 20, 4, 0\n7, Sailboat, abc, 4, 0\n");
  try {
    parse_metadata_manifest(bad_number);
    FAIL("expected ManifestError");
  } catch (const ManifestError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  std::istringstream negative("8, Sailboat, -20, 4, 0\n");
  CHECK_THROWS_AS(parse_metadata_manifest(negative), ManifestError);
}

TEST_CASE("metadata serialization round-trips") {
  std::ifstream in(std::string(AMT_DATA_DIR) + "/shipsear_meta_reference.txt");
  REQUIRE(in.good());
  const auto metas = parse_metadata_manifest(in);
  std::istringstream again(serialize_metadata_manifest(metas));
  const auto back = parse_metadata_manifest(again);
  REQUIRE(back.size() == metas.size());
  for (std::size_t i = 0; i < metas.size(); ++i) {
    CHECK(back[i].id == metas[i].id);
    CHECK(back[i].category == metas[i].category);
    CHECK(back[i].source_range_m == metas[i].source_range_m);
    CHECK(back[i].depth_m == metas[i].depth_m);
    CHECK(back[i].wind_kmh == metas[i].wind_kmh);
    CHECK(back[i].duration_s == metas[i].duration_s);
  }
}

TEST_CASE("reference metadata reproduces the published label counts") {
  std::ifstream in(std::string(AMT_DATA_DIR) + "/shipsear_meta_reference.txt");
  REQUIRE(in.good());
  const auto metas = parse_metadata_manifest(in);
  REQUIRE(metas.size() == 90);

  const auto range = count_aux_labels(metas, Factor::kSourceRange);
  CHECK(range.per_class == std::vector<int>{65, 25});
  CHECK(range.excluded == 0);

  const auto depth = count_aux_labels(metas, Factor::kDepth);
  CHECK(depth.per_class == std::vector<int>{33, 33, 24});
  CHECK(depth.excluded == 0);

  const auto wind = count_aux_labels(metas, Factor::kWind);
  CHECK(wind.per_class == std::vector<int>{23, 29, 25});
  CHECK(wind.excluded == 13);
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

TEST_CASE("segments are 30 s long with a 15-s stride, incomplete tails dropped") {
  CHECK(segment_starts(60.0) == std::vector<double>{0.0, 15.0, 30.0});
  CHECK(segment_starts(30.0) == std::vector<double>{0.0});
  CHECK(segment_starts(29.0).empty());
  CHECK(segment_starts(44.9) == std::vector<double>{0.0});
  CHECK(segment_starts(45.0) == std::vector<double>{0.0, 15.0});
}

TEST_CASE("ranged segmentation respects interval bounds") {
  CHECK(segment_starts(15.0, 125.0) ==
        std::vector<double>{15.0, 30.0, 45.0, 60.0, 75.0, 90.0});
  CHECK(segment_starts(125.0, 163.0) == std::vector<double>{125.0});
}

// ---------------------------------------------------------------------------
// Split construction
// ---------------------------------------------------------------------------

namespace {

Dataset reference_dataset() {
  std::ifstream in(std::string(AMT_DATA_DIR) + "/shipsear_meta_reference.txt");
  REQUIRE(in.good());
  return make_dataset(parse_metadata_manifest(in));
}

}  // namespace

TEST_CASE("the published split yields 541 train and 84 test segments") {
  const Dataset ds = reference_dataset();
  const Split split = build_split(default_split_manifest(), ds);
  CHECK(split.train.size() == 541);
  CHECK(split.test.size() == 84);
  CHECK(split.train_records == 65);
  CHECK(split.test_records == 26);
}

TEST_CASE("per-category segment counts match the published table") {
  const Dataset ds = reference_dataset();
  const Split split = build_split(default_split_manifest(), ds);
  std::map<std::string, std::pair<int, int>> counts;
  for (const auto& s : split.train) counts[ds.recordings[s.recording_index].category].first++;
  for (const auto& s : split.test) counts[ds.recordings[s.recording_index].category].second++;

  const std::map<std::string, std::pair<int, int>> expected = {
      {"Dredger", {8, 4}},        {"Fish boat", {26, 2}},
      {"Motorboat", {43, 6}},     {"Mussel boat", {33, 9}},
      {"Natural noise", {45, 16}},{"Ocean liner", {50, 3}},
      {"Passenger ship", {217, 25}}, {"Pilotship", {5, 1}},
      {"RO-RO ship", {81, 12}},   {"Sailboat", {19, 2}},
      {"Trawler", {6, 1}},        {"Tugboat", {8, 3}},
  };
  CHECK(counts == expected);
}

TEST_CASE("the time-ranged recording never leaks across sides") {
  const Dataset ds = reference_dataset();
  const Split split = build_split(default_split_manifest(), ds);
  for (const auto& s : split.train)
    if (s.recording_id == 28) REQUIRE(s.start_s + 30.0 <= 125.0);
  for (const auto& s : split.test)
    if (s.recording_id == 28) REQUIRE(s.start_s >= 125.0);
}

TEST_CASE("train and test recordings are disjoint") {
  const Dataset ds = reference_dataset();
  const Split split = build_split(default_split_manifest(), ds);
  std::set<int> train_ids, test_ids;
  for (const auto& s : split.train) train_ids.insert(s.recording_id);
  for (const auto& s : split.test) test_ids.insert(s.recording_id);
  std::vector<int> both;
  std::set_intersection(train_ids.begin(), train_ids.end(), test_ids.begin(), test_ids.end(),
                        std::back_inserter(both));
  CHECK(both == std::vector<int>{28});  // only the time-ranged recording
}

TEST_CASE("segments inherit category and auxiliary labels") {
  const Dataset ds = reference_dataset();
  const Split split = build_split(default_split_manifest(), ds);
  const auto& cats = canonical_categories();
  for (const auto& s : split.train) {
    REQUIRE(s.y >= 0);
    REQUIRE(s.y < static_cast<int>(cats.size()));
    REQUIRE(cats[static_cast<std::size_t>(s.y)] == ds.recordings[s.recording_index].category);
    const auto& meta = ds.recordings[s.recording_index];
    for (Factor f : {Factor::kSourceRange, Factor::kDepth, Factor::kWind})
      REQUIRE(s.aux_label(f) == map_aux_label(aux_task_spec(f), meta.factor_value(f)));
  }
}

TEST_CASE("a small handmade split is counted by hand") {
  std::vector<RecordingMeta> metas(2);
  metas[0] = {1, "Sailboat", 30.0, 5.0, 0.0, 61.0};
  metas[1] = {2, "Tugboat", 30.0, 5.0, 0.0, 30.0};
  const Dataset ds = make_dataset(metas);
  SplitManifest m;
  m.train_ids["Sailboat"] = {1};
  m.test_ids["Tugboat"] = {2};
  const Split split = build_split(m, ds);
  CHECK(split.train.size() == 3);  // starts 0, 15, 30 within 61 s
  CHECK(split.test.size() == 1);
  CHECK(split.train_records == 1);
  CHECK(split.test_records == 1);
}

TEST_CASE("recordings missing from the split manifest are an error") {
  std::vector<RecordingMeta> metas(1);
  metas[0] = {9, "Sailboat", 30.0, 5.0, 0.0, 30.0};
  const Dataset ds = make_dataset(metas);
  CHECK_THROWS_AS(build_split(SplitManifest{}, ds), UnmappedRecording);
}

TEST_CASE("split manifests reject contradictory assignments") {
  SplitManifest dup;
  dup.train_ids["Sailboat"] = {1, 1};
  CHECK_THROWS_AS(dup.validate(), ManifestError);

  SplitManifest both;
  both.train_ids["Sailboat"] = {1};
  both.test_ids["Sailboat"] = {1};
  CHECK_THROWS_AS(both.validate(), ManifestError);

  SplitManifest ranged_whole;
  ranged_whole.train_ids["Trawler"] = {28};
  ranged_whole.ranged.push_back({"Trawler", 28, 0, 60, 60, 100});
  CHECK_THROWS_AS(ranged_whole.validate(), ManifestError);

  SplitManifest overlap;
  overlap.ranged.push_back({"Trawler", 28, 0, 80, 60, 100});
  CHECK_THROWS_AS(overlap.validate(), ManifestError);
}

TEST_CASE("split manifest text round-trips") {
  const SplitManifest m = default_split_manifest();
  std::istringstream in(serialize_split_manifest(m));
  const SplitManifest back = parse_split_manifest(in);
  CHECK(back.train_ids == m.train_ids);
  CHECK(back.test_ids == m.test_ids);
  REQUIRE(back.ranged.size() == 1);
  CHECK(back.ranged[0].id == 28);
  CHECK(back.ranged[0].train_lo == 15.0);
  CHECK(back.ranged[0].train_hi == 125.0);
  CHECK(back.ranged[0].test_lo == 125.0);
  CHECK(back.ranged[0].test_hi == 163.0);
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

TEST_CASE("synthetic generation is deterministic in the seed") {
  const auto spec = amt_test::tiny_synth_spec(2, 6, 2);
  const SyntheticDataset a = generate_synthetic(spec, 99);
  const SyntheticDataset b = generate_synthetic(spec, 99);
  REQUIRE(a.dataset.recordings.size() == b.dataset.recordings.size());
  for (std::size_t i = 0; i < a.dataset.recordings.size(); ++i) {
    CHECK(a.dataset.recordings[i].id == b.dataset.recordings[i].id);
    CHECK(a.dataset.recordings[i].category == b.dataset.recordings[i].category);
    const auto& wa = a.dataset.waveforms[i].samples;
    const auto& wb = b.dataset.waveforms[i].samples;
    REQUIRE(wa.size() == wb.size());
    REQUIRE(std::memcmp(wa.data(), wb.data(), wa.size() * sizeof(double)) == 0);
  }

  const SyntheticDataset c = generate_synthetic(spec, 100);
  REQUIRE(std::memcmp(a.dataset.waveforms[0].samples.data(),
                      c.dataset.waveforms[0].samples.data(),
                      a.dataset.waveforms[0].samples.size() * sizeof(double)) != 0);
}

TEST_CASE("synthetic recordings carry mappable annotations and a full split") {
  const auto spec = amt_test::tiny_synth_spec(3, 9, 3);
  const SyntheticDataset sd = generate_synthetic(spec, 7);
  REQUIRE(sd.dataset.recordings.size() == 12);
  for (const auto& meta : sd.dataset.recordings)
    for (Factor f : {Factor::kSourceRange, Factor::kDepth, Factor::kWind})
      CHECK_NOTHROW(map_aux_label(aux_task_spec(f), meta.factor_value(f)));
  const Split split = build_split(sd.manifest, sd.dataset);
  CHECK(split.train.size() == 9);
  CHECK(split.test.size() == 3);
}

TEST_CASE("synthetic classes are separable by a plain centroid classifier") {
  auto spec = amt_test::tiny_synth_spec(2, 16, 8);
  spec.range_values = {20.0};
  spec.depth_values = {4.0};
  spec.wind_values = {0.0};  // no factor variation at all
  const SyntheticDataset sd = generate_synthetic(spec, 11);
  const auto fcfg = amt_test::tiny_feature_config();
  const auto [train, test] =
      amt_test::make_sets<float>(sd, fcfg, FeatureKind::kMel, Factor::kSourceRange);

  const std::size_t dim = train.features[0].shape()[1];
  auto pooled = [&](const Tensor<float>& f) {
    std::vector<double> v(dim, 0.0);
    for (std::size_t t = 0; t < f.shape()[0]; ++t)
      for (std::size_t k = 0; k < dim; ++k) v[k] += f.at2(t, k);
    for (auto& x : v) x /= static_cast<double>(f.shape()[0]);
    return v;
  };

  std::vector<std::vector<double>> centroid(2, std::vector<double>(dim, 0.0));
  std::vector<int> count(2, 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto v = pooled(train.features[i]);
    const int y = train.labels[i];
    for (std::size_t k = 0; k < dim; ++k) centroid[static_cast<std::size_t>(y)][k] += v[k];
    count[static_cast<std::size_t>(y)]++;
  }
  for (int y = 0; y < 2; ++y) {
    REQUIRE(count[y] > 0);
    for (auto& x : centroid[static_cast<std::size_t>(y)]) x /= count[y];
  }

  int correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto v = pooled(test.features[i]);
    double d0 = 0, d1 = 0;
    for (std::size_t k = 0; k < dim; ++k) {
      d0 += (v[k] - centroid[0][k]) * (v[k] - centroid[0][k]);
      d1 += (v[k] - centroid[1][k]) * (v[k] - centroid[1][k]);
    }
    if ((d0 < d1 ? 0 : 1) == test.labels[i]) ++correct;
  }
  CHECK(correct == static_cast<int>(test.size()));
}

TEST_CASE("higher synthetic wind raises short-term level variance") {
  auto spec = amt_test::tiny_synth_spec(1, 8, 0);
  spec.wind_values = {0.0, 14.0};
  const SyntheticDataset sd = generate_synthetic(spec, 21);

  auto block_rms_variance = [](const Waveform& w) {
    const auto block = static_cast<std::size_t>(w.sample_rate);
    std::vector<double> rms;
    for (std::size_t b = 0; b + block <= w.samples.size(); b += block) {
      double acc = 0;
      for (std::size_t i = b; i < b + block; ++i) acc += w.samples[i] * w.samples[i];
      rms.push_back(std::sqrt(acc / static_cast<double>(block)));
    }
    double mu = 0;
    for (double v : rms) mu += v;
    mu /= static_cast<double>(rms.size());
    double var = 0;
    for (double v : rms) var += (v - mu) * (v - mu);
    return var / static_cast<double>(rms.size());
  };

  double calm = -1, windy = -1;
  for (std::size_t i = 0; i < sd.dataset.recordings.size(); ++i) {
    const auto w = sd.dataset.recordings[i].wind_kmh;
    REQUIRE(w.has_value());
    if (*w == 0.0 && calm < 0) calm = block_rms_variance(sd.dataset.waveforms[i]);
    if (*w == 14.0 && windy < 0) windy = block_rms_variance(sd.dataset.waveforms[i]);
  }
  REQUIRE(calm >= 0);
  REQUIRE(windy >= 0);
  CHECK(windy > calm);
}

TEST_CASE("factor confounding aligns factor values with classes") {
  auto spec = amt_test::tiny_synth_spec(2, 40, 0);
  spec.duration_s = 30.0;
  spec.factor_confound = 1.0;
  const SyntheticDataset sd = generate_synthetic(spec, 5);
  const auto& names = canonical_categories();
  for (const auto& meta : sd.dataset.recordings) {
    const auto it = std::find(names.begin(), names.end(), meta.category);
    const auto cls = static_cast<std::size_t>(it - names.begin());
    // With full confounding every recording takes its class's home value.
    CHECK(*meta.source_range_m == *spec.range_values[cls % spec.range_values.size()]);
  }
}

TEST_CASE("zero confounding cycles factor values independently of class") {
  auto spec = amt_test::tiny_synth_spec(2, 12, 0);
  const SyntheticDataset sd = generate_synthetic(spec, 5);
  // Each class must see both range values somewhere in the corpus.
  std::map<std::string, std::set<double>> seen;
  for (const auto& meta : sd.dataset.recordings)
    seen[meta.category].insert(*meta.source_range_m);
  for (const auto& [cat, values] : seen) {
    INFO(cat);
    CHECK(values.size() == 2);
  }
}

// ---------------------------------------------------------------------------
// Local masking and replicating
// ---------------------------------------------------------------------------

namespace {

Tensor<float> random_feature_batch(std::size_t n, std::size_t t, std::size_t f,
                                   std::uint64_t seed) {
  RandomStream rs(seed);
  Tensor<float> x({n, 1, t, f});
  for (std::size_t i = 0; i < x.numel(); ++i)
    x.data()[i] = static_cast<float>(rs.normal());
  return x;
}

}  // namespace

TEST_CASE("lmr with zero probability is the identity") {
  const auto batch = random_feature_batch(4, 20, 16, 3);
  LmrConfig cfg;
  cfg.probability = 0.0;
  RandomStream rng(1);
  const auto out = lmr(batch, cfg, rng);
  CHECK(std::memcmp(out.data(), batch.data(), batch.numel() * sizeof(float)) == 0);
}

TEST_CASE("lmr on a batch of identical samples is invisible") {
  Tensor<float> batch({3, 1, 20, 16});
  RandomStream rs(5);
  for (std::size_t t = 0; t < 20; ++t)
    for (std::size_t f = 0; f < 16; ++f) {
      const auto v = static_cast<float>(rs.normal());
      for (std::size_t i = 0; i < 3; ++i) batch.at4(i, 0, t, f) = v;
    }
  LmrConfig cfg;
  cfg.probability = 1.0;
  RandomStream rng(2);
  const auto out = lmr(batch, cfg, rng);
  CHECK(std::memcmp(out.data(), batch.data(), batch.numel() * sizeof(float)) == 0);
}

TEST_CASE("lmr patches are donor copies and leave the rest untouched") {
  const auto batch = random_feature_batch(4, 40, 32, 7);
  LmrConfig cfg;
  cfg.probability = 1.0;
  cfg.min_patches = 1;
  cfg.max_patches = 1;
  RandomStream rng(9);
  const auto out = lmr(batch, cfg, rng);

  for (std::size_t i = 0; i < 4; ++i) {
    // Bounding box of changed cells.
    std::size_t t_lo = 40, t_hi = 0, f_lo = 32, f_hi = 0;
    bool any = false;
    for (std::size_t t = 0; t < 40; ++t)
      for (std::size_t f = 0; f < 32; ++f)
        if (out.at4(i, 0, t, f) != batch.at4(i, 0, t, f)) {
          any = true;
          t_lo = std::min(t_lo, t); t_hi = std::max(t_hi, t);
          f_lo = std::min(f_lo, f); f_hi = std::max(f_hi, f);
        }
    if (!any) continue;  // donor rectangle may coincide by value, not here though

    // Inside the box the sample must equal one single donor.
    bool donor_found = false;
    for (std::size_t j = 0; j < 4 && !donor_found; ++j) {
      if (j == i) continue;
      bool all = true;
      for (std::size_t t = t_lo; t <= t_hi && all; ++t)
        for (std::size_t f = f_lo; f <= f_hi && all; ++f)
          if (out.at4(i, 0, t, f) != batch.at4(j, 0, t, f)) all = false;
      donor_found = all;
    }
    REQUIRE(donor_found);

    // Outside the box nothing moved.
    for (std::size_t t = 0; t < 40; ++t)
      for (std::size_t f = 0; f < 32; ++f) {
        if (t >= t_lo && t <= t_hi && f >= f_lo && f <= f_hi) continue;
        REQUIRE(out.at4(i, 0, t, f) == batch.at4(i, 0, t, f));
      }
  }
}

TEST_CASE("lmr patch sizes respect the configured fractions") {
  const auto batch = random_feature_batch(2, 100, 80, 13);
  LmrConfig cfg;
  cfg.probability = 1.0;
  cfg.min_patches = 1;
  cfg.max_patches = 1;
  cfg.max_time_frac = 0.15;
  cfg.max_freq_frac = 0.15;
  RandomStream rng(4);
  const auto out = lmr(batch, cfg, rng);
  for (std::size_t i = 0; i < 2; ++i) {
    std::size_t t_lo = 100, t_hi = 0, f_lo = 80, f_hi = 0;
    bool any = false;
    for (std::size_t t = 0; t < 100; ++t)
      for (std::size_t f = 0; f < 80; ++f)
        if (out.at4(i, 0, t, f) != batch.at4(i, 0, t, f)) {
          any = true;
          t_lo = std::min(t_lo, t); t_hi = std::max(t_hi, t);
          f_lo = std::min(f_lo, f); f_hi = std::max(f_hi, f);
        }
    if (!any) continue;
    CHECK(t_hi - t_lo + 1 <= 15);
    CHECK(f_hi - f_lo + 1 <= 12);
  }
}

TEST_CASE("lmr confines patches to the passband rows") {
  const auto batch = random_feature_batch(3, 30, 64, 15);
  LmrConfig cfg;
  cfg.probability = 1.0;
  cfg.passband_lo = 16;
  cfg.passband_hi = 40;
  RandomStream rng(8);
  const auto out = lmr(batch, cfg, rng);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t t = 0; t < 30; ++t)
      for (std::size_t f = 0; f < 64; ++f)
        if (f < 16 || f >= 40)
          REQUIRE(out.at4(i, 0, t, f) == batch.at4(i, 0, t, f));
}

TEST_CASE("lmr skips batches of one and says so") {
  const auto batch = random_feature_batch(1, 20, 16, 19);
  LmrConfig cfg;
  cfg.probability = 1.0;
  RandomStream rng(3);
  LmrStats stats;
  const auto out = lmr(batch, cfg, rng, &stats);
  CHECK(stats.skipped_small_batch);
  CHECK(stats.samples_augmented == 0);
  CHECK(std::memcmp(out.data(), batch.data(), batch.numel() * sizeof(float)) == 0);
}

TEST_CASE("lmr is reproducible for a fixed stream") {
  const auto batch = random_feature_batch(4, 24, 20, 23);
  LmrConfig cfg;
  cfg.probability = 0.8;
  RandomStream r1(42), r2(42);
  const auto a = lmr(batch, cfg, r1);
  const auto b = lmr(batch, cfg, r2);
  CHECK(std::memcmp(a.data(), b.data(), a.numel() * sizeof(float)) == 0);
}

TEST_CASE("lmr validates its configuration") {
  const auto batch = random_feature_batch(2, 20, 16, 27);
  RandomStream rng(1);
  LmrConfig bad;
  bad.min_patches = 0;
  CHECK_THROWS_AS(lmr(batch, bad, rng), ConfigError);
  LmrConfig frac;
  frac.min_time_frac = 0.5;
  frac.max_time_frac = 0.2;
  CHECK_THROWS_AS(lmr(batch, frac, rng), ConfigError);
  LmrConfig band;
  band.passband_lo = 30;
  band.passband_hi = 10;
  CHECK_THROWS_AS(lmr(batch, band, rng), ConfigError);
  LmrConfig prob;
  prob.probability = 1.5;
  CHECK_THROWS_AS(lmr(batch, prob, rng), ConfigError);
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

TEST_CASE("an empty config keeps the documented defaults") {
  const RunConfig cfg = parse_run_config("{}");
  CHECK(cfg.train.epochs == 200);
  CHECK(cfg.train.warmup_epochs == 5);
  CHECK(cfg.train.lr_mt == 5e-4);
  CHECK(cfg.train.lr_adv == 1e-4);
  CHECK(cfg.train.weight_decay == 1e-5);
  CHECK(cfg.train.batch_size == 32);
  CHECK(cfg.feature == FeatureKind::kCqt);
  CHECK(cfg.feature_cfg.sample_rate == 44100.0);
  CHECK(cfg.feature_cfg.n_mels == 400);
  CHECK(cfg.train.adversarial_enabled);
  CHECK(cfg.train.lmr_enabled);
}

TEST_CASE("config values override defaults") {
  const RunConfig cfg = parse_run_config(R"({
    "feature": "mel",
    "train": {"epochs": 12, "lr_mt": 0.001, "factor": "wind"},
    "feature_options": {"sample_rate": 4410.0, "n_mels": 64},
    "augmentation": {"lmr": {"probability": 0.25}}
  })");
  CHECK(cfg.feature == FeatureKind::kMel);
  CHECK(cfg.train.epochs == 12);
  CHECK(cfg.train.lr_mt == 0.001);
  CHECK(cfg.train.factor == Factor::kWind);
  CHECK(cfg.feature_cfg.sample_rate == 4410.0);
  CHECK(cfg.feature_cfg.n_mels == 64);
  CHECK(cfg.train.lmr.probability == 0.25);
  // Untouched keys keep their defaults.
  CHECK(cfg.train.batch_size == 32);
}

TEST_CASE("a config applies on top of an explicit base") {
  RunConfig base;
  base.train.epochs = 3;
  base.train.seed = 77;
  const RunConfig cfg = parse_run_config(R"({"train": {"epochs": 9}})", base);
  CHECK(cfg.train.epochs == 9);   // file wins over the base value
  CHECK(cfg.train.seed == 77);    // untouched base value survives
}

TEST_CASE("unknown keys are all reported at once") {
  try {
    parse_run_config(R"({"bogus": 1, "train": {"epoch": 5}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bogus: unknown key") != std::string::npos);
    CHECK(msg.find("train.epoch: unknown key") != std::string::npos);
  }
}

TEST_CASE("type mismatches are rejected") {
  try {
    parse_run_config(R"({"train": {"epochs": "ten"}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.epochs: wrong type") != std::string::npos);
  }
}

TEST_CASE("invalid values are rejected with the validation message") {
  CHECK_THROWS_AS(parse_run_config(R"({"train": {"epochs": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"train": {"batch_size": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"feature": "wavelet"})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"train": {"factor": "salinity"}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[]"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("not json"), ConfigError);
}

TEST_CASE("serialization round-trips a non-default config") {
  RunConfig cfg;
  cfg.data_root = "/somewhere";
  cfg.feature = FeatureKind::kSpectrogram;
  cfg.synthetic = true;
  cfg.seeds = {1, 2, 3};
  cfg.feature_cfg.sample_rate = 4410.0;
  cfg.feature_cfg.n_mels = 64;
  cfg.feature_cfg.time_pool = 10;
  cfg.train.epochs = 17;
  cfg.train.warmup_epochs = 2;
  cfg.train.factor = Factor::kDepth;
  cfg.train.adversarial_enabled = false;
  cfg.train.width_mult = 0.25;
  cfg.train.lmr.probability = 0.9;

  const RunConfig back = parse_run_config(serialize_run_config(cfg));
  CHECK(back.data_root == cfg.data_root);
  CHECK(back.feature == cfg.feature);
  CHECK(back.synthetic == cfg.synthetic);
  CHECK(back.seeds == cfg.seeds);
  CHECK(back.feature_cfg.sample_rate == cfg.feature_cfg.sample_rate);
  CHECK(back.feature_cfg.n_mels == cfg.feature_cfg.n_mels);
  CHECK(back.feature_cfg.time_pool == cfg.feature_cfg.time_pool);
  CHECK(back.train.epochs == cfg.train.epochs);
  CHECK(back.train.warmup_epochs == cfg.train.warmup_epochs);
  CHECK(back.train.factor == cfg.train.factor);
  CHECK(back.train.adversarial_enabled == cfg.train.adversarial_enabled);
  CHECK(back.train.width_mult == cfg.train.width_mult);
  CHECK(back.train.lmr.probability == cfg.train.lmr.probability);
}
