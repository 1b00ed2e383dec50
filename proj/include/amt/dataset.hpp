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

// Corpus ingestion: recording metadata, influential-factor label mapping,
// 30 s / 15 s-overlap segmentation, and the reproducible train/test split.

#ifndef AMT_DATASET_HPP_
#define AMT_DATASET_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "amt/common.hpp"
#include "amt/wav.hpp"
#include "amt/waveform.hpp"

namespace amt {

inline constexpr double kSegmentSeconds = 30.0;
inline constexpr double kSegmentStride = 15.0;
inline constexpr int kExcludedLabel = -1;

// The twelve vessel/noise categories, alphabetically ordered.
inline const std::vector<std::string>& canonical_categories() {
  static const std::vector<std::string> kCategories = {
      "Dredger",        "Fish boat", "Motorboat", "Mussel boat",
      "Natural noise",  "Ocean liner", "Passenger ship", "Pilotship",
      "RO-RO ship",     "Sailboat",  "Trawler",   "Tugboat"};
  return kCategories;
}

// ---------------------------------------------------------------------------
// Influential factors and label mapping
// ---------------------------------------------------------------------------

enum class Factor { kSourceRange = 0, kDepth = 1, kWind = 2 };

inline const char* factor_name(Factor f) {
  switch (f) {
    case Factor::kSourceRange: return "range";
    case Factor::kDepth: return "depth";
    case Factor::kWind: return "wind";
  }
  throw InvalidInput("unknown factor");
}

inline Factor factor_from_name(const std::string& name) {
  if (name == "range") return Factor::kSourceRange;
  if (name == "depth") return Factor::kDepth;
  if (name == "wind") return Factor::kWind;
  throw ConfigError("unknown factor: " + name);
}

struct AuxiliaryTaskSpec {
  Factor factor = Factor::kSourceRange;
  int n_aux = 2;
};

inline AuxiliaryTaskSpec aux_task_spec(Factor f) {
  switch (f) {
    case Factor::kSourceRange: return {f, 2};
    case Factor::kDepth: return {f, 3};
    case Factor::kWind: return {f, 3};
  }
  throw InvalidInput("unknown factor");
}

// Interval boundaries are exactly as published: half-open and closed ends
// differ between factors, and wind class 0 is the exact calm value.
inline int map_aux_label(const AuxiliaryTaskSpec& spec, std::optional<double> value) {
  if (!value.has_value()) return kExcludedLabel;
  const double v = *value;
  switch (spec.factor) {
    case Factor::kSourceRange:
      if (v > 0.0 && v < 50.0) return 0;
      if (v >= 50.0 && v <= 350.0) return 1;
      throw OutOfMappingRange("source range outside mapping: " + std::to_string(v));
    case Factor::kDepth:
      if (v > 0.0 && v < 6.0) return 0;
      if (v >= 6.0 && v <= 12.0) return 1;
      if (v > 12.0 && v <= 20.0) return 2;
      throw OutOfMappingRange("depth outside mapping: " + std::to_string(v));
    case Factor::kWind:
      if (v == 0.0) return 0;
      if (v > 0.0 && v < 11.0) return 1;
      if (v >= 11.0 && v <= 18.0) return 2;
      throw OutOfMappingRange("wind outside mapping: " + std::to_string(v));
  }
  throw InvalidInput("unknown factor");
}

// ---------------------------------------------------------------------------
// Recording metadata
// ---------------------------------------------------------------------------

struct RecordingMeta {
  int id = 0;
  std::string category;
  std::optional<double> source_range_m;
  std::optional<double> depth_m;
  std::optional<double> wind_kmh;
  double duration_s = 0.0;  // filled from audio when loaded; may come from the manifest

  std::optional<double> factor_value(Factor f) const {
    switch (f) {
      case Factor::kSourceRange: return source_range_m;
      case Factor::kDepth: return depth_m;
      case Factor::kWind: return wind_kmh;
    }
    throw InvalidInput("unknown factor");
  }
};

struct Segment {
  int recording_index = -1;  // index into Dataset::recordings
  int recording_id = 0;
  double start_s = 0.0;
  int y = -1;                      // category index
  std::array<int, 3> aux = {kExcludedLabel, kExcludedLabel, kExcludedLabel};

  int aux_label(Factor f) const { return aux[static_cast<int>(f)]; }
};

struct Dataset {
  std::vector<std::string> categories;  // sorted unique category names
  std::vector<RecordingMeta> recordings;
  std::vector<Waveform> waveforms;      // parallel to recordings; may be empty

  bool has_audio() const { return !waveforms.empty(); }
  int category_index(const std::string& name) const {
    const auto it = std::lower_bound(categories.begin(), categories.end(), name);
    if (it == categories.end() || *it != name)
      throw InvalidInput("unknown category: " + name);
    return static_cast<int>(it - categories.begin());
  }
  double duration_of(std::size_t index) const {
    if (has_audio()) return waveforms[index].duration_s();
    return recordings[index].duration_s;
  }
};

inline Dataset make_dataset(std::vector<RecordingMeta> metas,
                            std::vector<Waveform> waves = {}) {
  if (!waves.empty() && waves.size() != metas.size())
    throw InvalidInput("dataset: metadata/waveform count mismatch");
  Dataset ds;
  std::set<std::string> names;
  for (const auto& m : metas) names.insert(m.category);
  ds.categories.assign(names.begin(), names.end());
  ds.recordings = std::move(metas);
  ds.waveforms = std::move(waves);
  return ds;
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

// Segment start times within [lo_s, hi_s): every 15 s, complete windows only.
inline std::vector<double> segment_starts(double lo_s, double hi_s) {
  std::vector<double> starts;
  for (double s = lo_s; s + kSegmentSeconds <= hi_s + 1e-9; s += kSegmentStride)
    starts.push_back(s);
  return starts;
}

inline std::vector<double> segment_starts(double duration_s) {
  return segment_starts(0.0, duration_s);
}

namespace dataset_detail {

inline Segment make_segment(const Dataset& ds, std::size_t rec_index, double start_s) {
  const RecordingMeta& m = ds.recordings[rec_index];
  Segment seg;
  seg.recording_index = static_cast<int>(rec_index);
  seg.recording_id = m.id;
  seg.start_s = start_s;
  seg.y = ds.category_index(m.category);
  for (Factor f : {Factor::kSourceRange, Factor::kDepth, Factor::kWind})
    seg.aux[static_cast<int>(f)] = map_aux_label(aux_task_spec(f), m.factor_value(f));
  return seg;
}

}  // namespace dataset_detail

// All complete 30-s windows of one recording. Recordings shorter than one
// window yield an empty list.
inline std::vector<Segment> segment_recording(const Dataset& ds, std::size_t rec_index) {
  std::vector<Segment> out;
  for (double s : segment_starts(ds.duration_of(rec_index)))
    out.push_back(dataset_detail::make_segment(ds, rec_index, s));
  return out;
}

// Copies the audio backing one segment.
inline Waveform segment_waveform(const Dataset& ds, const Segment& seg) {
  if (!ds.has_audio()) throw InvalidInput("segment_waveform: dataset has no audio");
  return ds.waveforms[static_cast<std::size_t>(seg.recording_index)].slice(
      seg.start_s, kSegmentSeconds);
}

// ---------------------------------------------------------------------------
// Train/test split
// ---------------------------------------------------------------------------

struct SplitManifest {
  // category -> recording ids wholly assigned to one side
  std::map<std::string, std::vector<int>> train_ids;
  std::map<std::string, std::vector<int>> test_ids;

  // Recordings split internally by time range (seconds).
  struct Ranged {
    std::string category;
    int id = 0;
    double train_lo = 0, train_hi = 0;
    double test_lo = 0, test_hi = 0;
  };
  std::vector<Ranged> ranged;

  void validate() const {
    std::set<int> train_set, test_set;
    for (const auto& [cat, ids] : train_ids)
      for (int id : ids)
        if (!train_set.insert(id).second)
          throw ManifestError("split: duplicate train id " + std::to_string(id));
    for (const auto& [cat, ids] : test_ids)
      for (int id : ids) {
        if (!test_set.insert(id).second)
          throw ManifestError("split: duplicate test id " + std::to_string(id));
        if (train_set.count(id))
          throw ManifestError("split: id on both sides: " + std::to_string(id));
      }
    for (const auto& r : ranged) {
      if (train_set.count(r.id) || test_set.count(r.id))
        throw ManifestError("split: ranged id also listed whole: " + std::to_string(r.id));
      const bool disjoint = r.train_hi <= r.test_lo || r.test_hi <= r.train_lo;
      if (!disjoint)
        throw ManifestError("split: overlapping time ranges for id " + std::to_string(r.id));
    }
  }

  // -1 unknown, 0 train, 1 test, 2 ranged
  int side_of(int id) const {
    for (const auto& [cat, ids] : train_ids)
      if (std::find(ids.begin(), ids.end(), id) != ids.end()) return 0;
    for (const auto& [cat, ids] : test_ids)
      if (std::find(ids.begin(), ids.end(), id) != ids.end()) return 1;
    for (const auto& r : ranged)
      if (r.id == id) return 2;
    return -1;
  }
};

struct Split {
  std::vector<Segment> train;
  std::vector<Segment> test;
  int train_records = 0;  // ranged recordings count once per side
  int test_records = 0;
};

inline Split build_split(const SplitManifest& manifest, const Dataset& ds) {
  manifest.validate();
  Split split;
  for (std::size_t i = 0; i < ds.recordings.size(); ++i) {
    const int id = ds.recordings[i].id;
    const int side = manifest.side_of(id);
    if (side < 0)
      throw UnmappedRecording("recording id not in split manifest: " + std::to_string(id));
    if (side == 2) {
      const auto it = std::find_if(manifest.ranged.begin(), manifest.ranged.end(),
                                   [id](const auto& r) { return r.id == id; });
      for (double s : segment_starts(it->train_lo, it->train_hi))
        split.train.push_back(dataset_detail::make_segment(ds, i, s));
      for (double s : segment_starts(it->test_lo, it->test_hi))
        split.test.push_back(dataset_detail::make_segment(ds, i, s));
      ++split.train_records;
      ++split.test_records;
      continue;
    }
    auto segs = segment_recording(ds, i);
    auto& dest = side == 0 ? split.train : split.test;
    dest.insert(dest.end(), segs.begin(), segs.end());
    (side == 0 ? split.train_records : split.test_records) += 1;
  }
  return split;
}

// The published per-category split, including the single-recording Trawler
// category divided at 15-125 s (train) and 125-163 s (test).
inline SplitManifest default_split_manifest() {
  SplitManifest m;
  m.train_ids = {
      {"Dredger", {80, 94, 96}},
      {"Fish boat", {73, 74, 76}},
      {"Motorboat", {27, 33, 39, 45, 50, 52, 70, 72, 77, 79}},
      {"Mussel boat", {47, 48, 49}},
      {"Natural noise", {82, 83, 84, 86, 87, 89, 90, 91, 92}},
      {"Ocean liner", {16, 23, 25, 69, 71}},
      {"Passenger ship", {6, 8, 9, 10, 11, 12, 13, 17, 32, 34, 36, 38,
                          41, 42, 53, 55, 59, 60, 62, 63, 64, 65, 67}},
      {"Pilotship", {29}},
      {"RO-RO ship", {18, 19, 58}},
      {"Sailboat", {37, 57, 68}},
      {"Tugboat", {15}},
  };
  m.test_ids = {
      {"Dredger", {93, 95}},
      {"Fish boat", {75}},
      {"Motorboat", {21, 26, 51}},
      {"Mussel boat", {46, 66}},
      {"Natural noise", {81, 85, 88}},
      {"Ocean liner", {22, 24}},
      {"Passenger ship", {7, 14, 35, 40, 43, 54, 61}},
      {"Pilotship", {30}},
      {"RO-RO ship", {20, 78}},
      {"Sailboat", {56}},
      {"Tugboat", {31}},
  };
  m.ranged.push_back({"Trawler", 28, 15.0, 125.0, 125.0, 163.0});
  return m;
}

// ---------------------------------------------------------------------------
// Manifest text formats
// ---------------------------------------------------------------------------

namespace dataset_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, delim)) fields.push_back(trim(field));
  return fields;
}

inline std::vector<int> parse_id_list(const std::string& s, int line_no) {
  std::vector<int> ids;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) {
    try {
      ids.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ManifestError("split manifest line " + std::to_string(line_no) +
                          ": bad id '" + tok + "'");
    }
  }
  return ids;
}

inline double parse_number(const std::string& s, int line_no, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ManifestError("manifest line " + std::to_string(line_no) + ": bad " +
                        std::string(what) + " '" + s + "'");
  }
}

}  // namespace dataset_detail

// Split manifest text format, one record per line, comma-delimited:
//   train, <category>, <id> <id> ...
//   test, <category>, <id> <id> ...
//   split, <category>, <id>, <train_lo_s>, <train_hi_s>, <test_lo_s>, <test_hi_s>
// Blank lines and lines starting with '#' are ignored.
inline SplitManifest parse_split_manifest(std::istream& in) {
  SplitManifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = dataset_detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = dataset_detail::split_fields(t, ',');
    if (fields[0] == "train" || fields[0] == "test") {
      if (fields.size() != 3)
        throw ManifestError("split manifest line " + std::to_string(line_no) +
                            ": expected 3 fields");
      auto& dest = fields[0] == "train" ? m.train_ids : m.test_ids;
      auto ids = dataset_detail::parse_id_list(fields[2], line_no);
      auto& bucket = dest[fields[1]];
      bucket.insert(bucket.end(), ids.begin(), ids.end());
    } else if (fields[0] == "split") {
      if (fields.size() != 7)
        throw ManifestError("split manifest line " + std::to_string(line_no) +
                            ": expected 7 fields");
      SplitManifest::Ranged r;
      r.category = fields[1];
      r.id = static_cast<int>(dataset_detail::parse_number(fields[2], line_no, "id"));
      r.train_lo = dataset_detail::parse_number(fields[3], line_no, "train_lo");
      r.train_hi = dataset_detail::parse_number(fields[4], line_no, "train_hi");
      r.test_lo = dataset_detail::parse_number(fields[5], line_no, "test_lo");
      r.test_hi = dataset_detail::parse_number(fields[6], line_no, "test_hi");
      m.ranged.push_back(r);
    } else {
      throw ManifestError("split manifest line " + std::to_string(line_no) +
                          ": unknown record '" + fields[0] + "'");
    }
  }
  m.validate();
  return m;
}

inline std::string serialize_split_manifest(const SplitManifest& m) {
  std::ostringstream out;
  out << "# train/test split: ids per category; 'split' rows divide one\n"
         "# recording by time range (seconds).\n";
  auto emit = [&out](const char* side, const std::map<std::string, std::vector<int>>& ids) {
    for (const auto& [cat, list] : ids) {
      out << side << ", " << cat << ",";
      for (int id : list) out << ' ' << id;
      out << '\n';
    }
  };
  emit("train", m.train_ids);
  emit("test", m.test_ids);
  for (const auto& r : m.ranged)
    out << "split, " << r.category << ", " << r.id << ", " << r.train_lo << ", "
        << r.train_hi << ", " << r.test_lo << ", " << r.test_hi << '\n';
  return out.str();
}

// Metadata manifest: one comma-delimited row per recording,
//   id, category, range_m, depth_m, wind_kmh[, duration_s]
// with an em dash (or "-") marking an absent annotation. The trailing
// duration column is optional; audio-backed loads take duration from the WAV.
inline std::vector<RecordingMeta> parse_metadata_manifest(std::istream& in) {
  std::vector<RecordingMeta> metas;
  std::string line;
  int line_no = 0;
  const auto& known = canonical_categories();
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = dataset_detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = dataset_detail::split_fields(t, ',');
    if (fields.size() != 5 && fields.size() != 6)
      throw ManifestError("metadata line " + std::to_string(line_no) +
                          ": expected 5 or 6 fields, got " + std::to_string(fields.size()));
    RecordingMeta meta;
    meta.id = static_cast<int>(dataset_detail::parse_number(fields[0], line_no, "id"));
    meta.category = fields[1];
    if (std::find(known.begin(), known.end(), meta.category) == known.end())
      throw ManifestError("metadata line " + std::to_string(line_no) +
                          ": unknown category '" + meta.category + "'");
    auto opt_field = [line_no](const std::string& s, const char* what) -> std::optional<double> {
      if (s == "—" || s == "-" || s.empty()) return std::nullopt;
      const double v = dataset_detail::parse_number(s, line_no, what);
      if (v < 0) throw ManifestError("metadata line " + std::to_string(line_no) +
                                     ": negative " + std::string(what));
      return v;
    };
    meta.source_range_m = opt_field(fields[2], "range");
    meta.depth_m = opt_field(fields[3], "depth");
    meta.wind_kmh = opt_field(fields[4], "wind");
    if (fields.size() == 6)
      meta.duration_s = dataset_detail::parse_number(fields[5], line_no, "duration");
    metas.push_back(meta);
  }
  return metas;
}

inline std::string serialize_metadata_manifest(const std::vector<RecordingMeta>& metas) {
  std::ostringstream out;
  out.precision(12);
  auto field = [](const std::optional<double>& v) {
    if (!v.has_value()) return std::string("-");
    std::ostringstream s;
    s.precision(12);
    s << *v;
    return s.str();
  };
  for (const RecordingMeta& m : metas) {
    out << m.id << ", " << m.category << ", " << field(m.source_range_m) << ", "
        << field(m.depth_m) << ", " << field(m.wind_kmh);
    if (m.duration_s > 0) out << ", " << m.duration_s;
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Corpus loading
// ---------------------------------------------------------------------------

// Finds <root>/<id>.wav, or any WAV whose filename starts with the id number
// followed by a non-digit (the corpus names files like "28=Trawler.wav").
inline std::string find_recording_wav(const std::string& root, int id) {
  namespace fs = std::filesystem;
  const fs::path exact = fs::path(root) / (std::to_string(id) + ".wav");
  if (fs::exists(exact)) return exact.string();
  std::vector<std::string> matches;
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      if (entry.path().extension() != ".wav") continue;
      std::size_t i = 0;
      while (i < name.size() && name[i] == '0') ++i;
      std::size_t j = i;
      while (j < name.size() && std::isdigit(static_cast<unsigned char>(name[j]))) ++j;
      if (j == i) continue;
      if (std::stoi(name.substr(i, j - i)) == id) matches.push_back(entry.path().string());
    }
  }
  std::sort(matches.begin(), matches.end());
  if (matches.empty())
    throw IngestError("no WAV for recording id " + std::to_string(id) + " under " + root);
  return matches.front();
}

// Loads every manifest row's audio. Missing or unreadable files raise
// IngestError naming the offending id; nothing is silently skipped.
inline Dataset load_shipsear(const std::string& root,
                             const std::vector<RecordingMeta>& metas) {
  std::vector<RecordingMeta> out_metas;
  std::vector<Waveform> waves;
  for (const RecordingMeta& meta : metas) {
    std::string path;
    try {
      path = find_recording_wav(root, meta.id);
      waves.push_back(read_wav_mono(path));
    } catch (const Error& e) {
      throw IngestError("recording " + std::to_string(meta.id) + ": " + e.what());
    }
    RecordingMeta m = meta;
    m.duration_s = waves.back().duration_s();
    out_metas.push_back(std::move(m));
  }
  return make_dataset(std::move(out_metas), std::move(waves));
}

// ---------------------------------------------------------------------------
// Aggregate label statistics
// ---------------------------------------------------------------------------

struct AuxLabelCounts {
  std::vector<int> per_class;
  int excluded = 0;
};

inline AuxLabelCounts count_aux_labels(const std::vector<RecordingMeta>& metas,
                                       Factor factor) {
  const AuxiliaryTaskSpec spec = aux_task_spec(factor);
  AuxLabelCounts counts;
  counts.per_class.assign(static_cast<std::size_t>(spec.n_aux), 0);
  for (const auto& m : metas) {
    const int label = map_aux_label(spec, m.factor_value(factor));
    if (label == kExcludedLabel)
      ++counts.excluded;
    else
      ++counts.per_class[static_cast<std::size_t>(label)];
  }
  return counts;
}

}  // namespace amt

#endif  // AMT_DATASET_HPP_
