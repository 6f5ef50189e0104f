// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vivid/motion_data.hpp"
#include "vivid/synthetic.hpp"

namespace vivid {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct ManifestEntry {
  std::string id;
  std::string path;  // relative to the manifest directory
};

/// manifest.json: {samples, split, normalization_stats} plus generation echo.
struct DatasetManifest {
  fs::path root;
  Eigen::Index frames = 0;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> samples;
  std::vector<std::string> train;
  std::vector<std::string> test;
  NormalizationStats stats;

  const ManifestEntry& entry(const std::string& id) const {
    for (const auto& e : samples) {
      if (e.id == id) return e;
    }
    fail(Errc::missing_pair, "sample id not in manifest: " + id);
  }

  fs::path path_of(const std::string& id) const { return root / entry(id).path; }

  DyadSample load(const std::string& id) const {
    DyadSample s = load_sample(path_of(id));
    s.sample_id = id;
    return s;
  }
};

namespace detail {

inline json stats_json(const MotionStats& s) {
  return json{{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
              {"std", std::vector<double>(s.std.data(), s.std.data() + s.std.size())}};
}

inline MotionStats stats_from_json(const json& j) {
  MotionStats s;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto sd = j.at("std").get<std::vector<double>>();
  s.mean = Eigen::Map<const Eigen::RowVectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  s.std = Eigen::Map<const Eigen::RowVectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
  s.validate();
  return s;
}

}  // namespace detail

inline json stats_to_json(const NormalizationStats& s) {
  return json{{"listener", detail::stats_json(s.listener)}, {"speaker", detail::stats_json(s.speaker)}};
}

inline NormalizationStats stats_from_json(const json& j) {
  return {detail::stats_from_json(j.at("listener")), detail::stats_from_json(j.at("speaker"))};
}

inline json manifest_to_json(const DatasetManifest& m) {
  json samples = json::array();
  for (const auto& e : m.samples) samples.push_back({{"id", e.id}, {"path", e.path}});
  return json{{"format", "vivid-manifest"},
              {"version", 1},
              {"frames", m.frames},
              {"seed", m.seed},
              {"samples", samples},
              {"split", {{"train", m.train}, {"test", m.test}}},
              {"normalization_stats", stats_to_json(m.stats)}};
}

inline void write_manifest(const DatasetManifest& m) {
  binio::write_file(m.root / "manifest.json", manifest_to_json(m).dump(2) + "\n");
}

/// Reads dir/manifest.json and checks that every referenced file exists.
inline DatasetManifest read_manifest(const fs::path& dir) {
  const fs::path file = fs::is_directory(dir) ? dir / "manifest.json" : dir;
  json j;
  try {
    j = json::parse(binio::read_file(file));
  } catch (const json::exception& e) {
    fail(Errc::io, file.string() + ": invalid manifest JSON: " + e.what());
  }
  DatasetManifest m;
  m.root = file.parent_path();
  try {
    m.frames = j.at("frames").get<Eigen::Index>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("samples")) m.samples.push_back({e.at("id").get<std::string>(), e.at("path").get<std::string>()});
    m.train = j.at("split").at("train").get<std::vector<std::string>>();
    m.test = j.at("split").at("test").get<std::vector<std::string>>();
    m.stats = stats_from_json(j.at("normalization_stats"));
  } catch (const json::exception& e) {
    fail(Errc::io, file.string() + ": malformed manifest: " + e.what());
  }
  for (const auto& e : m.samples) {
    const fs::path p = m.root / e.path;
    if (!fs::exists(p)) fail(Errc::missing_file, "manifest references missing file: " + p.string());
  }
  return m;
}

struct GenerateOptions {
  std::size_t n_samples = 512;
  Eigen::Index frames = 60;
  std::uint64_t seed = 0;
  double test_fraction = 0.1;
};

/// Generates samples, a train/test split and train-split normalization stats
/// under `dir`, writing samples/<id>.vldx, manifest.json and stats.txt.
inline DatasetManifest generate_synthetic_dataset(const GenerateOptions& opt, const fs::path& dir) {
  require(opt.n_samples >= 1, Errc::usage, "n_samples must be >= 1");
  require(opt.frames >= kFramesPerTag && opt.frames % kFramesPerTag == 0, Errc::usage,
          "frames must be a positive multiple of 6 (30 fps motion over 5 Hz tags), got " + std::to_string(opt.frames));
  require(opt.test_fraction >= 0.0 && opt.test_fraction < 1.0, Errc::usage, "test_fraction must be in [0, 1)");

  DatasetManifest m;
  m.root = dir;
  m.frames = opt.frames;
  m.seed = opt.seed;

  synthetic::Options gen;
  gen.frames = opt.frames;
  gen.seed = opt.seed;
  std::vector<DyadSample> samples;
  samples.reserve(opt.n_samples);
  for (std::size_t i = 0; i < opt.n_samples; ++i) {
    samples.push_back(synthetic::generate_sample(gen, synthetic::sample_name(i)));
    const auto& s = samples.back();
    const std::string rel = "samples/" + s.sample_id + ".vldx";
    save_sample(s, dir / rel);
    m.samples.push_back({s.sample_id, rel});
  }

  // Seeded shuffle; the first n_test ids form the test split.
  std::vector<std::size_t> order(opt.n_samples);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(opt.seed, 0x5317));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::size_t n_test = static_cast<std::size_t>(std::floor(opt.test_fraction * static_cast<double>(opt.n_samples)));
  if (opt.test_fraction > 0.0 && n_test == 0 && opt.n_samples >= 2) n_test = 1;
  std::vector<bool> is_test(opt.n_samples, false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
  std::vector<const MotionSequence*> listeners, speakers;
  for (std::size_t i = 0; i < opt.n_samples; ++i) {
    if (is_test[i]) {
      m.test.push_back(samples[i].sample_id);
    } else {
      m.train.push_back(samples[i].sample_id);
      listeners.push_back(&samples[i].listener_motion);
      speakers.push_back(&samples[i].speaker_motion);
    }
  }
  m.stats.listener = MotionStats::compute(listeners);
  m.stats.speaker = MotionStats::compute(speakers);
  write_manifest(m);

  std::ostringstream summary;
  summary << std::setprecision(6);
  summary << "samples " << opt.n_samples << "\nframes " << opt.frames << "\nseed " << opt.seed << "\ntrain "
          << m.train.size() << "\ntest " << m.test.size() << "\n";
  std::map<int, int> templates;
  double a_sum = 0, v_sum = 0;
  for (const auto& s : samples) {
    templates[s.text.template_id.value_or(-1)]++;
    a_sum += s.tags.va.col(1).mean();
    v_sum += s.tags.va.col(0).mean();
  }
  summary << "distinct_templates " << templates.size() << "\nmean_valence " << v_sum / opt.n_samples
          << "\nmean_arousal " << a_sum / opt.n_samples << "\nlistener_std_mean " << m.stats.listener.std.mean()
          << "\nspeaker_std_mean " << m.stats.speaker.std.mean() << "\n";
  binio::write_file(dir / "stats.txt", summary.str());
  return m;
}

}  // namespace vivid
