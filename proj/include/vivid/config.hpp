// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "vivid/dataset.hpp"
#include "vivid/intensity_predictor.hpp"
#include "vivid/metrics.hpp"
#include "vivid/model.hpp"
#include "vivid/train.hpp"

namespace vivid {

/// Fully resolved settings for one command.
struct RunConfig {
  std::string profile = "desk";
  std::uint64_t seed = 0;
  std::string seed_source = "default";

  GenerateOptions data;
  ModelConfig model;
  int ddim_steps = 25;
  double schedule_offset = 0.008;
  TrainConfig train;
  PredictorConfig predictor;
  PredictorTrainConfig predictor_train;
  metrics::SuiteConfig metrics;

  /// Derives every per-stage seed from the resolved run seed.
  void propagate_seed() {
    data.seed = seed;
    model.init_seed = mix_seed(seed, 1);
    train.seed = mix_seed(seed, 2);
    predictor.init_seed = mix_seed(seed, 3);
    predictor_train.seed = mix_seed(seed, 4);
    metrics.seed = mix_seed(seed, 5);
  }

  void validate() const {
    require(data.frames > 0 && data.frames % kFramesPerTag == 0, Errc::usage,
            "data.frames must be a positive multiple of 6, got " + std::to_string(data.frames));
    require(data.n_samples >= 1, Errc::usage, "data.n_samples must be >= 1");
    require(data.test_fraction >= 0.0 && data.test_fraction < 1.0, Errc::usage, "data.test_fraction must be in [0, 1)");
    model.validate();
    require(ddim_steps >= 1 && ddim_steps <= model.timesteps, Errc::usage,
            "diffusion.ddim_steps must be in [1, timesteps]");
    require(schedule_offset > 0.0, Errc::usage, "diffusion.schedule_offset must be > 0");
    require(train.epochs >= 1 && train.batch_size >= 1, Errc::usage, "train.epochs and train.batch must be >= 1");
    require(train.adam.lr > 0.0, Errc::usage, "train.lr must be > 0");
    require(train.grad_clip >= 0.0, Errc::usage, "train.grad_clip must be >= 0 (0 disables)");
    require(train.checkpoint_every >= 1, Errc::usage, "train.checkpoint_every must be >= 1");
    require(train.workers >= 1, Errc::usage, "train.workers must be >= 1");
    predictor.validate();
    require(predictor_train.epochs >= 1 && predictor_train.batch_size >= 1, Errc::usage,
            "predictor epochs and batch must be >= 1");
    require(metrics.sid_k > 1, Errc::usage, "metrics.sid_k must be > 1");
  }
};

inline RunConfig profile_config(const std::string& name) {
  RunConfig c;
  c.profile = name;
  if (name == "desk") {
    // defaults above
  } else if (name == "paper") {
    c.data.frames = 240;
    c.model.frames = 240;
    c.model.timesteps = 1000;
    c.ddim_steps = 100;
    c.train.batch_size = 64;
    c.train.adam.lr = 1e-5;
    c.train.epochs = 800;
  } else {
    fail(Errc::usage, "unknown profile '" + name + "' (expected desk or paper)");
  }
  c.propagate_seed();
  return c;
}

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && end == v.data() + v.size(), Errc::usage, key + ": expected an integer, got '" + v + "'");
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == v.size() && !v.empty() && std::isfinite(out), Errc::usage,
          key + ": expected a finite number, got '" + v + "'");
  return out;
}

}  // namespace detail

/// Applies `[section]` / `key = value` text on top of `cfg`. Unknown
/// sections or keys are errors, reported with their line number.
inline void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto i64 = [](auto& field) {
    return Setter([&field](const std::string& k, const std::string& v) {
      field = detail::parse_int<std::remove_reference_t<decltype(field)>>(k, v);
    });
  };
  auto real = [](double& field) {
    return Setter([&field](const std::string& k, const std::string& v) { field = detail::parse_real(k, v); });
  };
  std::optional<std::uint64_t> file_seed;
  const std::map<std::string, Setter> setters = {
      {"seed", [&](const std::string& k, const std::string& v) { file_seed = detail::parse_int<std::uint64_t>(k, v); }},
      {"data.n_samples", i64(cfg.data.n_samples)},
      {"data.frames",
       [&](const std::string& k, const std::string& v) {
         cfg.data.frames = detail::parse_int<Eigen::Index>(k, v);
         cfg.model.frames = cfg.data.frames;
       }},
      {"data.test_fraction", real(cfg.data.test_fraction)},
      {"model.d_model", i64(cfg.model.d_model)},
      {"model.n_blocks", i64(cfg.model.n_blocks)},
      {"model.n_heads", i64(cfg.model.n_heads)},
      {"model.d_text", i64(cfg.model.d_text)},
      {"model.text_encoder", [&](const std::string&, const std::string& v) { cfg.model.text_encoder = v; }},
      {"model.predictor_hidden", i64(cfg.predictor.hidden)},
      {"model.predictor_layers", i64(cfg.predictor.layers)},
      {"diffusion.timesteps", i64(cfg.model.timesteps)},
      {"diffusion.ddim_steps", i64(cfg.ddim_steps)},
      {"diffusion.schedule_offset", real(cfg.schedule_offset)},
      {"diffusion.lambda_simple", real(cfg.train.weights.simple)},
      {"diffusion.lambda_emotional", real(cfg.train.weights.emotional)},
      {"diffusion.lambda_vel", real(cfg.train.weights.vel)},
      {"train.epochs", i64(cfg.train.epochs)},
      {"train.batch", i64(cfg.train.batch_size)},
      {"train.lr", real(cfg.train.adam.lr)},
      {"train.weight_decay", real(cfg.train.adam.weight_decay)},
      {"train.grad_clip", real(cfg.train.grad_clip)},
      {"train.checkpoint_every", i64(cfg.train.checkpoint_every)},
      {"train.workers", i64(cfg.train.workers)},
      {"train.predictor_epochs", i64(cfg.predictor_train.epochs)},
      {"train.predictor_batch", i64(cfg.predictor_train.batch_size)},
      {"train.predictor_lr", real(cfg.predictor_train.adam.lr)},
      {"metrics.sid_k", i64(cfg.metrics.sid_k)},
      {"metrics.rpcc_mode",
       [&](const std::string& k, const std::string& v) {
         if (v == "differenced") cfg.metrics.rpcc_mode = metrics::RpccMode::differenced;
         else if (v == "raw") cfg.metrics.rpcc_mode = metrics::RpccMode::raw;
         else fail(Errc::usage, k + ": expected differenced or raw, got '" + v + "'");
       }},
  };
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      require(line.back() == ']', Errc::usage, where + "malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      require(section == "data" || section == "model" || section == "diffusion" || section == "train" ||
                  section == "metrics",
              Errc::usage, where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, Errc::usage, where + "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = setters.find(full);
    require(it != setters.end(), Errc::usage, where + "unknown key '" + full + "'");
    try {
      it->second(full, value);
    } catch (const Error& e) {
      fail(e.code(), where + e.what());
    }
  }
  if (file_seed) {
    cfg.seed = *file_seed;
    cfg.seed_source = "config";
  }
}

/// Profile defaults, then the config file, then the seed overrides
/// (--seed beats VLDN_SEED beats the file).
inline RunConfig resolve_config(const std::string& profile, const std::optional<std::filesystem::path>& config_path,
                                std::optional<std::uint64_t> cli_seed, const char* env_seed) {
  RunConfig cfg = profile_config(profile);
  if (config_path) apply_config_text(cfg, binio::read_file(*config_path), config_path->string());
  if (env_seed != nullptr && *env_seed != '\0') {
    cfg.seed = detail::parse_int<std::uint64_t>("VLDN_SEED", env_seed);
    cfg.seed_source = "env";
  }
  if (cli_seed) {
    cfg.seed = *cli_seed;
    cfg.seed_source = "flag";
  }
  cfg.propagate_seed();
  cfg.validate();
  return cfg;
}

inline nlohmann::json to_json(const RunConfig& c) {
  return nlohmann::json{
      {"profile", c.profile},
      {"seed", c.seed},
      {"seed_source", c.seed_source},
      {"data", {{"n_samples", c.data.n_samples}, {"frames", c.data.frames}, {"test_fraction", c.data.test_fraction}}},
      {"model", to_json(c.model)},
      {"predictor", to_json(c.predictor)},
      {"diffusion",
       {{"timesteps", c.model.timesteps},
        {"ddim_steps", c.ddim_steps},
        {"schedule_offset", c.schedule_offset},
        {"lambda_simple", c.train.weights.simple},
        {"lambda_emotional", c.train.weights.emotional},
        {"lambda_vel", c.train.weights.vel}}},
      {"train", to_json(c.train)},
      {"predictor_train",
       {{"epochs", c.predictor_train.epochs},
        {"batch", c.predictor_train.batch_size},
        {"lr", c.predictor_train.adam.lr},
        {"seed", c.predictor_train.seed}}},
      {"metrics", metrics::to_json(c.metrics)},
  };
}

}  // namespace vivid
