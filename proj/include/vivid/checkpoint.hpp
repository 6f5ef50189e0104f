// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint container:
//
//   "VLCK" | u32 version=1 | u32 header_len | header (UTF-8 JSON)
//   u32 n_tensors | per tensor: u32 name_len | name | u32 ndim | u32 dims[ndim]
//                               | f32 data (row-major, little-endian)
//
// The header carries "kind" ("denoiser" | "predictor"), "frozen", the model
// config and training progress.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vivid/binio.hpp"
#include "vivid/intensity_predictor.hpp"
#include "vivid/model.hpp"

namespace vivid {

inline constexpr char kCheckpointMagic[4] = {'V', 'L', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> data;
};

struct Checkpoint {
  json header = json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }

  template <typename T>
  void put(const std::string& name, const Mat<T>& m) {
    NamedTensor t{name, {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, {}};
    t.data.resize(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i) t.data[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
    tensors.push_back(std::move(t));
  }

  template <typename T>
  Mat<T> get(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
    const NamedTensor* t = find(name);
    if (t == nullptr) fail(Errc::shape_inconsistent, "checkpoint: missing tensor " + name);
    if (t->shape.size() != 2 || t->shape[0] != rows || t->shape[1] != cols) {
      fail(Errc::shape_inconsistent, "checkpoint: tensor " + name + " has wrong shape");
    }
    Mat<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(t->data[static_cast<std::size_t>(i)]);
    return m;
  }
};

inline std::string encode_checkpoint(const Checkpoint& ck) {
  binio::Writer w;
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  w.str(ck.header.dump());
  w.u32(static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    std::size_t n = 1;
    for (auto d : t.shape) {
      w.u32(d);
      n *= d;
    }
    require(n == t.data.size(), Errc::shape, "checkpoint: tensor " + t.name + " data does not match its shape");
    for (float f : t.data) w.f32(f);
  }
  return w.data();
}

inline Checkpoint decode_checkpoint(std::string bytes, const std::string& origin) {
  binio::Reader r(std::move(bytes), origin);
  if (r.remaining() < 4 || r.bytes(4) != std::string_view(kCheckpointMagic, 4)) {
    fail(Errc::bad_magic, origin + ": not a VLCK checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    fail(Errc::version_mismatch, origin + ": checkpoint version " + std::to_string(version) + ", expected " +
                                     std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  try {
    ck.header = json::parse(r.str());
  } catch (const json::parse_error& e) {
    fail(Errc::shape_inconsistent, origin + ": corrupt checkpoint header: " + e.what());
  }
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    NamedTensor t;
    t.name = r.str();
    const std::uint32_t ndim = r.u32();
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(r.u32());
      count *= t.shape.back();
    }
    if (r.remaining() < 4 * count) fail(Errc::truncated, origin + ": truncated in tensor " + t.name);
    t.data.resize(count);
    for (auto& f : t.data) f = r.f32();
    ck.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) fail(Errc::shape_inconsistent, origin + ": trailing bytes after checkpoint payload");
  return ck;
}

/// Writes through a temporary file and renames, so an interrupted write
/// never replaces a good checkpoint.
inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  binio::write_file(tmp, encode_checkpoint(ck));
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(binio::read_file(path), path.string());
}

template <typename T>
void export_params(const ParamStore<T>& store, Checkpoint& ck, const std::string& prefix = "") {
  for (std::size_t i = 0; i < store.size(); ++i) ck.put(prefix + store[i].name, store[i].value);
}

template <typename T>
void import_params(ParamStore<T>& store, const Checkpoint& ck, const std::string& prefix = "") {
  for (std::size_t i = 0; i < store.size(); ++i) {
    Param<T>& p = store[i];
    p.value = ck.get<T>(prefix + p.name, p.value.rows(), p.value.cols());
  }
}

// ---------------------------------------------------------------------------
// Config headers

inline json to_json(const ModelConfig& c) {
  return json{{"d_model", c.d_model},     {"n_blocks", c.n_blocks},   {"n_heads", c.n_heads},
              {"d_text", c.d_text},       {"frames", c.frames},       {"timesteps", c.timesteps},
              {"text_encoder", c.text_encoder}, {"init_seed", c.init_seed}};
}

inline ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<Eigen::Index>();
  c.n_blocks = j.at("n_blocks").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_text = j.at("d_text").get<Eigen::Index>();
  c.frames = j.at("frames").get<Eigen::Index>();
  c.timesteps = j.at("timesteps").get<int>();
  c.text_encoder = j.at("text_encoder").get<std::string>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

inline json to_json(const PredictorConfig& c) {
  return json{{"window", c.window}, {"hidden", c.hidden}, {"layers", c.layers}, {"init_seed", c.init_seed}};
}

inline PredictorConfig predictor_config_from_json(const json& j) {
  PredictorConfig c;
  c.window = j.at("window").get<Eigen::Index>();
  c.hidden = j.at("hidden").get<Eigen::Index>();
  c.layers = j.at("layers").get<int>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

// ---------------------------------------------------------------------------
// Predictor checkpoints

inline Checkpoint predictor_checkpoint(const IntensityPredictor<float>& p, bool frozen, json extra = json::object()) {
  Checkpoint ck;
  ck.header = std::move(extra);
  ck.header["kind"] = "predictor";
  ck.header["frozen"] = frozen;
  ck.header["config"] = to_json(p.config());
  export_params(p.params(), ck);
  return ck;
}

enum class PredictorUse { inference, training };

/// Loads a predictor checkpoint. A frozen checkpoint refuses
/// PredictorUse::training; for inference the returned predictor is frozen.
template <typename T = float>
std::unique_ptr<IntensityPredictor<T>> load_predictor(const std::filesystem::path& path,
                                                      PredictorUse use = PredictorUse::inference) {
  const Checkpoint ck = load_checkpoint(path);
  if (ck.header.value("kind", "") != "predictor") {
    fail(Errc::bad_magic, path.string() + ": checkpoint kind is not 'predictor'");
  }
  const bool frozen = ck.header.value("frozen", false);
  if (frozen && use == PredictorUse::training) {
    fail(Errc::frozen, path.string() + ": predictor checkpoint is frozen and cannot be loaded for training");
  }
  auto p = std::make_unique<IntensityPredictor<T>>(predictor_config_from_json(ck.header.at("config")));
  import_params(p->params(), ck);
  if (use == PredictorUse::inference) p->freeze();
  return p;
}

}  // namespace vivid
