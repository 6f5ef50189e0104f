// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "vivid/autograd.hpp"
#include "vivid/rng.hpp"

namespace vivid {

/// Owns every trainable tensor of a model in registration order. Layers keep
/// raw pointers into the store, so a store must outlive its layers and is
/// neither copyable nor movable.
template <typename T>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  Param<T>& add(std::string name, Mat<T> init) {
    for (const auto& p : params_) require(p->name != name, Errc::usage, "duplicate parameter name " + name);
    params_.push_back(std::make_unique<Param<T>>(Param<T>{std::move(name), std::move(init)}));
    return *params_.back();
  }

  Param<T>* find(const std::string& name) const {
    for (const auto& p : params_) {
      if (p->name == name) return p.get();
    }
    return nullptr;
  }

  std::size_t size() const { return params_.size(); }
  Param<T>& operator[](std::size_t i) { return *params_[i]; }
  const Param<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

 private:
  std::vector<std::unique_ptr<Param<T>>> params_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) draws, taken in double so float
/// and double models built from one seed start from the same weights.
template <typename T>
Mat<T> uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  return m;
}

/// y = x W + b with W stored [in x out].
template <typename T>
struct Linear {
  Param<T>* weight = nullptr;
  Param<T>* bias = nullptr;

  Linear() = default;
  Linear(ParamStore<T>& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight = &store.add(name + ".weight", uniform_init<T>(in, out, bound, rng));
    bias = &store.add(name + ".bias", Mat<T>::Zero(1, out));
  }

  Eigen::Index in_features() const { return weight->value.rows(); }
  Eigen::Index out_features() const { return weight->value.cols(); }

  ag::Var<T> operator()(ag::Tape<T>& tape, const ag::Var<T>& x, bool trainable = true) const {
    return ag::affine(x, tape.param(*weight, trainable), tape.param(*bias, trainable));
  }
};

/// Per-token layer normalization with learned gain and shift.
template <typename T>
struct LayerNorm {
  static constexpr double kEps = 1e-6;

  Param<T>* gain = nullptr;
  Param<T>* shift = nullptr;

  LayerNorm() = default;
  LayerNorm(ParamStore<T>& store, const std::string& name, Eigen::Index width) {
    gain = &store.add(name + ".gain", Mat<T>::Ones(1, width));
    shift = &store.add(name + ".shift", Mat<T>::Zero(1, width));
  }

  ag::Var<T> operator()(ag::Tape<T>& tape, const ag::Var<T>& x) const {
    auto y = ag::normalize_rows(x, static_cast<T>(kEps));
    return ag::add_row(ag::mul_row(y, tape.param(*gain)), tape.param(*shift));
  }
};

/// Multi-head attention with learned query/key/value/output projections.
template <typename T>
struct MultiHeadAttention {
  Linear<T> query, key, value, output;
  int heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore<T>& store, const std::string& name, Eigen::Index width, int n_heads, Rng& rng)
      : heads(n_heads) {
    require(n_heads >= 1 && width % n_heads == 0, Errc::usage,
            name + ": d_model " + std::to_string(width) + " not divisible by " + std::to_string(n_heads) + " heads");
    query = Linear<T>(store, name + ".query", width, width, rng);
    key = Linear<T>(store, name + ".key", width, width, rng);
    value = Linear<T>(store, name + ".value", width, width, rng);
    output = Linear<T>(store, name + ".output", width, width, rng);
  }

  ag::Var<T> operator()(ag::Tape<T>& tape, const ag::Var<T>& q_src, const ag::Var<T>& kv_src,
                        std::vector<Mat<T>>* weights = nullptr) const {
    auto q = query(tape, q_src);
    auto k = key(tape, kv_src);
    auto v = value(tape, kv_src);
    return output(tape, ag::attention(q, k, v, heads, weights));
  }
};

/// Kernel-3 temporal convolution with zero "same" padding, expressed as one
/// affine map over [x(t-1) | x(t) | x(t+1)]. A positive `segment` keeps the
/// receptive field inside consecutive blocks of that many rows.
template <typename T>
struct TemporalConv3 {
  Linear<T> taps;
  Eigen::Index segment = 0;

  TemporalConv3() = default;
  TemporalConv3(ParamStore<T>& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng,
                Eigen::Index segment_rows = 0)
      : taps(store, name, 3 * in, out, rng), segment(segment_rows) {}

  ag::Var<T> operator()(ag::Tape<T>& tape, const ag::Var<T>& x, bool trainable = true) const {
    auto stacked = ag::concat_cols<T>({ag::shift_rows(x, 1, segment), x, ag::shift_rows(x, -1, segment)});
    return taps(tape, stacked, trainable);
  }
};

}  // namespace vivid
