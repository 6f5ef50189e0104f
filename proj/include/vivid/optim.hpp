// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "vivid/checkpoint.hpp"
#include "vivid/nn.hpp"

namespace vivid {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay over every parameter of a store.
template <typename T>
class AdamW {
 public:
  AdamW(ParamStore<T>& store, const AdamWConfig& cfg) : store_(store), cfg_(cfg) {
    for (std::size_t i = 0; i < store.size(); ++i) {
      m_.push_back(Mat<T>::Zero(store[i].value.rows(), store[i].value.cols()));
      v_.push_back(Mat<T>::Zero(store[i].value.rows(), store[i].value.cols()));
    }
  }

  const AdamWConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  long long steps() const { return steps_; }

  /// grads[i] pairs with store[i]; an empty matrix means zero gradient.
  void step(const std::vector<Mat<T>>& grads) {
    require(grads.size() == store_.size(), Errc::shape, "AdamW: gradient count does not match parameters");
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    const T lr = static_cast<T>(cfg_.lr);
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    for (std::size_t i = 0; i < grads.size(); ++i) {
      Mat<T>& p = store_[i].value;
      p -= p * static_cast<T>(cfg_.lr * cfg_.weight_decay);
      if (grads[i].size() != 0) {
        m_[i] = m_[i] * b1 + grads[i] * (T(1) - b1);
        v_[i] = v_[i] * b2 + grads[i].cwiseAbs2() * (T(1) - b2);
      } else {
        m_[i] *= b1;
        v_[i] *= b2;
      }
      const auto m_hat = m_[i].array() / static_cast<T>(bc1);
      const auto v_hat = v_[i].array() / static_cast<T>(bc2);
      p.array() -= lr * m_hat / (v_hat.sqrt() + static_cast<T>(cfg_.eps));
    }
  }

  void export_state(Checkpoint& ck) const {
    for (std::size_t i = 0; i < store_.size(); ++i) {
      ck.put("adam.m/" + store_[i].name, m_[i]);
      ck.put("adam.v/" + store_[i].name, v_[i]);
    }
    ck.header["optimizer"] = {{"steps", steps_}, {"lr", cfg_.lr}, {"weight_decay", cfg_.weight_decay}};
  }

  void import_state(const Checkpoint& ck) {
    for (std::size_t i = 0; i < store_.size(); ++i) {
      m_[i] = ck.get<T>("adam.m/" + store_[i].name, m_[i].rows(), m_[i].cols());
      v_[i] = ck.get<T>("adam.v/" + store_[i].name, v_[i].rows(), v_[i].cols());
    }
    steps_ = ck.header.at("optimizer").at("steps").get<long long>();
  }

 private:
  ParamStore<T>& store_;
  AdamWConfig cfg_;
  std::vector<Mat<T>> m_, v_;
  long long steps_ = 0;
};

/// Scales grads in place so their joint L2 norm is at most max_norm
/// (no-op when max_norm <= 0). Returns the norm before clipping.
template <typename T>
double clip_global_norm(std::vector<Mat<T>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += static_cast<double>(g.squaredNorm());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& g : grads) g *= s;
  }
  return norm;
}

}  // namespace vivid
