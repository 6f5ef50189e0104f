// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "vivid/motion_data.hpp"
#include "vivid/nn.hpp"

namespace vivid {

struct PredictorConfig {
  Eigen::Index window = kFramesPerTag;  // frames per VA tag
  Eigen::Index hidden = 32;
  int layers = 2;  // MLP layers after pooling; the last one outputs VA
  std::uint64_t init_seed = 0;

  void validate() const {
    require(window >= 1, Errc::usage, "predictor window must be >= 1");
    require(hidden >= 1, Errc::usage, "predictor hidden width must be >= 1");
    require(layers >= 1, Errc::usage, "predictor layers must be >= 1");
  }
};

/// Maps normalized listener motion [L x 56] to VA tags [L/window x 2].
///
/// A kernel-3 temporal convolution confined to each window, GELU, mean
/// pooling per window, then an MLP whose output is squashed into (-1, 1).
/// A frozen predictor is used with its parameters bound as constants, so
/// gradients flow through it to the motion but never into its weights.
template <typename T>
class IntensityPredictor {
 public:
  static constexpr double kSquash = 1.0 - 1e-4;

  explicit IntensityPredictor(const PredictorConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    Rng rng(mix_seed(cfg.init_seed, 0x22));
    conv_ = TemporalConv3<T>(store_, "predictor.conv", kMotionDims, cfg.hidden, rng, cfg.window);
    for (int l = 0; l + 1 < cfg.layers; ++l) {
      mlp_.emplace_back(store_, "predictor.mlp" + std::to_string(l), cfg.hidden, cfg.hidden, rng);
    }
    mlp_.emplace_back(store_, "predictor.out", cfg.hidden, 2, rng);
  }

  IntensityPredictor(const IntensityPredictor&) = delete;
  IntensityPredictor& operator=(const IntensityPredictor&) = delete;

  const PredictorConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  ag::Var<T> operator()(ag::Tape<T>& tape, const ag::Var<T>& motion) const {
    require(motion.cols() == kMotionDims, Errc::shape, "predict_va: expected 56 motion channels");
    require(motion.rows() % cfg_.window == 0, Errc::shape,
            "predict_va: L=" + std::to_string(motion.rows()) + " not divisible by window " +
                std::to_string(cfg_.window));
    const bool trainable = !frozen_;
    auto h = ag::pool_rows(ag::gelu(conv_(tape, motion, trainable)), cfg_.window);
    for (std::size_t l = 0; l + 1 < mlp_.size(); ++l) h = ag::gelu(mlp_[l](tape, h, trainable));
    return ag::scale(ag::tanh(mlp_.back()(tape, h, trainable)), static_cast<T>(kSquash));
  }

  /// Inference-only convenience.
  Mat<T> predict(const Mat<T>& motion) const {
    ag::Tape<T> tape(false);
    return (*this)(tape, tape.constant(motion)).value();
  }

 private:
  PredictorConfig cfg_;
  ParamStore<T> store_;
  TemporalConv3<T> conv_;
  std::vector<Linear<T>> mlp_;
  bool frozen_ = false;
};

}  // namespace vivid
