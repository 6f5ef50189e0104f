// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vivid/eit.hpp"
#include "vivid/nn.hpp"

namespace vivid {

struct DenoiserConfig {
  Eigen::Index d_model = 64;
  int n_blocks = 4;
  int n_heads = 4;
  Eigen::Index frames = 60;
  Eigen::Index motion_dims = kMotionDims;
  int timesteps = 100;  // embedding accepts 0 <= t < timesteps

  void validate() const {
    require(n_heads >= 1 && d_model % n_heads == 0, Errc::usage,
            "d_model " + std::to_string(d_model) + " must be divisible by n_heads " + std::to_string(n_heads));
    require(n_blocks >= 1, Errc::usage, "n_blocks must be >= 1");
    require(d_model >= 2 && d_model % 2 == 0, Errc::usage, "d_model must be even");
    require(timesteps >= 1, Errc::usage, "timesteps must be >= 1");
  }
};

/// Sinusoidal timestep features [1 x d]: first half sin(t w_i), second half
/// cos(t w_i) with w_i = 10000^(-i / (d/2)).
template <typename T>
Mat<T> timestep_sinusoid(int t, Eigen::Index d, int timesteps) {
  require(t >= 0 && t < timesteps, Errc::usage,
          "timestep " + std::to_string(t) + " outside [0, " + std::to_string(timesteps) + ")");
  require(d % 2 == 0, Errc::shape, "timestep embedding width must be even");
  const Eigen::Index half = d / 2;
  Mat<T> out(1, d);
  for (Eigen::Index i = 0; i < half; ++i) {
    const double w = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    out(0, i) = static_cast<T>(std::sin(t * w));
    out(0, half + i) = static_cast<T>(std::cos(t * w));
  }
  return out;
}

/// Sinusoid followed by Linear -> SiLU -> Linear.
template <typename T>
struct TimestepEmbedder {
  Linear<T> fc1, fc2;
  int timesteps = 1;

  TimestepEmbedder() = default;
  TimestepEmbedder(ParamStore<T>& store, const std::string& name, Eigen::Index d, int n_timesteps, Rng& rng)
      : fc1(store, name + ".fc1", d, d, rng), fc2(store, name + ".fc2", d, d, rng), timesteps(n_timesteps) {}

  ag::Var<T> operator()(ag::Tape<T>& tape, int t) const {
    auto s = tape.constant(timestep_sinusoid<T>(t, fc1.in_features(), timesteps));
    return fc2(tape, ag::silu(fc1(tape, s)));
  }
};

template <typename T>
struct BlockTrace {
  std::vector<Mat<T>> self_attention;
  std::vector<Mat<T>> cross_attention;
  eit::ControlTrace<T> control;
};

/// t_emb added to every token, then residual pre-norm self-attention,
/// pre-norm cross-attention to the injected conditions, the emotional
/// control layer, and a pre-norm 4x GELU MLP.
template <typename T>
struct DitBlock {
  LayerNorm<T> ln_self, ln_cross, ln_mlp;
  MultiHeadAttention<T> self_attn, cross_attn;
  eit::EmotionalControl<T> control;
  Linear<T> fc1, fc2;

  DitBlock() = default;
  DitBlock(ParamStore<T>& store, const std::string& name, Eigen::Index d, int heads, Rng& rng)
      : ln_self(store, name + ".ln_self", d),
        ln_cross(store, name + ".ln_cross", d),
        ln_mlp(store, name + ".ln_mlp", d),
        self_attn(store, name + ".self_attn", d, heads, rng),
        cross_attn(store, name + ".cross_attn", d, heads, rng),
        control(store, name + ".control", d, heads, rng),
        fc1(store, name + ".fc1", d, 4 * d, rng),
        fc2(store, name + ".fc2", 4 * d, d, rng) {}

  ag::Var<T> operator()(ag::Tape<T>& tape, const ag::Var<T>& x_in, const ag::Var<T>& cond,
                        const ag::Var<T>& tag_emb, const ag::Var<T>& t_emb, BlockTrace<T>* trace = nullptr) const {
    require_same_shape(x_in.value(), cond.value(), "dit_block");
    auto x = ag::add_row(x_in, t_emb);
    auto h = ln_self(tape, x);
    x = ag::add(x, self_attn(tape, h, h, trace ? &trace->self_attention : nullptr));
    x = ag::add(x, cross_attn(tape, ln_cross(tape, x), cond, trace ? &trace->cross_attention : nullptr));
    x = control(tape, x, cond, tag_emb, trace ? &trace->control : nullptr);
    x = ag::add(x, fc2(tape, ag::gelu(fc1(tape, ln_mlp(tape, x)))));
    return x;
  }
};

/// Conditions consumed by every block.
template <typename T>
struct ConditioningBundle {
  ag::Var<T> e_text;    // [L x d]
  ag::Var<T> e_fused;   // [L x d]
  ag::Var<T> f_fused;   // [L x d]
  ag::Var<T> tag_emb;   // [L x d]
  ag::Var<T> injected;  // f_fused * tag_emb
};

/// x0-prediction denoiser: 56 -> d_model, n_blocks DiT blocks, final norm,
/// d_model -> 56.
template <typename T>
struct Denoiser {
  DenoiserConfig config;
  Linear<T> in_proj;
  TimestepEmbedder<T> t_embed;
  std::vector<DitBlock<T>> blocks;
  LayerNorm<T> final_norm;
  Linear<T> out_proj;

  Denoiser() = default;
  Denoiser(ParamStore<T>& store, const DenoiserConfig& cfg, Rng& rng) : config(cfg) {
    cfg.validate();
    in_proj = Linear<T>(store, "denoiser.in_proj", cfg.motion_dims, cfg.d_model, rng);
    t_embed = TimestepEmbedder<T>(store, "denoiser.t_embed", cfg.d_model, cfg.timesteps, rng);
    for (int b = 0; b < cfg.n_blocks; ++b) {
      blocks.emplace_back(store, "denoiser.block" + std::to_string(b), cfg.d_model, cfg.n_heads, rng);
    }
    final_norm = LayerNorm<T>(store, "denoiser.final_norm", cfg.d_model);
    out_proj = Linear<T>(store, "denoiser.out_proj", cfg.d_model, cfg.motion_dims, rng);
  }

  /// noised [L x 56] at embedding index t_index -> predicted clean [L x 56].
  ag::Var<T> operator()(ag::Tape<T>& tape, const ag::Var<T>& noised, const ConditioningBundle<T>& bundle,
                        int t_index, std::vector<BlockTrace<T>>* traces = nullptr) const {
    require(noised.cols() == config.motion_dims, Errc::shape, "denoiser: expected 56 motion channels");
    require(noised.rows() == bundle.injected.rows(), Errc::shape,
            "denoiser: noised motion has " + std::to_string(noised.rows()) + " frames but conditions have " +
                std::to_string(bundle.injected.rows()));
    auto t_emb = t_embed(tape, t_index);
    auto x = ag::add(in_proj(tape, noised), tape.constant(position_encoding<T>(noised.rows(), config.d_model)));
    if (traces != nullptr) traces->assign(blocks.size(), BlockTrace<T>{});
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      x = blocks[b](tape, x, bundle.injected, bundle.tag_emb, t_emb, traces ? &(*traces)[b] : nullptr);
    }
    return out_proj(tape, final_norm(tape, x));
  }
};

}  // namespace vivid
