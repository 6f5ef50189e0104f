// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

// Emotional intensity tags: embedding, multiplicative injection into the
// fused conditions, and the emotional control layer (tag-queried attention,
// temporal convolution, AdaIN modulation of the listener stream).

#pragma once

#include <string>
#include <vector>

#include "vivid/motion_data.hpp"
#include "vivid/nn.hpp"

namespace vivid::eit {

inline constexpr double kAdainGuard = 1e-8;

/// Zero-order-held VA [L x 2] -> d_model, plus position encoding.
template <typename T>
ag::Var<T> embed_tags(ag::Tape<T>& tape, const Linear<T>& tag_in, const Mat<T>& held_va) {
  require(held_va.cols() == 2, Errc::shape, "embed_tags: expected [L x 2] VA frames");
  auto pe = tape.constant(position_encoding<T>(held_va.rows(), tag_in.out_features()));
  return ag::add(tag_in(tape, tape.constant(held_va)), pe);
}

template <typename T>
ag::Var<T> embed_tags(ag::Tape<T>& tape, const Linear<T>& tag_in, const IntensityTrack& tags, Eigen::Index frames) {
  return embed_tags(tape, tag_in, Mat<T>(hold_upsample_tags(tags, frames).template cast<T>()));
}

/// Hadamard product F_fused * tag embedding.
template <typename T>
ag::Var<T> inject_tags(const ag::Var<T>& fused, const ag::Var<T>& tag_emb) {
  return ag::hadamard(fused, tag_emb);
}

/// Re-statistics of x to the per-channel temporal mean/std of style.
/// Channels of x flatter than kAdainGuard come out as the style mean;
/// `degenerate` receives how many there were.
template <typename T>
ag::Var<T> adain(const ag::Var<T>& x, const ag::Var<T>& style, int* degenerate = nullptr) {
  require(x.cols() == style.cols(), Errc::shape, "adain: channel counts differ");
  auto normalized = ag::instance_norm_cols(x, static_cast<T>(kAdainGuard), degenerate);
  return ag::add_row(ag::mul_row(normalized, ag::col_std(style)), ag::col_mean(style));
}

template <typename T>
struct ControlTrace {
  std::vector<Mat<T>> attention;  // per head, [L x 2L]
  Mat<T> emotion;                 // F_emo
  Mat<T> modulation;              // conv(F_emo)
  int degenerate_channels = 0;
};

/// Keys and values come from [F_listener ; cond] stacked in time, queries
/// from the tag embedding. Output = AdaIN(F_listener, conv(F_emo)) + F_listener.
template <typename T>
struct EmotionalControl {
  MultiHeadAttention<T> attn;
  TemporalConv3<T> conv;

  EmotionalControl() = default;
  EmotionalControl(ParamStore<T>& store, const std::string& name, Eigen::Index d_model, int heads, Rng& rng)
      : attn(store, name + ".attn", d_model, heads, rng), conv(store, name + ".conv", d_model, d_model, rng) {}

  ag::Var<T> operator()(ag::Tape<T>& tape, const ag::Var<T>& listener, const ag::Var<T>& cond,
                        const ag::Var<T>& tag_emb, ControlTrace<T>* trace = nullptr) const {
    require_same_shape(listener.value(), cond.value(), "emotional_control_layer (listener vs cond)");
    require_same_shape(listener.value(), tag_emb.value(), "emotional_control_layer (listener vs tags)");
    auto memory = ag::concat_rows(listener, cond);
    auto emo = attn(tape, tag_emb, memory, trace ? &trace->attention : nullptr);
    auto modulation = conv(tape, emo);
    int flat = 0;
    auto out = ag::add(adain(listener, modulation, &flat), listener);
    if (trace != nullptr) {
      trace->emotion = emo.value();
      trace->modulation = modulation.value();
      trace->degenerate_channels = flat;
    }
    return out;
  }
};

}  // namespace vivid::eit
