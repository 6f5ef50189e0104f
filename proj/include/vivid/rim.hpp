// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

// Responsive interaction: speaker motion and audio are embedded, fused by
// attention in both directions, then coupled with the per-frame text
// embedding through an L x L correlation matrix whose row maxima gate a
// residual text contribution.

#pragma once

#include <string>
#include <vector>

#include "vivid/motion_data.hpp"
#include "vivid/nn.hpp"

namespace vivid::rim {

template <typename T>
struct Params {
  Linear<T> text_proj;  // d_text -> d_model
  Linear<T> motion_in;  // 56 -> d_model
  Linear<T> audio_in;   // n_mels -> d_model
  MultiHeadAttention<T> motion_to_audio;
  MultiHeadAttention<T> audio_to_motion;
  Linear<T> mix;  // 2 d_model -> d_model

  Params() = default;
  Params(ParamStore<T>& store, Eigen::Index d_text, Eigen::Index d_model, int heads, Rng& rng)
      : text_proj(store, "rim.text_proj", d_text, d_model, rng),
        motion_in(store, "rim.motion_in", kMotionDims, d_model, rng),
        audio_in(store, "rim.audio_in", kMelBins, d_model, rng),
        motion_to_audio(store, "rim.motion_to_audio", d_model, heads, rng),
        audio_to_motion(store, "rim.audio_to_motion", d_model, heads, rng),
        mix(store, "rim.mix", 2 * d_model, d_model, rng) {}
};

/// [n_mels x T_a] -> [T_a/2 x n_mels]: transpose and average consecutive
/// pairs of audio frames so audio aligns 1:1 with motion frames.
template <typename T>
Mat<T> pool_audio_pairs(const MatD& mel) {
  require(mel.cols() % kAudioFramesPerMotionFrame == 0, Errc::shape, "pool_audio_pairs: odd audio frame count");
  const Eigen::Index n = mel.cols() / kAudioFramesPerMotionFrame;
  Mat<T> out(n, mel.rows());
  for (Eigen::Index t = 0; t < n; ++t) {
    out.row(t) = (0.5 * (mel.col(2 * t) + mel.col(2 * t + 1))).transpose().template cast<T>();
  }
  return out;
}

template <typename T>
struct SpeakerEmbedding {
  ag::Var<T> motion;
  ag::Var<T> audio;
};

/// motion [L x 56], pooled_audio [L x n_mels] (see pool_audio_pairs).
template <typename T>
SpeakerEmbedding<T> embed_speaker(ag::Tape<T>& tape, const Params<T>& p, const Mat<T>& motion,
                                  const Mat<T>& pooled_audio) {
  require(motion.rows() == pooled_audio.rows(), Errc::shape,
          "embed_speaker: audio must have 2 frames per motion frame (L=" + std::to_string(motion.rows()) +
              ", pooled audio=" + std::to_string(pooled_audio.rows()) + ")");
  const Eigen::Index d = p.motion_in.out_features();
  auto pe = tape.constant(position_encoding<T>(motion.rows(), d));
  auto m = ag::add(p.motion_in(tape, tape.constant(motion)), pe);
  auto a = ag::add(p.audio_in(tape, tape.constant(pooled_audio)), pe);
  return {m, a};
}

template <typename T>
SpeakerEmbedding<T> embed_speaker(ag::Tape<T>& tape, const Params<T>& p, const MotionSequence& motion,
                                  const MelFeatures& mel) {
  require(mel.frames() == kAudioFramesPerMotionFrame * motion.length(), Errc::shape,
          "embed_speaker: T_a must equal 2 L");
  return embed_speaker(tape, p, Mat<T>(motion.frames.template cast<T>()), pool_audio_pairs<T>(mel.grid));
}

/// Attention maps captured during fuse_speaker, one matrix per head.
template <typename T>
struct FuseTrace {
  std::vector<Mat<T>> motion_to_audio;
  std::vector<Mat<T>> audio_to_motion;
};

/// E_fused = motion + mix([attn(q=motion, kv=audio) | attn(q=audio, kv=motion)]).
template <typename T>
ag::Var<T> fuse_speaker(ag::Tape<T>& tape, const Params<T>& p, const ag::Var<T>& motion_emb,
                        const ag::Var<T>& audio_emb, FuseTrace<T>* trace = nullptr) {
  require_same_shape(motion_emb.value(), audio_emb.value(), "fuse_speaker");
  auto m2a = p.motion_to_audio(tape, motion_emb, audio_emb, trace ? &trace->motion_to_audio : nullptr);
  auto a2m = p.audio_to_motion(tape, audio_emb, motion_emb, trace ? &trace->audio_to_motion : nullptr);
  return ag::add(motion_emb, p.mix(tape, ag::concat_cols<T>({m2a, a2m})));
}

/// Interpolated token rows [L x d_text] -> E_text [L x d_model].
template <typename T>
ag::Var<T> project_text(ag::Tape<T>& tape, const Params<T>& p, const Mat<T>& resampled_tokens) {
  return p.text_proj(tape, tape.constant(resampled_tokens));
}

template <typename T>
struct InteractionResult {
  ag::Var<T> fused;        // F_fused [L x d]
  ag::Var<T> correlation;  // W_fuse [L x L]
  ag::Var<T> gates;        // [L x 1], each in (0, 1)
};

inline constexpr double kGateEps = 1e-6;

/// W_fuse = E_fused E_text^T; w_t = max_j W_fuse(t, j); gates = logistic of
/// standardized w; F_fused = E_fused + E_text scaled row-wise by the gates.
template <typename T>
InteractionResult<T> temporal_semantic_interaction(const ag::Var<T>& e_fused, const ag::Var<T>& e_text) {
  require_same_shape(e_fused.value(), e_text.value(), "temporal_semantic_interaction");
  auto corr = ag::matmul_nt(e_fused, e_text);
  auto pooled = ag::row_max(corr);
  auto gates = ag::sigmoid(ag::standardize(pooled, static_cast<T>(kGateEps)));
  auto fused = ag::add(e_fused, ag::mul_col(e_text, gates));
  return {fused, corr, gates};
}

}  // namespace vivid::rim
