// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

// Top-level listener generator: conditions (speaker motion, speaker audio,
// text, VA tags) -> conditioning bundle -> x0-predicting denoiser.

#pragma once

#include <memory>
#include <string>

#include "vivid/dataset.hpp"
#include "vivid/denoiser.hpp"
#include "vivid/eit.hpp"
#include "vivid/rim.hpp"
#include "vivid/text_embed.hpp"

namespace vivid {

struct ModelConfig {
  Eigen::Index d_model = 64;
  int n_blocks = 4;
  int n_heads = 4;
  Eigen::Index d_text = 32;
  Eigen::Index frames = 60;
  int timesteps = 100;
  std::string text_encoder = "toy";
  std::uint64_t init_seed = 0;

  DenoiserConfig denoiser() const {
    DenoiserConfig d;
    d.d_model = d_model;
    d.n_blocks = n_blocks;
    d.n_heads = n_heads;
    d.frames = frames;
    d.timesteps = timesteps;
    return d;
  }

  void validate() const {
    denoiser().validate();
    require(frames >= kFramesPerTag && frames % kFramesPerTag == 0, Errc::usage, "frames must be a multiple of 6");
    require(d_text >= 2, Errc::usage, "d_text must be >= 2");
  }
};

/// Per-sample constant inputs in model precision. Speaker motion is
/// normalized; text rows are interpolated to L frames but not yet projected.
template <typename T>
struct ConditionInputs {
  Mat<T> speaker;       // [L x 56]
  Mat<T> pooled_audio;  // [L x n_mels]
  Mat<T> text_frames;   // [L x d_text]
  Mat<T> held_tags;     // [L x 2]
  Mat<T> tags;          // [M x 2]

  Eigen::Index frames() const { return speaker.rows(); }

  static ConditionInputs build(const MotionSequence& speaker_motion, const MelFeatures& audio,
                               const std::string& description, const IntensityTrack& tags,
                               const NormalizationStats& stats, const TextEncoder& encoder,
                               TextPooling pooling = TextPooling::full_sequence) {
    const Eigen::Index L = speaker_motion.length();
    require(audio.frames() == kAudioFramesPerMotionFrame * L, Errc::shape_inconsistent,
            "conditions: audio frames must equal 2 x motion frames");
    tags.validate("conditions");
    ConditionInputs in;
    in.speaker = normalize(speaker_motion, stats.speaker).frames.template cast<T>();
    in.pooled_audio = rim::pool_audio_pairs<T>(audio.grid);
    in.text_frames = resample_tokens(pool_tokens(encoder.encode(description), pooling), L).template cast<T>();
    in.held_tags = hold_upsample_tags(tags, L).template cast<T>();
    in.tags = tags.va.template cast<T>();
    return in;
  }

  static ConditionInputs build(const DyadSample& s, const NormalizationStats& stats, const TextEncoder& encoder) {
    return build(s.speaker_motion, s.speaker_audio, s.text.description, s.tags, stats, encoder);
  }
};

template <typename T>
class ListenerModel {
 public:
  explicit ListenerModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    Rng rng(mix_seed(cfg.init_seed, 0x11));
    rim_ = rim::Params<T>(store_, cfg.d_text, cfg.d_model, cfg.n_heads, rng);
    tag_in_ = Linear<T>(store_, "eit.tag_in", 2, cfg.d_model, rng);
    // Unit bias so the multiplicative tag injection starts near identity.
    tag_in_.bias->value.setOnes();
    denoiser_ = Denoiser<T>(store_, cfg.denoiser(), rng);
  }

  ListenerModel(const ListenerModel&) = delete;
  ListenerModel& operator=(const ListenerModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }
  const rim::Params<T>& rim_params() const { return rim_; }
  const Linear<T>& tag_projection() const { return tag_in_; }
  const Denoiser<T>& denoiser() const { return denoiser_; }

  ConditioningBundle<T> prepare(ag::Tape<T>& tape, const ConditionInputs<T>& in,
                                rim::FuseTrace<T>* trace = nullptr) const {
    const Eigen::Index L = in.frames();
    require(in.pooled_audio.rows() == L && in.text_frames.rows() == L && in.held_tags.rows() == L, Errc::shape,
            "prepare: condition lengths disagree");
    ConditioningBundle<T> b;
    auto speaker = rim::embed_speaker(tape, rim_, in.speaker, in.pooled_audio);
    b.e_fused = rim::fuse_speaker(tape, rim_, speaker.motion, speaker.audio, trace);
    b.e_text = rim::project_text(tape, rim_, in.text_frames);
    b.f_fused = rim::temporal_semantic_interaction(b.e_fused, b.e_text).fused;
    b.tag_emb = eit::embed_tags(tape, tag_in_, in.held_tags);
    b.injected = eit::inject_tags(b.f_fused, b.tag_emb);
    return b;
  }

  /// Clean-motion prediction from motion noised to diffusion step t (1..T).
  ag::Var<T> predict_clean(ag::Tape<T>& tape, const ag::Var<T>& noised, const ConditioningBundle<T>& bundle, int t,
                           std::vector<BlockTrace<T>>* traces = nullptr) const {
    require(t >= 1 && t <= cfg_.timesteps, Errc::usage,
            "diffusion step " + std::to_string(t) + " outside [1, " + std::to_string(cfg_.timesteps) + "]");
    return denoiser_(tape, noised, bundle, t - 1, traces);
  }

 private:
  ModelConfig cfg_;
  ParamStore<T> store_;
  rim::Params<T> rim_;
  Linear<T> tag_in_;
  Denoiser<T> denoiser_;
};

}  // namespace vivid
