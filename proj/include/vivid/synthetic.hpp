// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic dyadic samples with the dataset field layout.
//
// The couplings are explicit so downstream control checks have ground truth:
//   listener(t) = baseline(V_t) + gain(A_t) * smooth(speaker)(t - delay) + noise
// with gain strictly increasing in arousal and the baseline expression offset
// carrying the sign of valence. Text is picked from a fixed template grammar
// indexed by the quantized (V, A) trajectory.

#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>

#include "vivid/motion_data.hpp"
#include "vivid/rng.hpp"

namespace vivid::synthetic {

inline constexpr int kDelayFrames = 6;
inline constexpr int kSmoothRadius = 2;
inline constexpr Eigen::Index kValenceChannels = 10;
inline constexpr int kTagsPerKnot = 5;
inline constexpr double kListenerNoise = 0.03;

/// Listener amplitude gain; strictly increasing on [-1, 1].
inline double arousal_gain(double a) { return 0.25 + 0.5 * (a + 1.0); }

/// Baseline offset for expression channel c; sign follows valence.
inline double valence_offset(double v, Eigen::Index c) {
  if (c >= kValenceChannels) return 0.0;
  return 0.8 * v * (1.0 - static_cast<double>(c) / 20.0);
}

/// Fixed monotone map from pose speed to mel energy.
inline double energy_envelope(double pose_speed) { return std::log1p(pose_speed); }

struct Options {
  Eigen::Index frames = 60;
  std::uint64_t seed = 0;
  std::optional<double> constant_valence;
  std::optional<double> constant_arousal;
};

inline const std::array<const char*, 3> kArousalWords = {"calm", "attentive", "excited"};
inline const std::array<const char*, 3> kValenceWords = {"displeased", "neutral", "pleased"};

inline int quantize(double x) { return x < -1.0 / 3.0 ? 0 : (x > 1.0 / 3.0 ? 2 : 1); }

/// Template id and description for a VA track (first half vs second half).
inline TextAnnotation describe(const IntensityTrack& tags) {
  const Eigen::Index m = tags.length();
  const Eigen::Index half = std::max<Eigen::Index>(1, m / 2);
  const double v1 = tags.va.col(0).head(half).mean();
  const double a1 = tags.va.col(1).head(half).mean();
  const double v2 = tags.va.col(0).tail(m - half > 0 ? m - half : 1).mean();
  const double a2 = tags.va.col(1).tail(m - half > 0 ? m - half : 1).mean();
  const int qv1 = quantize(v1), qa1 = quantize(a1), qv2 = quantize(v2), qa2 = quantize(a2);
  TextAnnotation t;
  t.template_id = ((qv1 * 3 + qa1) * 3 + qv2) * 3 + qa2;
  if (qv1 == qv2 && qa1 == qa2) {
    t.description = std::string("the listener stays ") + kArousalWords[qa1] + " and " + kValenceWords[qv1] +
                    " while following the speaker";
  } else {
    t.description = std::string("the listener looks ") + kArousalWords[qa1] + " and " + kValenceWords[qv1] +
                    " then shifts to " + kArousalWords[qa2] + " and " + kValenceWords[qv2];
  }
  return t;
}

namespace detail {

// Clamped random walk with knots every kTagsPerKnot tags, linearly
// interpolated at every tag instant.
inline Eigen::VectorXd va_walk(Eigen::Index m, Rng& rng) {
  const Eigen::Index knots = (m - 1) / kTagsPerKnot + 2;
  Eigen::VectorXd k(knots);
  k(0) = rng.uniform(-1.0, 1.0);
  for (Eigen::Index i = 1; i < knots; ++i) k(i) = std::clamp(k(i - 1) + rng.normal(0.0, 0.6), -1.0, 1.0);
  Eigen::VectorXd out(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index i = j / kTagsPerKnot;
    const double u = static_cast<double>(j % kTagsPerKnot) / kTagsPerKnot;
    out(j) = std::clamp((1.0 - u) * k(i) + u * k(i + 1), -1.0, 1.0);
  }
  return out;
}

inline MatD round_to_f32(const MatD& m) { return m.cast<float>().cast<double>(); }

}  // namespace detail

/// Generates one sample. Deterministic in (options, sample_id); the constant
/// V/A overrides replace the walks after they are drawn so every other field
/// is unchanged.
inline DyadSample generate_sample(const Options& opt, const std::string& sample_id) {
  require(opt.frames >= kFramesPerTag && opt.frames % kFramesPerTag == 0, Errc::usage,
          "frames must be a positive multiple of 6, got " + std::to_string(opt.frames));
  const Eigen::Index L = opt.frames;
  const Eigen::Index M = L / kFramesPerTag;
  Rng rng(mix_seed(opt.seed, fnv1a64(sample_id)));

  // Speaker motion: 2-4 sinusoids per channel plus AR(1) low-pass noise.
  MatD speaker(L, kMotionDims);
  for (Eigen::Index c = 0; c < kMotionDims; ++c) {
    const int comps = 2 + static_cast<int>(rng.below(3));
    std::array<double, 4> freq{}, amp{}, phase{};
    for (int k = 0; k < comps; ++k) {
      freq[k] = rng.uniform(0.15, 1.2);
      amp[k] = rng.uniform(0.5, 1.0) / std::sqrt(static_cast<double>(comps));
      phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    double ar = 0.0;
    for (Eigen::Index t = 0; t < L; ++t) {
      ar = 0.9 * ar + 0.05 * rng.normal();
      double x = ar;
      for (int k = 0; k < comps; ++k) {
        x += amp[k] * std::sin(2.0 * std::numbers::pi * freq[k] * static_cast<double>(t) / kFps + phase[k]);
      }
      speaker(t, c) = x;
    }
  }

  // Mel: pose-speed envelope plus a per-sample Gaussian band pattern.
  const double center = rng.uniform(0.0, static_cast<double>(kMelBins));
  const double width = rng.uniform(8.0, 32.0);
  const double level = rng.uniform(0.5, 1.5);
  MatD mel(kMelBins, kAudioFramesPerMotionFrame * L);
  for (Eigen::Index tau = 0; tau < mel.cols(); ++tau) {
    const Eigen::Index t = tau / kAudioFramesPerMotionFrame;
    const Eigen::Index prev = t == 0 ? 1 : t - 1;
    const Eigen::Index cur = t == 0 ? 0 : t;
    const double speed = (speaker.row(cur).tail(kPoseDims) - speaker.row(prev).tail(kPoseDims)).norm() * kFps;
    const double env = energy_envelope(speed);
    for (Eigen::Index k = 0; k < kMelBins; ++k) {
      const double z = (static_cast<double>(k) - center) / width;
      mel(k, tau) = env + level * std::exp(-z * z);
    }
  }

  IntensityTrack tags;
  tags.va.resize(M, 2);
  tags.va.col(0) = detail::va_walk(M, rng);
  tags.va.col(1) = detail::va_walk(M, rng);
  if (opt.constant_valence) tags.va.col(0).setConstant(std::clamp(*opt.constant_valence, -1.0, 1.0));
  if (opt.constant_arousal) tags.va.col(1).setConstant(std::clamp(*opt.constant_arousal, -1.0, 1.0));
  tags.va = detail::round_to_f32(tags.va);

  // Listener: delayed, smoothed speaker scaled by arousal gain on top of a
  // valence baseline.
  MatD smooth(L, kMotionDims);
  for (Eigen::Index t = 0; t < L; ++t) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, t - kSmoothRadius);
    const Eigen::Index hi = std::min<Eigen::Index>(L - 1, t + kSmoothRadius);
    smooth.row(t) = speaker.middleRows(lo, hi - lo + 1).colwise().mean();
  }
  const MatD held = hold_upsample_tags(tags, L);
  MatD listener(L, kMotionDims);
  for (Eigen::Index t = 0; t < L; ++t) {
    const Eigen::Index src = std::max<Eigen::Index>(0, t - kDelayFrames);
    const double v = held(t, 0);
    const double g = arousal_gain(held(t, 1));
    for (Eigen::Index c = 0; c < kMotionDims; ++c) {
      listener(t, c) = valence_offset(v, c) + g * smooth(src, c) + kListenerNoise * rng.normal();
    }
  }

  DyadSample s;
  s.sample_id = sample_id;
  s.speaker_motion.frames = detail::round_to_f32(speaker);
  s.speaker_audio.grid = detail::round_to_f32(mel);
  s.listener_motion.frames = detail::round_to_f32(listener);
  s.tags = tags;
  s.text = describe(tags);
  return s;
}

inline std::string sample_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%05zu", index);
  return buf;
}

}  // namespace vivid::synthetic
