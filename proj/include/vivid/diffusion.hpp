// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <vector>

#include "vivid/intensity_predictor.hpp"
#include "vivid/model.hpp"

namespace vivid {

/// Cumulative signal coefficients alpha_bar[0..T]; alpha_bar[0] = 1.
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> alpha_bar;

  double signal(int t) const { return std::sqrt(alpha_bar[static_cast<std::size_t>(t)]); }
  /// gamma(t) = sqrt(1 - alpha_bar[t]).
  double noise(int t) const { return std::sqrt(1.0 - alpha_bar[static_cast<std::size_t>(t)]); }
};

inline constexpr double kCosineOffset = 0.008;
inline constexpr double kMinStepRatio = 0.001;

/// alpha_bar[t] = f(t) / f(0), f(t) = cos^2(((t/T + s) / (1 + s)) pi/2), with
/// each step ratio alpha_bar[t] / alpha_bar[t-1] clipped to [0.001, 1].
inline NoiseSchedule cosine_schedule(int steps, double s = kCosineOffset) {
  require(steps >= 1, Errc::usage, "noise schedule needs T >= 1");
  auto f = [&](int t) {
    const double c = std::cos(((static_cast<double>(t) / steps + s) / (1.0 + s)) * std::numbers::pi / 2.0);
    return c * c;
  };
  NoiseSchedule out;
  out.steps = steps;
  out.alpha_bar.resize(static_cast<std::size_t>(steps) + 1);
  out.alpha_bar[0] = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double ratio = std::clamp(f(t) / f(t - 1), kMinStepRatio, 1.0);
    out.alpha_bar[static_cast<std::size_t>(t)] = out.alpha_bar[static_cast<std::size_t>(t) - 1] * ratio;
  }
  return out;
}

/// H_t = sqrt(alpha_bar[t]) H + sqrt(1 - alpha_bar[t]) eps.
template <typename T>
Mat<T> q_sample(const Mat<T>& clean, int t, const Mat<T>& eps, const NoiseSchedule& schedule) {
  require(t >= 1 && t <= schedule.steps, Errc::usage,
          "q_sample: t=" + std::to_string(t) + " outside [1, " + std::to_string(schedule.steps) + "]");
  require_same_shape(clean, eps, "q_sample");
  return (clean * static_cast<T>(schedule.signal(t)) + eps * static_cast<T>(schedule.noise(t))).eval();
}

template <typename T>
Mat<T> gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.normal());
  return m;
}

/// Kept steps of an n-step DDIM pass over T, descending: floor(k T / n)
/// for k = n..1.
inline std::vector<int> ddim_timesteps(int steps, int n_steps) {
  require(n_steps >= 1 && n_steps <= steps, Errc::usage,
          "ddim steps must be in [1, T=" + std::to_string(steps) + "], got " + std::to_string(n_steps));
  std::vector<int> out;
  for (int k = n_steps; k >= 1; --k) out.push_back(static_cast<int>((static_cast<long long>(k) * steps) / n_steps));
  return out;
}

/// Clean-sample predictor used by the sampler: (noised, t) -> clean.
template <typename T>
using CleanPredictor = std::function<Mat<T>(const Mat<T>&, int)>;

/// Deterministic DDIM (eta = 0) in x0 parameterization, starting from unit
/// Gaussian noise drawn from `seed`. Returns the final clean prediction
/// (still in model space).
template <typename T>
Mat<T> ddim_sample(const CleanPredictor<T>& predict, const NoiseSchedule& schedule, int n_steps, Eigen::Index rows,
                   Eigen::Index cols, std::uint64_t seed) {
  const auto steps = ddim_timesteps(schedule.steps, n_steps);
  Rng rng(seed);
  Mat<T> x = gaussian<T>(rows, cols, rng);
  Mat<T> x0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const int t = steps[i];
    x0 = predict(x, t);
    if (!x0.allFinite()) fail(Errc::numeric, "ddim_sample: non-finite prediction at t=" + std::to_string(t));
    const int next = i + 1 < steps.size() ? steps[i + 1] : 0;
    if (next == 0) break;
    const Mat<T> eps_hat = (x - x0 * static_cast<T>(schedule.signal(t))) / static_cast<T>(schedule.noise(t));
    x = x0 * static_cast<T>(schedule.signal(next)) + eps_hat * static_cast<T>(schedule.noise(next));
  }
  return x0;
}

/// Samples a listener sequence for one set of conditions and maps it back to
/// FLAME parameter space.
template <typename T>
MotionSequence sample_listener(const ListenerModel<T>& model, const ConditionInputs<T>& in,
                               const NoiseSchedule& schedule, int n_steps, std::uint64_t seed,
                               const MotionStats& listener_stats) {
  require(model.config().timesteps == schedule.steps, Errc::usage, "sample: model and schedule disagree on T");
  // Conditions do not depend on the noised input, so they are computed once.
  ag::Tape<T> cond_tape(false);
  const auto bundle = model.prepare(cond_tape, in);
  CleanPredictor<T> predict = [&](const Mat<T>& x, int t) {
    ag::Tape<T> tape(false);
    ConditioningBundle<T> b{tape.constant(bundle.e_text.value()), tape.constant(bundle.e_fused.value()),
                            tape.constant(bundle.f_fused.value()), tape.constant(bundle.tag_emb.value()),
                            tape.constant(bundle.injected.value())};
    return model.predict_clean(tape, tape.constant(x), b, t).value();
  };
  Mat<T> clean = ddim_sample<T>(predict, schedule, n_steps, in.frames(), kMotionDims, seed);
  MotionSequence out;
  out.frames = clean.template cast<double>();
  return denormalize(out, listener_stats);
}

// ---------------------------------------------------------------------------
// Objectives

struct LossWeights {
  double simple = 2.0;
  double emotional = 0.2;
  double vel = 0.8;
};

struct LossBreakdown {
  double simple = 0.0;
  double emotional = 0.0;
  double vel = 0.0;
  double total = 0.0;

  static LossBreakdown combine(double simple, double emotional, double vel, const LossWeights& w) {
    return {simple, emotional, vel, w.simple * simple + w.emotional * emotional + w.vel * vel};
  }
};

template <typename T>
struct ItemLoss {
  ag::Var<T> simple;
  ag::Var<T> emotional;
  ag::Var<T> vel;
  ag::Var<T> total;
  ag::Var<T> prediction;
};

/// Loss terms for one clean-motion prediction against its target.
template <typename T>
ItemLoss<T> objective(ag::Tape<T>& tape, const ag::Var<T>& prediction, const Mat<T>& clean, const Mat<T>& tags,
                      const IntensityPredictor<T>& predictor, const LossWeights& w) {
  auto target = tape.constant(clean);
  ItemLoss<T> out;
  out.prediction = prediction;
  out.simple = ag::mse(prediction, target);
  out.emotional = ag::mse(predictor(tape, prediction), tape.constant(tags));
  out.vel = ag::mse(ag::diff_rows(prediction), ag::diff_rows(target));
  out.total = ag::add(ag::add(ag::scale(out.simple, static_cast<T>(w.simple)),
                              ag::scale(out.emotional, static_cast<T>(w.emotional))),
                      ag::scale(out.vel, static_cast<T>(w.vel)));
  return out;
}

/// Builds the per-item objective on `tape`: simple = MSE(H, H_hat),
/// emotional = MSE(tags, P(H_hat)), vel = MSE(diff(H_hat), diff(H)).
template <typename T>
ItemLoss<T> item_losses(ag::Tape<T>& tape, const ListenerModel<T>& model, const IntensityPredictor<T>& predictor,
                        const ConditionInputs<T>& in, const Mat<T>& clean, int t, const Mat<T>& eps,
                        const NoiseSchedule& schedule, const LossWeights& w) {
  const auto bundle = model.prepare(tape, in);
  auto noised = tape.constant(q_sample(clean, t, eps, schedule));
  return objective(tape, model.predict_clean(tape, noised, bundle, t), clean, in.tags, predictor, w);
}

}  // namespace vivid
