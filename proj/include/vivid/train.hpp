// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "vivid/checkpoint.hpp"
#include "vivid/dataset.hpp"
#include "vivid/diffusion.hpp"
#include "vivid/optim.hpp"

namespace vivid {

/// One training example in model precision: conditions plus the normalized
/// listener motion.
template <typename T>
struct TrainItem {
  std::string id;
  ConditionInputs<T> cond;
  Mat<T> target;
};

template <typename T = float>
std::vector<TrainItem<T>> load_items(const DatasetManifest& m, const std::vector<std::string>& ids,
                                     const TextEncoder& encoder) {
  std::vector<TrainItem<T>> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const DyadSample s = m.load(id);
    s.validate();
    out.push_back({id, ConditionInputs<T>::build(s, m.stats, encoder),
                   normalize(s.listener_motion, m.stats.listener).frames.template cast<T>()});
  }
  return out;
}

namespace detail {

template <typename T>
std::vector<Mat<T>> collect_grads(const ag::Tape<T>& tape, const ParamStore<T>& store) {
  std::vector<Mat<T>> g(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (const Mat<T>* pg = tape.param_grad(store[i])) g[i] = *pg;
  }
  return g;
}

template <typename T>
void add_into(std::vector<Mat<T>>& acc, const std::vector<Mat<T>>& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (g[i].size() == 0) continue;
    if (acc[i].size() == 0) {
      acc[i] = g[i];
    } else {
      acc[i] += g[i];
    }
  }
}

/// Runs fn(k) for k in [0, n) on up to `workers` threads in contiguous
/// chunks. Results must be written to per-k slots by fn.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n);
  if (w <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  const std::size_t chunk = (n + w - 1) / w;
  for (std::size_t j = 0; j < w; ++j) {
    pool.emplace_back([&, j] {
      try {
        for (std::size_t k = j * chunk; k < std::min(n, (j + 1) * chunk); ++k) fn(k);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

template <typename T>
struct BatchOutcome {
  LossBreakdown loss;
  std::vector<Mat<T>> grads;  // batch-mean gradients, parallel to the model's ParamStore
};

/// Mean losses (and optionally gradients) over a batch. Each item draws its
/// own t ~ U{1..T} and noise from mix_seed(batch_seed, position), and
/// per-item gradients are summed in batch order, so the result does not
/// depend on the worker count.
template <typename T>
BatchOutcome<T> compute_losses(const ListenerModel<T>& model, const IntensityPredictor<T>& predictor,
                               const NoiseSchedule& schedule, const std::vector<const TrainItem<T>*>& batch,
                               std::uint64_t batch_seed, const LossWeights& weights, bool with_grads,
                               int workers = 1) {
  require(!batch.empty(), Errc::usage, "compute_losses: empty batch");
  require(predictor.frozen(), Errc::frozen, "compute_losses: the intensity predictor must be frozen");
  const std::size_t n = batch.size();
  std::vector<LossBreakdown> losses(n);
  std::vector<std::vector<Mat<T>>> grads(with_grads ? n : 0);
  detail::parallel_for(n, workers, [&](std::size_t k) {
    const TrainItem<T>& item = *batch[k];
    Rng rng(mix_seed(batch_seed, k));
    const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.steps)));
    const Mat<T> eps = gaussian<T>(item.target.rows(), item.target.cols(), rng);
    ag::Tape<T> tape(with_grads);
    const ItemLoss<T> l = item_losses(tape, model, predictor, item.cond, item.target, t, eps, schedule, weights);
    const double total = static_cast<double>(l.total.value()(0, 0));
    if (!std::isfinite(total)) {
      std::ostringstream msg;
      msg << "non-finite loss for item " << item.id << " at t=" << t << " (|H|=" << item.target.norm()
          << ", |eps|=" << eps.norm() << ", |H_hat|=" << l.prediction.value().norm()
          << ", simple=" << l.simple.value()(0, 0) << ", emotional=" << l.emotional.value()(0, 0)
          << ", vel=" << l.vel.value()(0, 0) << ")";
      fail(Errc::numeric, msg.str());
    }
    losses[k] = {static_cast<double>(l.simple.value()(0, 0)), static_cast<double>(l.emotional.value()(0, 0)),
                 static_cast<double>(l.vel.value()(0, 0)), total};
    if (with_grads) {
      tape.backward(l.total);
      grads[k] = detail::collect_grads(tape, model.params());
    }
  });
  BatchOutcome<T> out;
  double s = 0, e = 0, v = 0;
  for (const auto& l : losses) {
    s += l.simple;
    e += l.emotional;
    v += l.vel;
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.loss = LossBreakdown::combine(s * inv, e * inv, v * inv, weights);
  if (with_grads) {
    out.grads.assign(model.params().size(), Mat<T>());
    for (const auto& g : grads) detail::add_into(out.grads, g);
    for (auto& g : out.grads) {
      if (g.size() != 0) g *= static_cast<T>(inv);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diffusion model training

struct TrainConfig {
  int epochs = 50;
  int batch_size = 16;
  AdamWConfig adam;
  double grad_clip = 1.0;
  int checkpoint_every = 10;
  std::uint64_t seed = 0;
  LossWeights weights;
  int workers = 1;
};

inline json to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.adam.lr},
              {"weight_decay", c.adam.weight_decay},
              {"grad_clip", c.grad_clip},
              {"checkpoint_every", c.checkpoint_every},
              {"seed", c.seed},
              {"lambda_simple", c.weights.simple},
              {"lambda_emotional", c.weights.emotional},
              {"lambda_vel", c.weights.vel}};
}

inline Checkpoint model_checkpoint(const ListenerModel<float>& model, const NormalizationStats& stats, int epoch,
                                   const AdamW<float>* opt, const TrainConfig* train = nullptr) {
  Checkpoint ck;
  ck.header["kind"] = "denoiser";
  ck.header["frozen"] = false;
  ck.header["config"] = to_json(model.config());
  ck.header["normalization_stats"] = stats_to_json(stats);
  ck.header["epoch"] = epoch;
  if (train != nullptr) ck.header["train"] = to_json(*train);
  export_params(model.params(), ck);
  if (opt != nullptr) opt->export_state(ck);
  return ck;
}

struct LoadedModel {
  std::unique_ptr<ListenerModel<float>> model;
  NormalizationStats stats;
  Checkpoint checkpoint;
  int epoch = 0;
};

inline LoadedModel load_model(const std::filesystem::path& path) {
  LoadedModel out;
  out.checkpoint = load_checkpoint(path);
  const json& h = out.checkpoint.header;
  if (h.value("kind", "") != "denoiser") fail(Errc::bad_magic, path.string() + ": checkpoint kind is not 'denoiser'");
  out.model = std::make_unique<ListenerModel<float>>(model_config_from_json(h.at("config")));
  import_params(out.model->params(), out.checkpoint);
  out.stats = stats_from_json(h.at("normalization_stats"));
  out.epoch = h.value("epoch", 0);
  return out;
}

struct EpochLog {
  int epoch = 0;
  LossBreakdown loss;
};

inline std::string loss_csv_header() { return "epoch,simple,emotional,vel,total"; }

inline std::string loss_csv_row(const EpochLog& e) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g", e.epoch, e.loss.simple, e.loss.emotional, e.loss.vel,
                e.loss.total);
  return buf;
}

/// Keeps the header and rows for epochs < next_epoch.
inline std::string trim_loss_csv(const std::filesystem::path& path, int next_epoch) {
  std::string out = loss_csv_header() + "\n";
  if (!std::filesystem::exists(path)) return out;
  std::istringstream in(binio::read_file(path));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoi(line.substr(0, line.find(','))) < next_epoch) out += line + "\n";
  }
  return out;
}

struct TrainResult {
  std::vector<EpochLog> epochs;  // epochs run by this call
  std::filesystem::path checkpoint;
};

/// Trains the denoiser (and its condition encoders) end to end.
///
/// Writes <run_dir>/loss.csv (one row per epoch) and <run_dir>/checkpoint.vlck
/// every `checkpoint_every` epochs and after the last one. With `resume` the
/// model and optimizer state come from that checkpoint and training continues
/// at the next epoch; later rows in loss.csv are discarded. A non-finite loss
/// aborts with Errc::numeric and leaves the last checkpoint untouched.
inline TrainResult train_diffusion(ListenerModel<float>& model, const IntensityPredictor<float>& predictor,
                                   const std::vector<TrainItem<float>>& items, const NoiseSchedule& schedule,
                                   const NormalizationStats& stats, const TrainConfig& cfg,
                                   const std::filesystem::path& run_dir,
                                   const std::filesystem::path& resume = {},
                                   const std::function<void(const EpochLog&)>& on_epoch = {}) {
  require(!items.empty(), Errc::usage, "train: no training items");
  require(cfg.batch_size >= 1 && cfg.epochs >= 1, Errc::usage, "train: batch_size and epochs must be >= 1");
  require(model.config().timesteps == schedule.steps, Errc::usage, "train: model and schedule disagree on T");
  AdamW<float> opt(model.params(), cfg.adam);
  int start = 1;
  if (!resume.empty()) {
    const Checkpoint ck = load_checkpoint(resume);
    import_params(model.params(), ck);
    opt.import_state(ck);
    opt.set_lr(cfg.adam.lr);
    start = ck.header.at("epoch").get<int>() + 1;
  }
  std::filesystem::create_directories(run_dir);
  const auto csv_path = run_dir / "loss.csv";
  std::string csv = start == 1 ? loss_csv_header() + "\n" : trim_loss_csv(csv_path, start);
  binio::write_file(csv_path, csv);

  TrainResult result;
  result.checkpoint = run_dir / "checkpoint.vlck";
  std::vector<std::size_t> order(items.size());
  for (int epoch = start; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double s = 0, e = 0, v = 0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const TrainItem<float>*> batch;
      for (std::size_t k = b0; k < std::min(order.size(), b0 + cfg.batch_size); ++k) batch.push_back(&items[order[k]]);
      const std::uint64_t batch_seed =
          mix_seed(cfg.seed, (static_cast<std::uint64_t>(epoch) << 32) | static_cast<std::uint64_t>(batches));
      auto out = compute_losses(model, predictor, schedule, batch, batch_seed, cfg.weights, true, cfg.workers);
      clip_global_norm(out.grads, cfg.grad_clip);
      opt.step(out.grads);
      s += out.loss.simple;
      e += out.loss.emotional;
      v += out.loss.vel;
      ++batches;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    EpochLog log{epoch, LossBreakdown::combine(s * inv, e * inv, v * inv, cfg.weights)};
    if (!std::isfinite(log.loss.total)) fail(Errc::numeric, "train: epoch " + std::to_string(epoch) + " diverged");
    csv += loss_csv_row(log) + "\n";
    binio::write_file(csv_path, csv);
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (epoch % std::max(1, cfg.checkpoint_every) == 0 || epoch == cfg.epochs) {
      save_checkpoint(model_checkpoint(model, stats, epoch, &opt, &cfg), result.checkpoint);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Intensity predictor training

struct PredictorTrainConfig {
  int epochs = 40;
  int batch_size = 32;
  AdamWConfig adam{1e-3, 0.9, 0.999, 1e-8, 0.0};
  std::uint64_t seed = 0;
};

struct PredictorReport {
  double train_mse = 0.0;
  double heldout_mse = 0.0;
  double baseline_mse = 0.0;  // constant-zero predictor on the held-out tags
  double arousal_pearson = 0.0;
  double valence_pearson = 0.0;
};

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return (saa > 0 && sbb > 0) ? sab / std::sqrt(saa * sbb) : 0.0;
}

/// Held-out VA MSE, zero-predictor baseline and per-coordinate correlation.
inline PredictorReport evaluate_predictor(const IntensityPredictor<float>& p,
                                          const std::vector<TrainItem<float>>& items) {
  PredictorReport r;
  double se = 0, base = 0, count = 0;
  std::vector<double> pa, ga, pv, gv;
  for (const auto& it : items) {
    const MatF pred = p.predict(it.target);
    se += static_cast<double>((pred - it.cond.tags).squaredNorm());
    base += static_cast<double>(it.cond.tags.squaredNorm());
    count += static_cast<double>(pred.size());
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      pv.push_back(pred(i, 0));
      gv.push_back(it.cond.tags(i, 0));
      pa.push_back(pred(i, 1));
      ga.push_back(it.cond.tags(i, 1));
    }
  }
  r.heldout_mse = se / count;
  r.baseline_mse = base / count;
  r.arousal_pearson = pearson(pa, ga);
  r.valence_pearson = pearson(pv, gv);
  return r;
}

/// Minimizes VA MSE on the training items; the predictor must not be frozen.
inline PredictorReport train_predictor(IntensityPredictor<float>& p, const std::vector<TrainItem<float>>& train,
                                       const std::vector<TrainItem<float>>& heldout, const PredictorTrainConfig& cfg,
                                       const std::function<void(int, double)>& on_epoch = {}) {
  require(!p.frozen(), Errc::frozen, "train_predictor: predictor is frozen");
  require(!train.empty(), Errc::usage, "train_predictor: no training items");
  AdamW<float> opt(p.params(), cfg.adam);
  std::vector<std::size_t> order(train.size());
  double last = 0.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double sum = 0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      std::vector<MatF> acc(p.params().size());
      double loss = 0;
      for (std::size_t k = b0; k < b1; ++k) {
        const auto& it = train[order[k]];
        ag::Tape<float> tape;
        auto l = ag::mse(p(tape, tape.constant(it.target)), tape.constant(it.cond.tags));
        if (!std::isfinite(l.value()(0, 0))) {
          fail(Errc::numeric, "train_predictor: non-finite loss at epoch " + std::to_string(epoch) + ", item " + it.id);
        }
        loss += l.value()(0, 0);
        tape.backward(l);
        detail::add_into(acc, detail::collect_grads(tape, p.params()));
      }
      const float inv = 1.0f / static_cast<float>(b1 - b0);
      for (auto& g : acc) {
        if (g.size() != 0) g *= inv;
      }
      opt.step(acc);
      sum += loss * inv;
      ++batches;
    }
    last = sum / static_cast<double>(batches);
    if (on_epoch) on_epoch(epoch, last);
  }
  PredictorReport r = evaluate_predictor(p, heldout.empty() ? train : heldout);
  r.train_mse = last;
  return r;
}

}  // namespace vivid
