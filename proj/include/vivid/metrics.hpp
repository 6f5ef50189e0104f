// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vivid/binio.hpp"
#include "vivid/motion_data.hpp"
#include "vivid/rng.hpp"

namespace vivid::metrics {

using json = nlohmann::json;

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  /// Mean and unbiased covariance of the rows of `samples`.
  static GaussianStats fit(const MatD& samples) {
    require(samples.rows() >= 2, Errc::shape, "GaussianStats: need at least 2 samples");
    GaussianStats g;
    g.mean = samples.colwise().mean().transpose();
    const Eigen::MatrixXd centered = samples.rowwise() - g.mean.transpose();
    g.cov = (centered.transpose() * centered) / static_cast<double>(samples.rows() - 1);
    return g;
  }
};

/// Symmetric PSD square root via eigendecomposition, negative eigenvalues
/// clipped to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

inline void require_symmetric(const Eigen::MatrixXd& c, const char* what) {
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    fail(Errc::usage, std::string(what) + ": covariance is not symmetric");
  }
}

/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_b^1/2 S_a S_b^1/2)^1/2).
inline double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  require(a.mean.size() == b.mean.size() && a.cov.rows() == a.mean.size() && b.cov.rows() == b.mean.size() &&
              a.cov.cols() == a.cov.rows() && b.cov.cols() == b.cov.rows(),
          Errc::shape, "frechet_distance: dimension mismatch");
  require_symmetric(a.cov, "frechet_distance");
  require_symmetric(b.cov, "frechet_distance");
  const Eigen::MatrixXd sb = psd_sqrt(b.cov);
  const Eigen::MatrixXd cross = psd_sqrt(sb * a.cov * sb);
  const double fd = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
  return std::max(0.0, fd);
}

inline MatD stack_frames(const std::vector<MatD>& seqs) {
  Eigen::Index rows = 0;
  for (const auto& s : seqs) rows += s.rows();
  require(!seqs.empty() && rows > 0, Errc::shape, "no frames to stack");
  MatD out(rows, seqs.front().cols());
  Eigen::Index at = 0;
  for (const auto& s : seqs) {
    require(s.cols() == out.cols(), Errc::shape, "stack_frames: channel counts differ");
    out.middleRows(at, s.rows()) = s;
    at += s.rows();
  }
  return out;
}

/// FD between per-frame distributions of two sequence sets.
inline double frame_fd(const std::vector<MatD>& gen, const std::vector<MatD>& gt) {
  return frechet_distance(GaussianStats::fit(stack_frames(gen)), GaussianStats::fit(stack_frames(gt)));
}

/// FD over per-frame [listener | speaker] vectors, generated pairs vs
/// ground-truth pairs sharing the same speakers.
inline double paired_fd(const std::vector<MatD>& gen, const std::vector<MatD>& speakers, const std::vector<MatD>& gt) {
  require(gen.size() == speakers.size() && gt.size() == speakers.size(), Errc::shape,
          "paired_fd: set sizes differ");
  std::vector<MatD> gen_pairs, gt_pairs;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    require(gen[i].rows() == speakers[i].rows() && gt[i].rows() == speakers[i].rows(), Errc::shape,
            "paired_fd: listener and speaker lengths differ");
    MatD a(gen[i].rows(), gen[i].cols() + speakers[i].cols());
    a << gen[i], speakers[i];
    MatD b(gt[i].rows(), gt[i].cols() + speakers[i].cols());
    b << gt[i], speakers[i];
    gen_pairs.push_back(std::move(a));
    gt_pairs.push_back(std::move(b));
  }
  return frame_fd(gen_pairs, gt_pairs);
}

inline double mean_squared_error(const std::vector<MatD>& gen, const std::vector<MatD>& gt) {
  require(gen.size() == gt.size() && !gen.empty(), Errc::shape, "mse: set sizes differ");
  double se = 0, n = 0;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    require_same_shape(gen[i], gt[i], "mse");
    se += (gen[i] - gt[i]).squaredNorm();
    n += static_cast<double>(gen[i].size());
  }
  return se / n;
}

// ---------------------------------------------------------------------------
// Diversity

/// Lloyd's k-means with k-means++ seeding.
class KMeans {
 public:
  static constexpr int kMaxIterations = 100;

  KMeans(const MatD& points, int k, std::uint64_t seed) {
    require(k > 1, Errc::usage, "k-means: k must be > 1");
    std::set<std::vector<double>> distinct;
    for (Eigen::Index r = 0; r < points.rows() && distinct.size() < static_cast<std::size_t>(k); ++r) {
      distinct.insert(std::vector<double>(points.row(r).data(), points.row(r).data() + points.cols()));
    }
    require(distinct.size() >= static_cast<std::size_t>(k), Errc::usage,
            "k-means: need at least k=" + std::to_string(k) + " distinct frames");
    Rng rng(seed);
    const Eigen::Index n = points.rows();
    centroids_.resize(k, points.cols());
    centroids_.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    Eigen::VectorXd d2 = (points.rowwise() - centroids_.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
      double target = rng.uniform() * d2.sum();
      Eigen::Index pick = 0;
      for (; pick < n - 1; ++pick) {
        target -= d2(pick);
        if (target < 0 && d2(pick) > 0) break;
      }
      while (d2(pick) == 0.0) pick = (pick + 1) % n;
      centroids_.row(c) = points.row(pick);
      d2 = d2.cwiseMin((points.rowwise() - centroids_.row(c)).rowwise().squaredNorm());
    }
    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    for (iterations_ = 0; iterations_ < kMaxIterations; ++iterations_) {
      bool changed = false;
      for (Eigen::Index r = 0; r < n; ++r) {
        const int l = assign(points.row(r));
        if (l != labels[static_cast<std::size_t>(r)]) {
          labels[static_cast<std::size_t>(r)] = l;
          changed = true;
        }
      }
      if (!changed) break;
      MatD sums = MatD::Zero(k, points.cols());
      std::vector<int> counts(static_cast<std::size_t>(k), 0);
      for (Eigen::Index r = 0; r < n; ++r) {
        sums.row(labels[static_cast<std::size_t>(r)]) += points.row(r);
        counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])]++;
      }
      for (int c = 0; c < k; ++c) {
        // Empty clusters keep their previous centroid.
        if (counts[static_cast<std::size_t>(c)] > 0) centroids_.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      }
    }
  }

  template <typename Row>
  int assign(const Row& x) const {
    Eigen::Index best;
    (centroids_.rowwise() - x).rowwise().squaredNorm().minCoeff(&best);
    return static_cast<int>(best);
  }

  const MatD& centroids() const { return centroids_; }
  int iterations() const { return iterations_; }

 private:
  MatD centroids_;
  int iterations_ = 0;
};

/// -sum p ln p of the label histogram.
inline double histogram_entropy(const std::vector<int>& labels, int k) {
  if (labels.empty()) return 0.0;
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (int l : labels) counts[static_cast<std::size_t>(l)] += 1.0;
  double h = 0.0;
  for (double c : counts) {
    if (c > 0) {
      const double p = c / static_cast<double>(labels.size());
      h -= p * std::log(p);
    }
  }
  return h;
}

/// Mean per-sequence entropy of cluster ids, clusters fit on GT frames.
inline double shannon_diversity(const std::vector<MatD>& sequences, const MatD& gt_frames, int k, std::uint64_t seed) {
  require(k > 1, Errc::usage, "shannon_diversity: k must be > 1");
  require(!sequences.empty(), Errc::shape, "shannon_diversity: no sequences");
  const KMeans km(gt_frames, k, seed);
  double sum = 0.0;
  for (const auto& s : sequences) {
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(s.rows()));
    for (Eigen::Index r = 0; r < s.rows(); ++r) labels.push_back(km.assign(s.row(r)));
    sum += histogram_entropy(labels, k);
  }
  return sum / static_cast<double>(sequences.size());
}

/// Population variance over time per channel, averaged over channels and
/// sequences.
inline double temporal_variance(const std::vector<MatD>& sequences) {
  require(!sequences.empty(), Errc::shape, "temporal_variance: no sequences");
  double sum = 0.0;
  for (const auto& s : sequences) {
    require(s.rows() >= 2, Errc::shape, "temporal_variance: need L >= 2");
    sum += (s.rowwise() - s.colwise().mean()).array().square().colwise().mean().mean();
  }
  return sum / static_cast<double>(sequences.size());
}

// ---------------------------------------------------------------------------
// Synchrony

enum class RpccMode { differenced, raw };

inline double pearson_columns(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  const double saa = ca.squaredNorm(), sbb = cb.squaredNorm();
  if (saa <= 1e-24 || sbb <= 1e-24) return 0.0;
  return ca.dot(cb) / std::sqrt(saa * sbb);
}

/// Mean over channels of |Pearson| between listener and speaker first
/// differences (or raw values). Zero-variance channels contribute 0.
inline double rpcc(const MatD& listener, const MatD& speaker, RpccMode mode = RpccMode::differenced) {
  require_same_shape(listener, speaker, "rpcc");
  require(listener.rows() >= 3, Errc::shape, "rpcc: need L >= 3");
  const Eigen::Index n = listener.rows();
  MatD a = listener, b = speaker;
  if (mode == RpccMode::differenced) {
    a = listener.bottomRows(n - 1) - listener.topRows(n - 1);
    b = speaker.bottomRows(n - 1) - speaker.topRows(n - 1);
  }
  double sum = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) sum += std::abs(pearson_columns(a.col(c), b.col(c)));
  return sum / static_cast<double>(a.cols());
}

inline double mean_rpcc(const std::vector<MatD>& listeners, const std::vector<MatD>& speakers, RpccMode mode) {
  require(listeners.size() == speakers.size() && !listeners.empty(), Errc::shape, "rpcc: set sizes differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < listeners.size(); ++i) sum += rpcc(listeners[i], speakers[i], mode);
  return sum / static_cast<double>(listeners.size());
}

// ---------------------------------------------------------------------------
// Suite

struct SuiteConfig {
  int sid_k = 16;
  std::uint64_t seed = 0;
  RpccMode rpcc_mode = RpccMode::differenced;
};

inline json to_json(const SuiteConfig& c) {
  return json{{"sid_k", c.sid_k},
              {"seed", c.seed},
              {"rpcc_mode", c.rpcc_mode == RpccMode::differenced ? "differenced" : "raw"}};
}

struct MetricCell {
  std::string metric;
  std::string group;
  double value = 0.0;
  std::size_t n = 0;
};

struct MetricReport {
  std::vector<MetricCell> cells;
  json config = json::object();

  double get(const std::string& metric, const std::string& group) const {
    for (const auto& c : cells) {
      if (c.metric == metric && c.group == group) return c.value;
    }
    fail(Errc::usage, "report has no cell " + metric + "/" + group);
  }
};

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"FD", "P-FD", "MSE", "SID", "Var", "rPCC"};
  return names;
}

struct ChannelGroup {
  std::string name;
  Eigen::Index first;
  Eigen::Index count;
};

inline const std::vector<ChannelGroup>& channel_groups() {
  static const std::vector<ChannelGroup> groups = {{"exp", 0, kExprDims}, {"pose", kExprDims, kPoseDims}};
  return groups;
}

/// One paired evaluation input.
struct EvalPair {
  std::string id;
  MatD generated;
  MatD reference;
  MatD speaker;
};

/// Pairs generated motion with reference samples by id; any reference
/// without a generated counterpart (or vice versa) is an error listing them.
inline std::vector<EvalPair> pair_by_id(const std::map<std::string, MotionSequence>& generated,
                                        const std::vector<DyadSample>& reference) {
  std::vector<std::string> missing;
  std::vector<EvalPair> out;
  std::set<std::string> ref_ids;
  for (const auto& r : reference) {
    ref_ids.insert(r.sample_id);
    auto it = generated.find(r.sample_id);
    if (it == generated.end()) {
      missing.push_back(r.sample_id);
      continue;
    }
    require(it->second.frames.rows() == r.listener_motion.length() && it->second.frames.cols() == kMotionDims,
            Errc::shape_inconsistent, "generated motion for " + r.sample_id + " has the wrong shape");
    out.push_back({r.sample_id, it->second.frames, r.listener_motion.frames, r.speaker_motion.frames});
  }
  for (const auto& [id, _] : generated) {
    if (!ref_ids.count(id)) missing.push_back(id + " (no reference)");
  }
  if (!missing.empty()) {
    std::string msg = "unpaired samples:";
    for (const auto& m : missing) msg += " " + m;
    fail(Errc::missing_pair, msg);
  }
  require(!out.empty(), Errc::missing_pair, "no samples to evaluate");
  return out;
}

/// All six metrics for expression and pose channels (12 cells).
inline MetricReport evaluate_suite(const std::vector<EvalPair>& pairs, const SuiteConfig& cfg) {
  MetricReport report;
  report.config = to_json(cfg);
  for (const auto& g : channel_groups()) {
    std::vector<MatD> gen, ref, spk;
    for (const auto& p : pairs) {
      gen.push_back(p.generated.middleCols(g.first, g.count));
      ref.push_back(p.reference.middleCols(g.first, g.count));
      spk.push_back(p.speaker.middleCols(g.first, g.count));
    }
    const MatD ref_frames = stack_frames(ref);
    const std::size_t frames = static_cast<std::size_t>(ref_frames.rows());
    const std::size_t seqs = pairs.size();
    report.cells.push_back({"FD", g.name, frame_fd(gen, ref), frames});
    report.cells.push_back({"P-FD", g.name, paired_fd(gen, spk, ref), frames});
    report.cells.push_back({"MSE", g.name, mean_squared_error(gen, ref), frames});
    report.cells.push_back({"SID", g.name, shannon_diversity(gen, ref_frames, cfg.sid_k, cfg.seed), seqs});
    report.cells.push_back({"Var", g.name, temporal_variance(gen), seqs});
    report.cells.push_back({"rPCC", g.name, mean_rpcc(gen, spk, cfg.rpcc_mode), seqs});
  }
  return report;
}

inline json report_to_json(const MetricReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"metric", c.metric}, {"channel_group", c.group}, {"value", c.value}, {"n", c.n}, {"config", r.config}});
  }
  return json{{"format", "vivid-metrics"}, {"version", 1}, {"config", r.config}, {"cells", cells}};
}

inline MetricReport report_from_json(const json& j) {
  MetricReport r;
  try {
    if (j.at("format").get<std::string>() != "vivid-metrics") fail(Errc::bad_magic, "not a metrics report");
    if (j.at("version").get<int>() != 1) fail(Errc::version_mismatch, "unsupported metrics report version");
    r.config = j.at("config");
    for (const auto& c : j.at("cells")) {
      r.cells.push_back({c.at("metric").get<std::string>(), c.at("channel_group").get<std::string>(),
                         c.at("value").get<double>(), c.at("n").get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    fail(Errc::shape_inconsistent, std::string("malformed metrics report: ") + e.what());
  }
  return r;
}

inline std::string report_to_csv(const MetricReport& r) {
  std::string out = "metric,channel_group,value,n\n";
  char buf[128];
  for (const auto& c : r.cells) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%zu\n", c.metric.c_str(), c.group.c_str(), c.value, c.n);
    out += buf;
  }
  return out;
}

/// Fixed-width table with metrics as columns and channel groups as rows.
inline std::string report_table(const MetricReport& r) {
  std::string out = "group ";
  char buf[64];
  for (const auto& m : metric_names()) {
    std::snprintf(buf, sizeof(buf), "%12s", m.c_str());
    out += buf;
  }
  out += "\n";
  for (const auto& g : channel_groups()) {
    std::snprintf(buf, sizeof(buf), "%-6s", g.name.c_str());
    out += buf;
    for (const auto& m : metric_names()) {
      std::snprintf(buf, sizeof(buf), "%12.5g", r.get(m, g.name));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

inline void write_report(const MetricReport& r, const std::filesystem::path& json_path,
                         const std::filesystem::path& csv_path) {
  binio::write_file(json_path, report_to_json(r).dump(2) + "\n");
  binio::write_file(csv_path, report_to_csv(r));
}

inline MetricReport read_report(const std::filesystem::path& json_path) {
  json j;
  try {
    j = json::parse(binio::read_file(json_path));
  } catch (const json::parse_error& e) {
    fail(Errc::shape_inconsistent, json_path.string() + ": invalid JSON: " + e.what());
  }
  return report_from_json(j);
}

}  // namespace vivid::metrics
