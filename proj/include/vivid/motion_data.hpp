// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vivid/binio.hpp"
#include "vivid/tensor.hpp"

namespace vivid {

inline constexpr Eigen::Index kExprDims = 50;
inline constexpr Eigen::Index kPoseDims = 6;
inline constexpr Eigen::Index kMotionDims = kExprDims + kPoseDims;
inline constexpr Eigen::Index kMelBins = 128;
inline constexpr int kFps = 30;
inline constexpr Eigen::Index kFramesPerTag = 6;  // 30 fps motion, 5 Hz tags
inline constexpr Eigen::Index kAudioFramesPerMotionFrame = 2;

/// FLAME head motion, one row per frame: 50 expression then 6 pose channels.
struct MotionSequence {
  MatD frames;

  Eigen::Index length() const { return frames.rows(); }
  auto expression() const { return frames.leftCols(kExprDims); }
  auto pose() const { return frames.rightCols(kPoseDims); }

  void validate(const std::string& what) const {
    require(frames.cols() == kMotionDims, Errc::shape,
            what + ": expected " + std::to_string(kMotionDims) + " channels, got " + std::to_string(frames.cols()));
    require(frames.rows() >= 2, Errc::shape, what + ": need at least 2 frames");
    require(frames.allFinite(), Errc::numeric, what + ": non-finite entries");
  }
};

/// Mel spectrogram grid [n_mels x T_a].
struct MelFeatures {
  MatD grid;

  Eigen::Index bins() const { return grid.rows(); }
  Eigen::Index frames() const { return grid.cols(); }
};

/// Valence (column 0) and arousal (column 1) at 5 Hz, entries in [-1, 1].
struct IntensityTrack {
  MatD va;

  Eigen::Index length() const { return va.rows(); }

  void validate(const std::string& what) const {
    require(va.cols() == 2, Errc::shape, what + ": VA track must have 2 columns");
    require(va.allFinite(), Errc::numeric, what + ": non-finite VA entries");
    require(va.size() == 0 || (va.maxCoeff() <= 1.0 && va.minCoeff() >= -1.0), Errc::usage,
            what + ": VA entries must lie in [-1, 1]");
  }
};

struct TextAnnotation {
  std::string description;
  std::optional<int> template_id;  // set only for synthetic samples
};

struct DyadSample {
  std::string sample_id;
  MotionSequence speaker_motion;
  MelFeatures speaker_audio;
  MotionSequence listener_motion;
  TextAnnotation text;
  IntensityTrack tags;

  Eigen::Index length() const { return listener_motion.length(); }

  /// Checks L = T_a / 2 = 6 M and per-field invariants.
  void validate() const {
    speaker_motion.validate(sample_id + " speaker_motion");
    listener_motion.validate(sample_id + " listener_motion");
    tags.validate(sample_id + " tags");
    const Eigen::Index L = listener_motion.length();
    require(speaker_motion.length() == L, Errc::shape_inconsistent, sample_id + ": speaker/listener length differ");
    require(speaker_audio.frames() == kAudioFramesPerMotionFrame * L, Errc::shape_inconsistent,
            sample_id + ": audio frames must equal 2 x motion frames");
    require(speaker_audio.grid.allFinite(), Errc::numeric, sample_id + ": non-finite mel entries");
    require(tags.length() * kFramesPerTag == L, Errc::shape_inconsistent,
            sample_id + ": tag count x 6 must equal motion frames");
    require(!text.description.empty(), Errc::usage, sample_id + ": empty description");
  }
};

// ---------------------------------------------------------------------------
// Normalization

/// Per-channel z-score statistics.
struct MotionStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;

  /// Population mean/std over all frames of all sequences.
  static MotionStats compute(const std::vector<const MotionSequence*>& seqs) {
    require(!seqs.empty(), Errc::usage, "normalization stats need at least one sequence");
    const Eigen::Index c = seqs.front()->frames.cols();
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(c);
    double n = 0;
    for (const auto* s : seqs) {
      sum += s->frames.colwise().sum();
      n += static_cast<double>(s->frames.rows());
    }
    MotionStats out;
    out.mean = sum / n;
    Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(c);
    for (const auto* s : seqs) sq += (s->frames.rowwise() - out.mean).array().square().colwise().sum().matrix();
    out.std = (sq / n).array().sqrt().matrix();
    return out;
  }

  void validate() const {
    require(mean.size() == kMotionDims && std.size() == kMotionDims, Errc::shape,
            "normalization stats must have 56 channels");
    require((std.array() > 0.0).all(), Errc::usage, "normalization stats: std entries must be > 0");
  }
};

struct NormalizationStats {
  MotionStats listener;
  MotionStats speaker;
};

inline MotionSequence normalize(const MotionSequence& seq, const MotionStats& stats) {
  stats.validate();
  require(seq.frames.cols() == kMotionDims, Errc::shape, "normalize: expected 56 channels");
  MotionSequence out;
  out.frames = ((seq.frames.rowwise() - stats.mean).array().rowwise() / stats.std.array()).matrix();
  return out;
}

inline MotionSequence denormalize(const MotionSequence& seq, const MotionStats& stats) {
  stats.validate();
  require(seq.frames.cols() == kMotionDims, Errc::shape, "denormalize: expected 56 channels");
  MotionSequence out;
  out.frames = ((seq.frames.array().rowwise() * stats.std.array()).rowwise() + stats.mean.array()).matrix();
  return out;
}

/// Zero-order hold from 5 Hz tags to 30 fps frames: each row repeated 6 times.
inline MatD hold_upsample_tags(const IntensityTrack& tags, Eigen::Index frames) {
  require(tags.va.cols() == 2, Errc::shape, "hold_upsample_tags: VA track must have 2 columns");
  require(frames == kFramesPerTag * tags.length(), Errc::shape,
          "hold_upsample_tags: L=" + std::to_string(frames) + " but 6*M=" + std::to_string(kFramesPerTag * tags.length()));
  MatD out(frames, 2);
  for (Eigen::Index r = 0; r < frames; ++r) out.row(r) = tags.va.row(r / kFramesPerTag);
  return out;
}

// ---------------------------------------------------------------------------
// Binary sample file
//
//   "VLDX" | u32 version=1 | u32 L | u32 n_mels | u32 T_a | u32 M
//   f32 speaker_motion [L x 56] | f32 mel [n_mels x T_a]
//   f32 listener_motion [L x 56] | f32 va [M x 2]       (row-major, LE)
//   u32 len | UTF-8 description | i32 template_id (-1 when absent)
//
// Matrices are narrowed to f32 on save.

inline constexpr char kSampleMagic[4] = {'V', 'L', 'D', 'X'};
inline constexpr std::uint32_t kSampleVersion = 1;

namespace detail {

inline void put_matrix(binio::Writer& w, const MatD& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f32(static_cast<float>(m(r, c)));
  }
}

inline MatD get_matrix(binio::Reader& r, Eigen::Index rows, Eigen::Index cols) {
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<double>(r.f32());
  }
  return m;
}

}  // namespace detail

inline std::string encode_sample(const DyadSample& s) {
  s.validate();
  binio::Writer w;
  w.bytes(std::string_view(kSampleMagic, 4));
  w.u32(kSampleVersion);
  w.u32(static_cast<std::uint32_t>(s.length()));
  w.u32(static_cast<std::uint32_t>(s.speaker_audio.bins()));
  w.u32(static_cast<std::uint32_t>(s.speaker_audio.frames()));
  w.u32(static_cast<std::uint32_t>(s.tags.length()));
  detail::put_matrix(w, s.speaker_motion.frames);
  detail::put_matrix(w, s.speaker_audio.grid);
  detail::put_matrix(w, s.listener_motion.frames);
  detail::put_matrix(w, s.tags.va);
  w.str(s.text.description);
  w.i32(s.text.template_id.value_or(-1));
  return w.data();
}

inline DyadSample decode_sample(std::string bytes, const std::string& origin, std::string sample_id) {
  binio::Reader r(std::move(bytes), origin);
  if (r.remaining() < 4 || r.bytes(4) != std::string_view(kSampleMagic, 4)) {
    fail(Errc::bad_magic, origin + ": not a VLDX sample file");
  }
  const std::uint32_t version = r.u32();
  if (version != kSampleVersion) {
    fail(Errc::version_mismatch,
         origin + ": sample format version " + std::to_string(version) + ", expected " + std::to_string(kSampleVersion));
  }
  const auto L = static_cast<Eigen::Index>(r.u32());
  const auto n_mels = static_cast<Eigen::Index>(r.u32());
  const auto t_a = static_cast<Eigen::Index>(r.u32());
  const auto m = static_cast<Eigen::Index>(r.u32());
  if (L < 2 || t_a != kAudioFramesPerMotionFrame * L || m * kFramesPerTag != L || n_mels < 1) {
    fail(Errc::shape_inconsistent, origin + ": inconsistent header (L=" + std::to_string(L) + ", T_a=" +
                                       std::to_string(t_a) + ", M=" + std::to_string(m) + ")");
  }
  // Reject impossible sizes before allocating anything.
  const auto payload = static_cast<std::size_t>(4 * (2 * L * kMotionDims + n_mels * t_a + 2 * m));
  if (r.remaining() < payload) {
    fail(Errc::truncated, origin + ": truncated (header declares " + std::to_string(payload) + " payload bytes, " +
                              std::to_string(r.remaining()) + " remain)");
  }
  DyadSample s;
  s.sample_id = std::move(sample_id);
  s.speaker_motion.frames = detail::get_matrix(r, L, kMotionDims);
  s.speaker_audio.grid = detail::get_matrix(r, n_mels, t_a);
  s.listener_motion.frames = detail::get_matrix(r, L, kMotionDims);
  s.tags.va = detail::get_matrix(r, m, 2);
  s.text.description = r.str();
  const std::int32_t tid = r.i32();
  if (tid >= 0) s.text.template_id = tid;
  if (r.remaining() != 0) fail(Errc::shape_inconsistent, origin + ": trailing bytes after sample payload");
  return s;
}

inline void save_sample(const DyadSample& s, const std::filesystem::path& path) {
  binio::write_file(path, encode_sample(s));
}

/// The sample id is taken from the file stem.
inline DyadSample load_sample(const std::filesystem::path& path) {
  return decode_sample(binio::read_file(path), path.string(), path.stem().string());
}

// ---------------------------------------------------------------------------
// Motion file (generated listener motion)
//
//   "VLDM" | u32 version=1 | u32 L | u32 C | f32 frames [L x C]

inline constexpr char kMotionMagic[4] = {'V', 'L', 'D', 'M'};
inline constexpr std::uint32_t kMotionVersion = 1;

inline void save_motion(const MotionSequence& m, const std::filesystem::path& path) {
  binio::Writer w;
  w.bytes(std::string_view(kMotionMagic, 4));
  w.u32(kMotionVersion);
  w.u32(static_cast<std::uint32_t>(m.frames.rows()));
  w.u32(static_cast<std::uint32_t>(m.frames.cols()));
  detail::put_matrix(w, m.frames);
  binio::write_file(path, w.data());
}

inline MotionSequence load_motion(const std::filesystem::path& path) {
  binio::Reader r(binio::read_file(path), path.string());
  if (r.remaining() < 4 || r.bytes(4) != std::string_view(kMotionMagic, 4)) {
    fail(Errc::bad_magic, path.string() + ": not a VLDM motion file");
  }
  const std::uint32_t version = r.u32();
  if (version != kMotionVersion) fail(Errc::version_mismatch, path.string() + ": unsupported motion file version");
  const auto L = static_cast<Eigen::Index>(r.u32());
  const auto C = static_cast<Eigen::Index>(r.u32());
  if (r.remaining() < static_cast<std::size_t>(4 * L * C)) fail(Errc::truncated, path.string() + ": truncated");
  MotionSequence m;
  m.frames = detail::get_matrix(r, L, C);
  return m;
}

}  // namespace vivid
