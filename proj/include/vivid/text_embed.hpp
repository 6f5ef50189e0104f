// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "vivid/rng.hpp"
#include "vivid/tensor.hpp"

namespace vivid {

/// One row per token.
struct TokenEmbeddingSeq {
  MatD vectors;

  Eigen::Index tokens() const { return vectors.rows(); }
  Eigen::Index width() const { return vectors.cols(); }
};

enum class TextPooling { full_sequence, mean };

/// Boundary for text encoders. Implementations must be deterministic and
/// safe to call concurrently once constructed.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual TokenEmbeddingSeq encode(const std::string& description) const = 0;
  virtual Eigen::Index width() const = 0;
  virtual std::string name() const = 0;
};

inline std::vector<std::string> whitespace_tokens(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

/// Hash encoder: every token maps to a unit vector drawn from a generator
/// seeded by its FNV-1a hash, then a sinusoidal position encoding is added.
class ToyTextEncoder final : public TextEncoder {
 public:
  explicit ToyTextEncoder(Eigen::Index width) : width_(width) {
    require(width >= 2, Errc::usage, "text encoder width must be >= 2");
  }

  /// Unit-norm vector for one token, before position encoding.
  Eigen::RowVectorXd token_vector(const std::string& token) const {
    Rng rng(fnv1a64(token));
    Eigen::RowVectorXd v(width_);
    for (Eigen::Index i = 0; i < width_; ++i) v(i) = rng.normal();
    return v / v.norm();
  }

  TokenEmbeddingSeq encode(const std::string& description) const override {
    const auto tokens = whitespace_tokens(description);
    require(!tokens.empty(), Errc::usage, "text encoder: empty description");
    const auto n = static_cast<Eigen::Index>(tokens.size());
    TokenEmbeddingSeq out;
    out.vectors = position_encoding<double>(n, width_);
    for (Eigen::Index i = 0; i < n; ++i) out.vectors.row(i) += token_vector(tokens[static_cast<std::size_t>(i)]);
    return out;
  }

  Eigen::Index width() const override { return width_; }
  std::string name() const override { return "toy"; }

 private:
  Eigen::Index width_;
};

inline std::unique_ptr<TextEncoder> make_text_encoder(const std::string& kind, Eigen::Index width) {
  if (kind == "toy") return std::make_unique<ToyTextEncoder>(width);
  fail(Errc::usage, "unknown text_encoder '" + kind + "' (available: toy)");
}

/// Collapses the token axis to a single averaged row when pooling is
/// requested; the full sequence is returned unchanged otherwise.
inline TokenEmbeddingSeq pool_tokens(const TokenEmbeddingSeq& seq, TextPooling pooling) {
  if (pooling == TextPooling::full_sequence) return seq;
  TokenEmbeddingSeq out;
  out.vectors = seq.vectors.colwise().mean();
  return out;
}

/// [L x n_tokens] linear interpolation weights placing token i at frame
/// position i * (L - 1) / (n - 1).
inline MatD interpolation_weights(Eigen::Index n_tokens, Eigen::Index frames) {
  require(frames >= 1 && n_tokens >= 1, Errc::shape, "interpolation needs L >= 1 and at least one token");
  MatD w = MatD::Zero(frames, n_tokens);
  for (Eigen::Index f = 0; f < frames; ++f) {
    if (n_tokens == 1 || frames == 1) {
      w(f, 0) = 1.0;
      continue;
    }
    const double u = static_cast<double>(f) * static_cast<double>(n_tokens - 1) / static_cast<double>(frames - 1);
    const auto lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(u)), n_tokens - 2);
    const double frac = u - static_cast<double>(lo);
    w(f, lo) = 1.0 - frac;
    w(f, lo + 1) = frac;
  }
  return w;
}

/// Token rows linearly interpolated along the token axis to L frames. This is
/// the part of resample_to_length before the learned d_text -> d_model
/// projection, which lives with the model parameters.
inline MatD resample_tokens(const TokenEmbeddingSeq& tokens, Eigen::Index frames) {
  return interpolation_weights(tokens.tokens(), frames) * tokens.vectors;
}

}  // namespace vivid
