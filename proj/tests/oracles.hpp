// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

// Plain-matrix reference implementations of the network layers, written
// independently of the tape so tests can compare forward passes.

#pragma once

#include <cmath>

#include "vivid/denoiser.hpp"

namespace vivid::oracle {

inline MatD linear(const Linear<double>& l, const MatD& x) { return (x * l.weight->value).rowwise() + l.bias->value.row(0); }

inline MatD softmax_rows(MatD s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    double z = 0;
    for (Eigen::Index c = 0; c < s.cols(); ++c) z += std::exp(s(r, c) - m);
    for (Eigen::Index c = 0; c < s.cols(); ++c) s(r, c) = std::exp(s(r, c) - m) / z;
  }
  return s;
}

inline MatD mha(const MultiHeadAttention<double>& a, const MatD& q_src, const MatD& kv_src) {
  const MatD q = linear(a.query, q_src), k = linear(a.key, kv_src), v = linear(a.value, kv_src);
  const Eigen::Index dh = q.cols() / a.heads;
  MatD out(q.rows(), q.cols());
  for (int h = 0; h < a.heads; ++h) {
    const MatD p = softmax_rows(q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() / std::sqrt(double(dh)));
    out.middleCols(h * dh, dh) = p * v.middleCols(h * dh, dh);
  }
  return linear(a.output, out);
}

inline MatD layer_norm(const LayerNorm<double>& ln, const MatD& x) {
  MatD y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    y.row(r) = (x.row(r).array() - mu) / std::sqrt(var + LayerNorm<double>::kEps);
  }
  return (y.array().rowwise() * ln.gain->value.row(0).array()).matrix().rowwise() + ln.shift->value.row(0);
}

inline MatD conv3(const TemporalConv3<double>& c, const MatD& x) {
  const Eigen::Index n = x.rows(), d = x.cols();
  MatD stacked = MatD::Zero(n, 3 * d);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (r > 0) stacked.block(r, 0, 1, d) = x.row(r - 1);
    stacked.block(r, d, 1, d) = x.row(r);
    if (r + 1 < n) stacked.block(r, 2 * d, 1, d) = x.row(r + 1);
  }
  return linear(c.taps, stacked);
}

inline MatD adain(const MatD& x, const MatD& s) {
  MatD out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mx = x.col(c).mean(), sx = std::sqrt((x.col(c).array() - mx).square().mean());
    const double ms = s.col(c).mean(), ss = std::sqrt((s.col(c).array() - ms).square().mean());
    for (Eigen::Index r = 0; r < x.rows(); ++r) out(r, c) = (sx < 1e-8 ? 0.0 : (x(r, c) - mx) / sx) * ss + ms;
  }
  return out;
}

inline MatD control(const eit::EmotionalControl<double>& e, const MatD& x, const MatD& cond, const MatD& tags) {
  MatD memory(2 * x.rows(), x.cols());
  memory << x, cond;
  return adain(x, conv3(e.conv, mha(e.attn, tags, memory))) + x;
}

inline MatD gelu(const MatD& x) {
  const double k = std::sqrt(2.0 / 3.14159265358979323846);
  return x.unaryExpr([k](double v) { return 0.5 * v * (1.0 + std::tanh(k * (v + 0.044715 * v * v * v))); });
}

inline MatD silu(const MatD& x) {
  return x.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

inline MatD block(const DitBlock<double>& b, const MatD& x_in, const MatD& cond, const MatD& tags, const MatD& t_emb) {
  MatD x = x_in.rowwise() + t_emb.row(0);
  const MatD h = layer_norm(b.ln_self, x);
  x += mha(b.self_attn, h, h);
  x += mha(b.cross_attn, layer_norm(b.ln_cross, x), cond);
  x = control(b.control, x, cond, tags);
  x += linear(b.fc2, gelu(linear(b.fc1, layer_norm(b.ln_mlp, x))));
  return x;
}

inline MatD sinusoid(int t, Eigen::Index d) {
  MatD s(1, d);
  const Eigen::Index half = d / 2;
  for (Eigen::Index i = 0; i < half; ++i) {
    const double w = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
    s(0, i) = std::sin(t * w);
    s(0, half + i) = std::cos(t * w);
  }
  return s;
}

inline MatD denoiser(const Denoiser<double>& net, const MatD& noised, const MatD& cond, const MatD& tags, int t) {
  const Eigen::Index d = net.config.d_model;
  const MatD t_emb = linear(net.t_embed.fc2, silu(linear(net.t_embed.fc1, sinusoid(t, d))));
  MatD x = linear(net.in_proj, noised) + position_encoding<double>(noised.rows(), d);
  for (const auto& b : net.blocks) x = block(b, x, cond, tags, t_emb);
  return linear(net.out_proj, layer_norm(net.final_norm, x));
}

}  // namespace vivid::oracle
