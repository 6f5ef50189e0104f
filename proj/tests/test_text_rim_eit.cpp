// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "vivid/eit.hpp"
#include "vivid/rim.hpp"
#include "vivid/text_embed.hpp"

using namespace vivid;
using vivid::testing::all_params;
using vivid::testing::check_gradients;
using vivid::testing::probe;
using vivid::testing::random_mat;
using TapeD = ag::Tape<double>;

namespace {

// Single-head attention written out step by step.
MatD attention_oracle(const MatD& q, const MatD& k, const MatD& v) {
  MatD s = q * k.transpose() / std::sqrt(static_cast<double>(q.cols()));
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    double z = 0;
    for (Eigen::Index c = 0; c < s.cols(); ++c) z += std::exp(s(r, c) - m);
    for (Eigen::Index c = 0; c < s.cols(); ++c) s(r, c) = std::exp(s(r, c) - m) / z;
  }
  return s * v;
}

MatD linear_oracle(const Linear<double>& l, const MatD& x) {
  return (x * l.weight->value).rowwise() + l.bias->value.row(0);
}

MatD mha_oracle(const MultiHeadAttention<double>& a, const MatD& q_src, const MatD& kv_src) {
  EXPECT_EQ(a.heads, 1);
  return linear_oracle(a.output, attention_oracle(linear_oracle(a.query, q_src), linear_oracle(a.key, kv_src),
                                                  linear_oracle(a.value, kv_src)));
}

MatD col_std_pop(const MatD& x) {
  return ((x.rowwise() - x.colwise().mean()).array().square().colwise().mean()).sqrt().matrix();
}

}  // namespace

// ---------------------------------------------------------------------------
// Text

TEST(ToyEncoder, RepeatedTokenDiffersOnlyByPosition) {
  ToyTextEncoder enc(16);
  const MatD e = enc.encode("happy happy").vectors;
  const MatD pe = position_encoding<double>(2, 16);
  EXPECT_LT(((e.row(0) - pe.row(0)) - (e.row(1) - pe.row(1))).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ToyEncoder, DeterministicAcrossInstances) {
  EXPECT_EQ(ToyTextEncoder(32).encode("the listener nods").vectors,
            ToyTextEncoder(32).encode("the listener nods").vectors);
}

TEST(ToyEncoder, TokenVectorsUnitNorm) {
  ToyTextEncoder enc(32);
  for (const char* tok : {"a", "calm", "excited", "shifts", "to"}) EXPECT_NEAR(enc.token_vector(tok).norm(), 1.0, 1e-6);
  const MatD e = enc.encode("calm shifts to excited").vectors;
  const MatD raw = e - position_encoding<double>(4, 32);
  for (Eigen::Index r = 0; r < 4; ++r) EXPECT_NEAR(raw.row(r).norm(), 1.0, 1e-6);
}

TEST(ToyEncoder, EmptyRejected) {
  ToyTextEncoder enc(8);
  EXPECT_THROW(enc.encode(""), Error);
  EXPECT_THROW(enc.encode("   "), Error);
  EXPECT_THROW(make_text_encoder("bert", 8), Error);
}

TEST(Resample, SingleTokenRepeats) {
  TokenEmbeddingSeq t;
  t.vectors = MatD::Constant(1, 3, 0.25);
  const MatD r = resample_tokens(t, 10);
  ASSERT_EQ(r.rows(), 10);
  for (Eigen::Index i = 0; i < 10; ++i) EXPECT_EQ(r.row(i), t.vectors.row(0));
}

TEST(Resample, SameLengthIsFixedPoint) {
  Rng rng(1);
  TokenEmbeddingSeq t;
  t.vectors = random_mat(7, 4, rng);
  EXPECT_LT((resample_tokens(t, 7) - t.vectors).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Resample, MidpointForTwoTokens) {
  TokenEmbeddingSeq t;
  t.vectors.resize(2, 2);
  t.vectors << 0, 4, 2, 8;
  const MatD r = resample_tokens(t, 3);
  EXPECT_DOUBLE_EQ(r(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(r(1, 1), 6.0);
  EXPECT_EQ(r.row(0), t.vectors.row(0));
  EXPECT_EQ(r.row(2), t.vectors.row(1));
}

TEST(Resample, MeanPoolingCollapsesTokens) {
  ToyTextEncoder enc(8);
  const auto pooled = pool_tokens(enc.encode("a b c"), TextPooling::mean);
  EXPECT_EQ(pooled.tokens(), 1);
}

TEST(Resample, ProjectionGradient) {
  ParamStore<double> store;
  Rng rng(3);
  Linear<double> proj(store, "p", 8, 4, rng);
  const MatD frames = resample_tokens(ToyTextEncoder(8).encode("calm then excited"), 6);
  const auto r = check_gradients(all_params(store), [&](TapeD& t) { return probe(proj(t, t.constant(frames))); });
  EXPECT_LT(r.worst, 1e-4) << r.where;
}

// ---------------------------------------------------------------------------
// Responsive interaction

TEST(Rim, ZeroMotionZeroBiasGivesPositionOnly) {
  ParamStore<double> store;
  Rng rng(1);
  rim::Params<double> p(store, 8, 8, 2, rng);
  TapeD t(false);
  const auto emb = rim::embed_speaker(t, p, MatD(MatD::Zero(4, kMotionDims)), MatD(MatD::Zero(4, kMelBins)));
  EXPECT_LT((emb.motion.value() - position_encoding<double>(4, 8)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Rim, PairPoolingOfEqualColumns) {
  MatD mel(kMelBins, 6);
  for (int pair = 0; pair < 3; ++pair) {
    mel.col(2 * pair).setConstant(pair + 0.5);
    mel.col(2 * pair + 1).setConstant(pair + 0.5);
  }
  const MatD pooled = rim::pool_audio_pairs<double>(mel);
  ASSERT_EQ(pooled.rows(), 3);
  ASSERT_EQ(pooled.cols(), kMelBins);
  for (int pair = 0; pair < 3; ++pair) EXPECT_TRUE((pooled.row(pair).array() == pair + 0.5).all());
}

TEST(Rim, EmbedMatchesProjectionOracle) {
  ParamStore<double> store;
  Rng rng(2);
  rim::Params<double> p(store, 8, 8, 2, rng);
  p.motion_in.bias->value = random_mat(1, 8, rng);
  const MatD motion = random_mat(4, kMotionDims, rng);
  const MatD audio = random_mat(4, kMelBins, rng);
  TapeD t(false);
  const auto emb = rim::embed_speaker(t, p, motion, audio);
  const MatD pe = position_encoding<double>(4, 8);
  EXPECT_LT((emb.motion.value() - (linear_oracle(p.motion_in, motion) + pe)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((emb.audio.value() - (linear_oracle(p.audio_in, audio) + pe)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Rim, AudioLengthMismatchRejected) {
  ParamStore<double> store;
  Rng rng(2);
  rim::Params<double> p(store, 8, 8, 2, rng);
  MotionSequence m;
  m.frames = MatD::Zero(4, kMotionDims);
  MelFeatures mel;
  mel.grid = MatD::Zero(kMelBins, 7);
  TapeD t(false);
  EXPECT_THROW(rim::embed_speaker(t, p, m, mel), Error);
  EXPECT_THROW(rim::Params<double>(store, 8, 6, 4, rng), Error);
}

TEST(Rim, ZeroedProjectionsGiveUniformAttention) {
  ParamStore<double> store;
  Rng rng(3);
  rim::Params<double> p(store, 8, 8, 2, rng);
  p.motion_to_audio.query.weight->value.setZero();
  p.motion_to_audio.key.weight->value.setZero();
  TapeD t(false);
  auto m = t.constant(random_mat(5, 8, rng));
  auto a = t.constant(random_mat(5, 8, rng));
  rim::FuseTrace<double> trace;
  rim::fuse_speaker(t, p, m, a, &trace);
  for (const auto& h : trace.motion_to_audio) EXPECT_LT((h.array() - 0.2).abs().maxCoeff(), 1e-15);
  for (const auto& h : trace.audio_to_motion) {
    for (Eigen::Index r = 0; r < h.rows(); ++r) EXPECT_NEAR(h.row(r).sum(), 1.0, 1e-6);
  }
}

TEST(Rim, FuseMatchesStepByStepOracle) {
  ParamStore<double> store;
  Rng rng(4);
  rim::Params<double> p(store, 4, 4, 1, rng);
  for (std::size_t i = 0; i < store.size(); ++i) store[i].value = random_mat(store[i].value.rows(), store[i].value.cols(), rng, 0.5);
  const MatD m = random_mat(3, 4, rng), a = random_mat(3, 4, rng);
  TapeD t(false);
  const MatD got = rim::fuse_speaker(t, p, t.constant(m), t.constant(a)).value();
  MatD both(3, 8);
  both << mha_oracle(p.motion_to_audio, m, a), mha_oracle(p.audio_to_motion, a, m);
  const MatD want = m + linear_oracle(p.mix, both);
  EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Rim, InteractionIdentityWhenTextIsZero) {
  Rng rng(5);
  TapeD t(false);
  const MatD e = random_mat(6, 4, rng);
  const auto r = rim::temporal_semantic_interaction(t.constant(e), t.constant(MatD::Zero(6, 4)));
  EXPECT_EQ(r.fused.value(), e);
}

TEST(Rim, CorrelationEntriesAreDotProducts) {
  Rng rng(6);
  TapeD t(false);
  const MatD e = random_mat(3, 4, rng), x = random_mat(3, 4, rng);
  const auto r = rim::temporal_semantic_interaction(t.constant(e), t.constant(x));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0;
      for (int k = 0; k < 4; ++k) dot += e(i, k) * x(j, k);
      EXPECT_NEAR(r.correlation.value()(i, j), dot, 1e-12);
    }
  }
}

TEST(Rim, GatesInOpenUnitIntervalAndOracle) {
  Rng rng(7);
  TapeD t(false);
  const MatD e = random_mat(5, 4, rng, 3), x = random_mat(5, 4, rng, 3);
  const auto r = rim::temporal_semantic_interaction(t.constant(e), t.constant(x));
  const MatD w = (e * x.transpose()).rowwise().maxCoeff();
  const double mu = w.mean();
  const double sd = std::sqrt((w.array() - mu).square().mean() + rim::kGateEps);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double g = r.gates.value()(i, 0);
    EXPECT_GT(g, 0.0);
    EXPECT_LT(g, 1.0);
    EXPECT_NEAR(g, 1.0 / (1.0 + std::exp(-(w(i, 0) - mu) / sd)), 1e-12);
    EXPECT_LT((r.fused.value().row(i) - (e.row(i) + g * x.row(i))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Rim, GradientsThroughWholeModule) {
  ParamStore<double> store;
  Rng rng(8);
  rim::Params<double> p(store, 4, 4, 2, rng);
  Param<double> motion{"motion", random_mat(4, kMotionDims, rng)};
  Param<double> audio{"audio", random_mat(4, kMelBins, rng)};
  Param<double> text{"text", random_mat(4, 4, rng)};
  auto targets = all_params(store);
  targets.insert(targets.end(), {&motion, &audio, &text});
  const auto r = check_gradients(targets, [&](TapeD& t) {
    auto m = ag::add(p.motion_in(t, t.param(motion)), t.constant(position_encoding<double>(4, 4)));
    auto a = ag::add(p.audio_in(t, t.param(audio)), t.constant(position_encoding<double>(4, 4)));
    auto fused = rim::fuse_speaker(t, p, m, a);
    auto e_text = p.text_proj(t, t.param(text));
    return probe(rim::temporal_semantic_interaction(fused, e_text).fused);
  });
  EXPECT_LT(r.worst, 1e-4) << r.where;
}

// ---------------------------------------------------------------------------
// Emotional intensity tags

TEST(Eit, ZeroTagsZeroBiasGivePositionOnly) {
  ParamStore<double> store;
  Rng rng(1);
  Linear<double> tag_in(store, "tag", 2, 8, rng);
  TapeD t(false);
  const MatD e = eit::embed_tags(t, tag_in, MatD(MatD::Zero(12, 2))).value();
  EXPECT_LT((e - position_encoding<double>(12, 8)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Eit, ConstantTagsGiveEqualRowsBeforePosition) {
  ParamStore<double> store;
  Rng rng(2);
  Linear<double> tag_in(store, "tag", 2, 8, rng);
  IntensityTrack tags;
  tags.va = MatD::Constant(2, 2, 0.3);
  TapeD t(false);
  const MatD e = eit::embed_tags(t, tag_in, tags, 12).value() - position_encoding<double>(12, 8);
  for (Eigen::Index r = 1; r < 12; ++r) EXPECT_LT((e.row(r) - e.row(0)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Eit, TwoTagOracle) {
  ParamStore<double> store;
  Rng rng(3);
  Linear<double> tag_in(store, "tag", 2, 3, rng);
  tag_in.weight->value << 1, 2, 3, -1, 0, 0.5;
  tag_in.bias->value << 0.1, 0.2, 0.3;
  IntensityTrack tags;
  tags.va.resize(2, 2);
  tags.va << 0.5, -0.5, -1, 1;
  TapeD t(false);
  // odd width is fine for the tag map but not for position encoding pairs; use
  // the raw projection via the held track instead.
  const MatD held = hold_upsample_tags(tags, 12);
  const MatD got = tag_in(t, t.constant(held)).value();
  for (Eigen::Index r = 0; r < 12; ++r) {
    const Eigen::Index m = r / 6;
    for (int c = 0; c < 3; ++c) {
      const double want = tags.va(m, 0) * tag_in.weight->value(0, c) + tags.va(m, 1) * tag_in.weight->value(1, c) +
                          tag_in.bias->value(0, c);
      EXPECT_NEAR(got(r, c), want, 1e-15);
    }
  }
  EXPECT_THROW(eit::embed_tags(t, tag_in, tags, 13), Error);
}

TEST(Eit, InjectionIdentitiesAndOracle) {
  Rng rng(4);
  TapeD t(false);
  const MatD f = random_mat(2, 3, rng), g = random_mat(2, 3, rng);
  EXPECT_EQ(eit::inject_tags(t.constant(f), t.constant(MatD::Ones(2, 3))).value(), f);
  EXPECT_TRUE(eit::inject_tags(t.constant(f), t.constant(MatD::Zero(2, 3))).value().isZero(0.0));
  const MatD h = eit::inject_tags(t.constant(f), t.constant(g)).value();
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) EXPECT_EQ(h(r, c), f(r, c) * g(r, c));
  }
}

TEST(Eit, AdainSelfStyleIsIdentity) {
  Rng rng(5);
  TapeD t(false);
  const MatD x = random_mat(8, 4, rng, 2.0);
  EXPECT_LT((eit::adain(t.constant(x), t.constant(x)).value() - x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Eit, AdainFlatStyleGivesConstantChannels) {
  Rng rng(6);
  TapeD t(false);
  MatD style = MatD::Zero(5, 3);
  style.row(0) << 1, 2, 3;
  style = style.row(0).replicate(5, 1);
  const MatD out = eit::adain(t.constant(random_mat(5, 3, rng)), t.constant(style)).value();
  for (Eigen::Index r = 0; r < 5; ++r) EXPECT_LT((out.row(r) - style.row(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Eit, AdainHandCase) {
  MatD x(4, 2), s(4, 2);
  x << 1, 0, 2, 0, 3, 4, 4, 4;
  s << 0, 10, 0, 10, 2, 10, 2, 14;
  TapeD t(false);
  const MatD out = eit::adain(t.constant(x), t.constant(s)).value();
  // channel 0: x mean 2.5 sd sqrt(1.25); style mean 1 sd 1
  // channel 1: x mean 2 sd 2;          style mean 11 sd sqrt(3)
  for (int r = 0; r < 4; ++r) {
    EXPECT_NEAR(out(r, 0), (x(r, 0) - 2.5) / std::sqrt(1.25) * 1.0 + 1.0, 1e-12);
    EXPECT_NEAR(out(r, 1), (x(r, 1) - 2.0) / 2.0 * std::sqrt(3.0) + 11.0, 1e-12);
  }
}

TEST(Eit, AdainMatchesStyleStatistics) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    TapeD t(false);
    const MatD x = random_mat(12, 6, rng, rng.uniform(0.1, 5));
    MatD s = random_mat(12, 6, rng, rng.uniform(0.1, 5));
    s.rowwise() += random_mat(1, 6, rng, 3).row(0);
    const MatD out = eit::adain(t.constant(x), t.constant(s)).value();
    const MatD mu_o = out.colwise().mean(), mu_s = s.colwise().mean();
    const MatD sd_o = col_std_pop(out), sd_s = col_std_pop(s);
    for (Eigen::Index c = 0; c < 6; ++c) {
      EXPECT_LE(std::abs(mu_o(0, c) - mu_s(0, c)), 1e-5);
      EXPECT_LE(std::abs(sd_o(0, c) / sd_s(0, c) - 1.0), 1e-5);
    }
  }
}

TEST(Eit, AdainFlatInputChannelTakesStyleMean) {
  MatD x = MatD::Ones(4, 2);
  x.col(1) << 1, 2, 3, 4;
  Rng rng(8);
  const MatD s = random_mat(4, 2, rng);
  TapeD t(false);
  int flat = 0;
  const MatD out = eit::adain(t.constant(x), t.constant(s), &flat).value();
  EXPECT_EQ(flat, 1);
  for (int r = 0; r < 4; ++r) EXPECT_NEAR(out(r, 0), s.col(0).mean(), 1e-12);
}

TEST(Eit, GradientsThroughEmbeddingInjectionAndAdain) {
  ParamStore<double> store;
  Rng rng(10);
  Linear<double> tag_in(store, "tag", 2, 4, rng);
  const MatD held = hold_upsample_tags(IntensityTrack{random_mat(2, 2, rng, 0.5)}, 12);
  Param<double> fused{"fused", random_mat(12, 4, rng)};
  Param<double> listener{"listener", random_mat(12, 4, rng)};
  auto targets = all_params(store);
  targets.insert(targets.end(), {&fused, &listener});
  const auto r = check_gradients(targets, [&](TapeD& t) {
    auto injected = eit::inject_tags(t.param(fused), eit::embed_tags(t, tag_in, held));
    return probe(eit::adain(t.param(listener), injected));
  });
  EXPECT_LT(r.worst, 1e-4) << r.where;
}

namespace {

struct ControlFixture {
  ParamStore<double> store;
  Rng rng{9};
  eit::EmotionalControl<double> layer;
  explicit ControlFixture(Eigen::Index d = 4, int heads = 2) : layer(store, "ecl", d, heads, rng) {
    for (std::size_t i = 0; i < store.size(); ++i) {
      store[i].value = random_mat(store[i].value.rows(), store[i].value.cols(), rng, 0.5);
    }
  }
};

}  // namespace

TEST(EmotionalControl, ZeroValueProjectionLeavesBiasPath) {
  ControlFixture f;
  f.layer.attn.value.weight->value.setZero();
  f.layer.attn.value.bias->value.setZero();
  f.layer.attn.output.bias->value.setZero();
  TapeD t(false);
  const MatD x = random_mat(4, 4, f.rng), c = random_mat(4, 4, f.rng), g = random_mat(4, 4, f.rng);
  eit::ControlTrace<double> tr;
  const MatD out = f.layer(t, t.constant(x), t.constant(c), t.constant(g), &tr).value();
  EXPECT_TRUE(tr.emotion.isZero(0.0));
  const MatD bias_rows = f.layer.conv.taps.bias->value.replicate(4, 1);
  EXPECT_LT((tr.modulation - bias_rows).cwiseAbs().maxCoeff(), 1e-15);
  const MatD want = eit::adain(t.constant(x), t.constant(bias_rows)).value() + x;
  EXPECT_LT((out - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EmotionalControl, AttentionOverBothSources) {
  ControlFixture f;
  TapeD t(false);
  eit::ControlTrace<double> tr;
  f.layer(t, t.constant(random_mat(5, 4, f.rng)), t.constant(random_mat(5, 4, f.rng)),
          t.constant(random_mat(5, 4, f.rng)), &tr);
  ASSERT_EQ(tr.attention.size(), 2u);
  for (const auto& h : tr.attention) {
    EXPECT_EQ(h.rows(), 5);
    EXPECT_EQ(h.cols(), 10);
    for (Eigen::Index r = 0; r < 5; ++r) EXPECT_NEAR(h.row(r).sum(), 1.0, 1e-6);
  }
}

TEST(EmotionalControl, HandOracleTwoByTwo) {
  ControlFixture f(2, 1);
  TapeD t(false);
  MatD x(2, 2), c(2, 2), g(2, 2);
  x << 0.5, -1, 1.5, 2;
  c << -0.3, 0.7, 1.1, 0.2;
  g << 0.9, 0.1, -0.4, 0.6;
  const MatD got = f.layer(t, t.constant(x), t.constant(c), t.constant(g)).value();
  MatD memory(4, 2);
  memory << x, c;
  const MatD emo = mha_oracle(f.layer.attn, g, memory);
  // same-padded kernel-3 conv: [prev | cur | next] stacked on columns
  MatD stacked = MatD::Zero(2, 6);
  stacked.block(1, 0, 1, 2) = emo.row(0);
  stacked.middleCols(2, 2) = emo;
  stacked.block(0, 4, 1, 2) = emo.row(1);
  const MatD mod = linear_oracle(f.layer.conv.taps, stacked);
  MatD want(2, 2);
  for (int ch = 0; ch < 2; ++ch) {
    const double mx = x.col(ch).mean(), sx = std::sqrt((x.col(ch).array() - mx).square().mean());
    const double ms = mod.col(ch).mean(), ss = std::sqrt((mod.col(ch).array() - ms).square().mean());
    for (int r = 0; r < 2; ++r) want(r, ch) = (x(r, ch) - mx) / sx * ss + ms + x(r, ch);
  }
  EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EmotionalControl, TagsChangeOutput) {
  ControlFixture f;
  ParamStore<double> store;
  Rng rng(10);
  Linear<double> tag_in(store, "tag", 2, 4, rng);
  const MatD x = random_mat(6, 4, rng), c = random_mat(6, 4, rng);
  TapeD t(false);
  auto hi = eit::embed_tags(t, tag_in, MatD(MatD::Constant(6, 2, 0.9)));
  auto lo = eit::embed_tags(t, tag_in, MatD(MatD::Constant(6, 2, -0.9)));
  const MatD a = f.layer(t, t.constant(x), t.constant(c), hi).value();
  const MatD b = f.layer(t, t.constant(x), t.constant(c), lo).value();
  EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 0.0);
}

TEST(EmotionalControl, ShapeMismatchRejected) {
  ControlFixture f;
  TapeD t(false);
  EXPECT_THROW(f.layer(t, t.constant(MatD::Zero(4, 4)), t.constant(MatD::Zero(5, 4)), t.constant(MatD::Zero(4, 4))),
               Error);
}

TEST(EmotionalControl, GradientCheck) {
  ControlFixture f;
  Param<double> x{"x", random_mat(4, 4, f.rng)};
  Param<double> c{"c", random_mat(4, 4, f.rng)};
  Param<double> va{"va", random_mat(4, 2, f.rng, 0.5)};
  Linear<double> tag_in(f.store, "tag", 2, 4, f.rng);
  auto targets = all_params(f.store);
  targets.insert(targets.end(), {&x, &c, &va});
  const auto r = check_gradients(targets, [&](TapeD& t) {
    auto tags = ag::add(tag_in(t, t.param(va)), t.constant(position_encoding<double>(4, 4)));
    return probe(f.layer(t, t.param(x), t.param(c), tags));
  });
  EXPECT_LT(r.worst, 1e-4) << r.where;
}
