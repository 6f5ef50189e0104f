// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "vivid/model.hpp"

using namespace vivid;
using vivid::testing::all_params;
using vivid::testing::check_gradients;
using vivid::testing::probe;
using vivid::testing::random_mat;
using TapeD = ag::Tape<double>;

namespace {

void randomize(ParamStore<double>& store, Rng& rng, double sd = 0.5) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    store[i].value = random_mat(store[i].value.rows(), store[i].value.cols(), rng, sd);
  }
}

DenoiserConfig micro(Eigen::Index d = 4, int heads = 1, int blocks = 1) {
  DenoiserConfig c;
  c.d_model = d;
  c.n_heads = heads;
  c.n_blocks = blocks;
  c.frames = 4;
  c.timesteps = 10;
  return c;
}

ConditioningBundle<double> bundle_of(TapeD& t, const MatD& cond, const MatD& tags) {
  auto c = t.constant(cond);
  auto g = t.constant(tags);
  return {c, c, c, g, c};
}

}  // namespace

TEST(TimestepEmbedding, ZeroIsSinZeroCosOne) {
  const MatD s = timestep_sinusoid<double>(0, 8, 100);
  EXPECT_TRUE(s.leftCols(4).isZero(0.0));
  EXPECT_TRUE((s.rightCols(4).array() == 1.0).all());
}

TEST(TimestepEmbedding, ClosedFormAtWidthFour) {
  const MatD s = timestep_sinusoid<double>(1, 4, 100);
  EXPECT_NEAR(s(0, 0), std::sin(1.0), 1e-15);
  EXPECT_NEAR(s(0, 1), std::sin(0.01), 1e-15);
  EXPECT_NEAR(s(0, 2), std::cos(1.0), 1e-15);
  EXPECT_NEAR(s(0, 3), std::cos(0.01), 1e-15);
}

TEST(TimestepEmbedding, InjectiveOverRange) {
  std::vector<MatD> seen;
  for (int t = 0; t < 1000; ++t) seen.push_back(timestep_sinusoid<double>(t, 64, 1000));
  for (int a = 0; a < 1000; ++a) {
    for (int b = a + 1; b < 1000; ++b) ASSERT_GT((seen[a] - seen[b]).cwiseAbs().maxCoeff(), 0.0) << a << " " << b;
  }
  ParamStore<double> store;
  Rng rng(1);
  TimestepEmbedder<double> emb(store, "t", 8, 10, rng);
  TapeD t(false);
  const MatD at3 = emb(t, 3).value();
  const MatD at4 = emb(t, 4).value();
  EXPECT_NE(at3, at4);
}

TEST(TimestepEmbedding, OutOfRangeRejected) {
  EXPECT_THROW(timestep_sinusoid<double>(-1, 4, 10), Error);
  EXPECT_THROW(timestep_sinusoid<double>(10, 4, 10), Error);
}

TEST(DitBlock, ZeroWeightsStillFinite) {
  ParamStore<double> store;
  Rng rng(2);
  DitBlock<double> b(store, "b", 4, 2, rng);
  for (std::size_t i = 0; i < store.size(); ++i) store[i].value.setZero();
  TapeD t(false);
  const MatD x = random_mat(5, 4, rng);
  const MatD out = b(t, t.constant(x), t.constant(random_mat(5, 4, rng)), t.constant(random_mat(5, 4, rng)),
                     t.constant(MatD::Zero(1, 4)))
                       .value();
  EXPECT_TRUE(out.allFinite());
  // every sub-layer contributes zero except the residual paths
  EXPECT_LT((out - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DitBlock, ShapePreservedAcrossLengths) {
  ParamStore<double> store;
  Rng rng(3);
  DitBlock<double> b(store, "b", 8, 2, rng);
  for (Eigen::Index L : {4, 60, 240}) {
    TapeD t(false);
    const MatD out = b(t, t.constant(random_mat(L, 8, rng)), t.constant(random_mat(L, 8, rng)),
                       t.constant(random_mat(L, 8, rng)), t.constant(random_mat(1, 8, rng)))
                         .value();
    EXPECT_EQ(out.rows(), L);
    EXPECT_EQ(out.cols(), 8);
  }
}

TEST(DitBlock, HandWeightOracleTwoByTwo) {
  ParamStore<double> store;
  Rng rng(4);
  DitBlock<double> b(store, "b", 2, 1, rng);
  randomize(store, rng);
  const MatD x = random_mat(2, 2, rng), c = random_mat(2, 2, rng), g = random_mat(2, 2, rng), te = random_mat(1, 2, rng);
  TapeD t(false);
  const MatD got = b(t, t.constant(x), t.constant(c), t.constant(g), t.constant(te)).value();
  EXPECT_LT((got - oracle::block(b, x, c, g, te)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DitBlock, LayerNormOutputsStandardized) {
  ParamStore<double> store;
  LayerNorm<double> ln(store, "ln", 16);
  Rng rng(5);
  TapeD t(false);
  const MatD y = ln(t, t.constant(random_mat(9, 16, rng, 4.0))).value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    EXPECT_LE(std::abs(y.row(r).mean()), 1e-6);
    EXPECT_NEAR((y.row(r).array() - y.row(r).mean()).square().mean(), 1.0, 1e-5);
  }
}

TEST(Denoiser, MicroConfigMatchesComposedOracle) {
  ParamStore<double> store;
  Rng rng(6);
  Denoiser<double> net(store, micro(4, 1, 1), rng);
  randomize(store, rng);
  const MatD noised = random_mat(4, kMotionDims, rng), cond = random_mat(4, 4, rng), tags = random_mat(4, 4, rng);
  TapeD t(false);
  const MatD got = net(t, t.constant(noised), bundle_of(t, cond, tags), 3).value();
  EXPECT_LT((got - oracle::denoiser(net, noised, cond, tags, 3)).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Denoiser, PureFunctionAndShape) {
  ParamStore<double> store;
  Rng rng(7);
  Denoiser<double> net(store, micro(8, 2, 2), rng);
  const MatD noised = random_mat(4, kMotionDims, rng), cond = random_mat(4, 8, rng), tags = random_mat(4, 8, rng);
  TapeD t1(false), t2(false);
  const MatD a = net(t1, t1.constant(noised), bundle_of(t1, cond, tags), 5).value();
  const MatD b = net(t2, t2.constant(noised), bundle_of(t2, cond, tags), 5).value();
  EXPECT_EQ(a.rows(), 4);
  EXPECT_EQ(a.cols(), kMotionDims);
  EXPECT_EQ(a, b);
}

TEST(Denoiser, LengthMismatchRejected) {
  ParamStore<double> store;
  Rng rng(8);
  Denoiser<double> net(store, micro(4, 1, 1), rng);
  TapeD t(false);
  EXPECT_THROW(net(t, t.constant(random_mat(5, kMotionDims, rng)), bundle_of(t, random_mat(4, 4, rng), random_mat(4, 4, rng)), 1),
               Error);
}

TEST(Denoiser, AttentionRowsSumToOne) {
  ParamStore<double> store;
  Rng rng(9);
  Denoiser<double> net(store, micro(8, 2, 2), rng);
  randomize(store, rng, 1.0);
  TapeD t(false);
  std::vector<BlockTrace<double>> traces;
  net(t, t.constant(random_mat(6, kMotionDims, rng)), bundle_of(t, random_mat(6, 8, rng), random_mat(6, 8, rng)), 2,
      &traces);
  ASSERT_EQ(traces.size(), 2u);
  for (const auto& tr : traces) {
    for (const auto* set : {&tr.self_attention, &tr.cross_attention, &tr.control.attention}) {
      ASSERT_EQ(set->size(), 2u);
      for (const auto& p : *set) {
        for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
      }
    }
  }
}

TEST(Denoiser, EndToEndGradientMicroConfig) {
  ParamStore<double> store;
  Rng rng(10);
  Denoiser<double> net(store, micro(4, 1, 1), rng);
  randomize(store, rng, 0.4);
  Param<double> noised{"noised", random_mat(4, kMotionDims, rng)};
  Param<double> cond{"cond", random_mat(4, 4, rng)};
  Param<double> tags{"tags", random_mat(4, 4, rng)};
  auto targets = all_params(store);
  targets.insert(targets.end(), {&noised, &cond, &tags});
  const auto r = check_gradients(targets, [&](TapeD& t) {
    auto c = t.param(cond);
    ConditioningBundle<double> b{c, c, c, t.param(tags), c};
    return probe(net(t, t.param(noised), b, 4));
  });
  EXPECT_LT(r.worst, 1e-3) << r.where;
}

TEST(DenoiserConfig, Validation) {
  DenoiserConfig c = micro(6, 4, 1);
  EXPECT_THROW(c.validate(), Error);
  c = micro(4, 1, 0);
  EXPECT_THROW(c.validate(), Error);
}

// ---------------------------------------------------------------------------
// Full model

namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.d_model = 8;
  c.n_blocks = 1;
  c.n_heads = 2;
  c.d_text = 8;
  c.frames = 12;
  c.timesteps = 10;
  c.init_seed = 3;
  return c;
}

ConditionInputs<double> random_inputs(Eigen::Index L, Eigen::Index d_text, Rng& rng) {
  ConditionInputs<double> in;
  in.speaker = random_mat(L, kMotionDims, rng);
  in.pooled_audio = random_mat(L, kMelBins, rng);
  in.text_frames = random_mat(L, d_text, rng);
  in.tags = random_mat(L / kFramesPerTag, 2, rng, 0.5);
  in.held_tags.resize(L, 2);
  for (Eigen::Index r = 0; r < L; ++r) in.held_tags.row(r) = in.tags.row(r / kFramesPerTag);
  return in;
}

}  // namespace

TEST(ListenerModel, SameSeedSameWeights) {
  ListenerModel<double> a(tiny_model()), b(tiny_model());
  ASSERT_EQ(a.params().size(), b.params().size());
  for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params()[i].value, b.params()[i].value);
}

TEST(ListenerModel, PredictCleanShapeAndStepRange) {
  ListenerModel<double> m(tiny_model());
  Rng rng(4);
  const auto in = random_inputs(12, 8, rng);
  TapeD t(false);
  const auto b = m.prepare(t, in);
  const MatD out = m.predict_clean(t, t.constant(random_mat(12, kMotionDims, rng)), b, 10).value();
  EXPECT_EQ(out.rows(), 12);
  EXPECT_EQ(out.cols(), kMotionDims);
  EXPECT_THROW(m.predict_clean(t, t.constant(MatD::Zero(12, kMotionDims)), b, 0), Error);
  EXPECT_THROW(m.predict_clean(t, t.constant(MatD::Zero(12, kMotionDims)), b, 11), Error);
}

TEST(ListenerModel, BundleIsInjectionOfFusedAndTags) {
  ListenerModel<double> m(tiny_model());
  Rng rng(5);
  const auto in = random_inputs(12, 8, rng);
  TapeD t(false);
  const auto b = m.prepare(t, in);
  EXPECT_EQ(b.injected.value(), b.f_fused.value().cwiseProduct(b.tag_emb.value()));
}

TEST(ListenerModel, ZeroConditionsStillRun) {
  ListenerModel<double> m(tiny_model());
  ConditionInputs<double> in;
  in.speaker = MatD::Zero(12, kMotionDims);
  in.pooled_audio = MatD::Zero(12, kMelBins);
  in.text_frames = MatD::Zero(12, 8);
  in.held_tags = MatD::Zero(12, 2);
  in.tags = MatD::Zero(2, 2);
  TapeD t(false);
  const auto b = m.prepare(t, in);
  EXPECT_TRUE(m.predict_clean(t, t.constant(MatD::Zero(12, kMotionDims)), b, 5).value().allFinite());
}

TEST(ListenerModel, FullGradientThroughConditions) {
  ModelConfig c = tiny_model();
  c.d_model = 4;
  c.n_heads = 1;
  c.d_text = 4;
  c.frames = 6;
  ListenerModel<double> m(c);
  Rng rng(6);
  const auto in = random_inputs(6, 4, rng);
  const MatD x = random_mat(6, kMotionDims, rng);
  const auto r = check_gradients(all_params(m.params()), [&](TapeD& t) {
    const auto b = m.prepare(t, in);
    return probe(m.predict_clean(t, t.constant(x), b, 3));
  });
  EXPECT_LT(r.worst, 1e-3) << r.where;
}
