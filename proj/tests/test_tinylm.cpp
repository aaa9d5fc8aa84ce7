// Copyright 2026 The paravat Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "paravat/tinylm.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.hpp"

namespace paravat {
namespace {

using testing::GradCheckConfig;
using testing::MakePacked;
using testing::MaxRelErrorOver;

constexpr double kGradTol = 1e-4;

struct GradFixture {
  ModelConfig config = GradCheckConfig();
  Parameters<double> params;
  AdapterSet<double> adapters;
  PackedSequence packed;
  Mat<double> delta;

  explicit GradFixture(uint64_t seed) {
    Rng rng(seed);
    params = Parameters<double>::Init(config, rng);
    // Perturb gains/biases away from 1/0 so their gradients are generic.
    for (auto& l : params.layers) {
      for (Mat<double>* m : {&l.ln1_gain, &l.ln1_bias, &l.ln2_gain,
                             &l.ln2_bias, &l.b1, &l.b2}) {
        for (Eigen::Index i = 0; i < m->size(); ++i) {
          m->data()[i] += 0.1 * rng.Normal();
        }
      }
    }
    LoraConfig lc;
    lc.rank = 2;
    lc.alpha = 4.0;
    lc.init_std = 0.3;
    adapters = AdapterSet<double>::Create(config, lc, rng);
    for (auto* a : {&adapters.query[0], &adapters.value[0]}) {
      for (Eigen::Index i = 0; i < a->b.size(); ++i) {
        a->b.data()[i] = 0.3 * rng.Normal();
      }
    }
    packed = MakePacked({5, 9, 4}, {7, 11, 5}, config.max_len);
    delta = Mat<double>(packed.size(), config.d_model);
    for (Eigen::Index i = 0; i < delta.size(); ++i) {
      delta.data()[i] = 0.2 * rng.Normal();
    }
  }

  double RecLoss() const {
    auto tr = ForwardTokens<double>(packed.tokens, &delta, params, &adapters);
    return LossRec(tr.logits, packed).value;
  }
};

TEST(EmbedTest, ZeroTableGivesPositionalRow) {
  auto p = Parameters<double>::Zeros(GradCheckConfig());
  std::vector<TokenId> tokens = {7};
  Mat<double> e = Embed<double>(tokens, p);
  Mat<double> pe = PositionalEncoding(1, 8);
  EXPECT_EQ(e, pe);
  // sin(0) = 0 and cos(0) = 1 alternate at position 0.
  EXPECT_EQ(e(0, 0), 0.0);
  EXPECT_EQ(e(0, 1), 1.0);
}

TEST(EmbedTest, RepeatedTokenDiffersOnlyByPosition) {
  Rng rng(3);
  auto p = Parameters<double>::Init(GradCheckConfig(), rng);
  std::vector<TokenId> tokens = {6, 6};
  Mat<double> e = Embed<double>(tokens, p);
  Mat<double> pe = PositionalEncoding(2, 8);
  EXPECT_TRUE((e.row(1) - e.row(0)).isApprox(pe.row(1) - pe.row(0), 1e-12));
}

TEST(EmbedTest, OneHotRowIsDirectLookup) {
  auto p = Parameters<double>::Zeros(GradCheckConfig());
  p.embed.row(3).setZero();
  p.embed(3, 3) = 1.0;
  std::vector<TokenId> tokens = {3};
  Mat<double> e = Embed<double>(tokens, p);
  Mat<double> expected = PositionalEncoding(1, 8);
  expected(0, 3) += 1.0;
  EXPECT_EQ(e, expected);
}

TEST(EmbedTest, RejectsIdOutsideVocab) {
  auto p = Parameters<double>::Zeros(GradCheckConfig());
  std::vector<TokenId> tokens = {2, 16};
  try {
    Embed<double>(tokens, p);
    FAIL() << "expected VocabOverflow";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kVocabOverflow);
  }
}

TEST(ForwardTest, ZeroPerturbationIsBitIdentical) {
  GradFixture f(11);
  Mat<double> emb = Embed<double>(f.packed.tokens, f.params);
  Mat<double> zero = Mat<double>::Zero(emb.rows(), emb.cols());
  auto a = Forward<double>(emb, nullptr, f.params, &f.adapters);
  auto b = Forward<double>(emb, &zero, f.params, &f.adapters);
  EXPECT_EQ(a.logits, b.logits);
}

TEST(ForwardTest, RepeatedCallsAreBitIdentical) {
  ModelConfig cfg;
  Rng rng(5);
  auto p = Parameters<float>::Init(cfg, rng);
  std::vector<TokenId> tokens = {4, 9, 12, 1, 4, 9, 12, 2};
  auto a = ForwardTokens<float>(tokens, nullptr, p, nullptr);
  auto b = ForwardTokens<float>(tokens, nullptr, p, nullptr);
  EXPECT_EQ(a.logits, b.logits);
}

TEST(ForwardTest, RowsBeforeMutatedTokenAreUnchanged) {
  ModelConfig cfg;
  Rng rng(6);
  auto p = Parameters<float>::Init(cfg, rng);
  std::vector<TokenId> tokens = {4, 9, 12, 30, 1, 4, 9, 12, 30, 2};
  auto base = ForwardTokens<float>(tokens, nullptr, p, nullptr);
  for (size_t j = 0; j < tokens.size(); ++j) {
    auto mutated = tokens;
    mutated[j] = (mutated[j] + 17) % cfg.vocab_size;
    auto out = ForwardTokens<float>(mutated, nullptr, p, nullptr);
    for (size_t i = 0; i < j; ++i) {
      EXPECT_EQ(out.logits.row(i), base.logits.row(i)) << "row " << i;
    }
    if (j + 1 < tokens.size()) {
      EXPECT_NE(out.logits.row(j), base.logits.row(j));
    }
  }
}

TEST(ForwardTest, RejectsMismatchedPerturbation) {
  GradFixture f(12);
  Mat<double> emb = Embed<double>(f.packed.tokens, f.params);
  Mat<double> wrong = Mat<double>::Zero(emb.rows() - 1, emb.cols());
  try {
    Forward<double>(emb, &wrong, f.params, &f.adapters);
    FAIL() << "expected ShapeError";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(SoftmaxTest, RowsSumToOne) {
  Rng rng(8);
  Mat<float> logits(20, 70);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    logits.data()[i] = static_cast<float>(10.0 * rng.Normal());
  }
  Mat<float> p = SoftmaxRows(logits);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    EXPECT_NEAR(p.row(i).sum(), 1.0f, 1e-6f);
  }
}

TEST(LossRecTest, UniformLogitsGiveLogV) {
  PackedSequence packed = MakePacked({5}, {6, 7}, 10);
  Mat<double> logits = Mat<double>::Zero(packed.size(), 16);
  EXPECT_NEAR(LossRec(logits, packed).value, std::log(16.0), 1e-12);
}

TEST(LossRecTest, ConfidentCorrectLogitsApproachZero) {
  PackedSequence packed = MakePacked({5}, {6, 7}, 10);
  Mat<double> logits = Mat<double>::Zero(packed.size(), 16);
  for (size_t i = 0; i + 1 < packed.size(); ++i) {
    logits(static_cast<Eigen::Index>(i), packed.tokens[i + 1]) = 60.0;
  }
  EXPECT_LT(LossRec(logits, packed).value, 1e-20);
}

TEST(LossRecTest, TwoTokenTargetMatchesHandValue) {
  // X = [a, SEP, b, EOS] with a=4, b=5, V=6; rows 1 and 2 are scored.
  PackedSequence packed = MakePacked({4}, {5}, 10);
  Mat<double> logits = Mat<double>::Zero(4, 6);
  logits.row(1) << 0.0, 1.0, 0.0, 0.0, 0.0, 2.0;  // predicts b = 5
  logits.row(2) << 0.5, 0.0, 1.5, 0.0, 0.0, 0.0;  // predicts EOS = 2
  const double lse1 = std::log(4.0 + std::exp(1.0) + std::exp(2.0));
  const double lse2 = std::log(4.0 + std::exp(0.5) + std::exp(1.5));
  const double expected = 0.5 * ((lse1 - 2.0) + (lse2 - 1.5));
  EXPECT_NEAR(LossRec(logits, packed).value, expected, 1e-12);
}

TEST(LossRecTest, EmptyMaskIsRejected) {
  PackedSequence packed = MakePacked({4}, {5}, 10);
  packed.loss_mask.assign(packed.size(), 0);
  Mat<double> logits = Mat<double>::Zero(4, 6);
  try {
    LossRec(logits, packed);
    FAIL() << "expected EmptyLossMask";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyLossMask);
  }
}

TEST(KlDivTest, IdenticalDistributionsGiveZero) {
  Rng rng(9);
  Mat<double> p(5, 7);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.Normal();
  std::vector<uint8_t> mask(5, 1);
  auto r = KlDiv(p, p, mask);
  EXPECT_NEAR(r.value, 0.0, 1e-15);
  EXPECT_LT(r.dlogits.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(KlDivTest, NeverNegative) {
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    Mat<double> p(3, 5), q(3, 5);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      p.data()[i] = 3.0 * rng.Normal();
      q.data()[i] = 3.0 * rng.Normal();
    }
    std::vector<uint8_t> mask = {1, 0, 1};
    EXPECT_GE(KlDiv(p, q, mask).value, 0.0);
  }
}

TEST(KlDivTest, TwoOutcomeClosedForm) {
  // softmax(0, 0) = (1/2, 1/2); softmax(ln 3, 0) = (3/4, 1/4).
  Mat<double> p = Mat<double>::Zero(1, 2);
  Mat<double> q(1, 2);
  q << std::log(3.0), 0.0;
  std::vector<uint8_t> mask = {1};
  const double expected =
      0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(0.5 / 0.25);
  EXPECT_NEAR(KlDiv(p, q, mask).value, expected, 1e-15);
  EXPECT_NEAR(expected, 0.5 * std::log(4.0 / 3.0), 1e-15);
}

TEST(KlDivTest, ShapeMismatchIsRejected) {
  Mat<double> p = Mat<double>::Zero(2, 3);
  Mat<double> q = Mat<double>::Zero(2, 4);
  std::vector<uint8_t> mask = {1, 1};
  try {
    KlDiv(p, q, mask);
    FAIL() << "expected ShapeError";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(BackwardTest, AdapterAGradientIsZeroWhileBIsZero) {
  GradFixture f(13);
  f.adapters.query[0].b.setZero();
  auto tr = ForwardTokens<double>(f.packed.tokens, &f.delta, f.params,
                                  &f.adapters);
  auto loss = LossRec(tr.logits, f.packed);
  auto g = Backward(tr, loss.dlogits);
  EXPECT_TRUE((g.adapters.query[0].a.array() == 0.0).all());
  EXPECT_FALSE((g.adapters.query[0].b.array() == 0.0).all());
}

TEST(BackwardTest, StaleTraceIsRejected) {
  GradFixture f(14);
  auto tr = ForwardTokens<double>(f.packed.tokens, &f.delta, f.params,
                                  &f.adapters);
  auto loss = LossRec(tr.logits, f.packed);
  f.adapters.Touch();
  try {
    Backward(tr, loss.dlogits);
    FAIL() << "expected TraceMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTraceMismatch);
  }
}

TEST(BackwardTest, PerturbationGradientEqualsEmbeddingGradient) {
  GradFixture f(15);
  Mat<double> emb = Embed<double>(f.packed.tokens, f.params);
  Mat<double> zero = Mat<double>::Zero(emb.rows(), emb.cols());
  auto tr_plain = Forward<double>(emb, nullptr, f.params, &f.adapters);
  auto tr_delta = Forward<double>(emb, &zero, f.params, &f.adapters);
  auto g_plain = Backward(tr_plain, LossRec(tr_plain.logits, f.packed).dlogits);
  auto g_delta = Backward(tr_delta, LossRec(tr_delta.logits, f.packed).dlogits);
  EXPECT_EQ(g_plain.input, g_delta.input);
  // And the embedding-input gradient agrees with finite differences.
  auto f_emb = [&] {
    return LossRec(Forward<double>(emb, nullptr, f.params, &f.adapters).logits,
                   f.packed)
        .value;
  };
  EXPECT_LT(MaxRelErrorOver(emb, g_plain.input, f_emb), kGradTol);
}

// Each layer type is checked on its own against central differences.
class GradCheckTest : public ::testing::TestWithParam<std::string> {};

TEST_P(GradCheckTest, RecLossMatchesFiniteDifferences) {
  GradFixture f(21);
  auto tr = ForwardTokens<double>(f.packed.tokens, &f.delta, f.params,
                                  &f.adapters);
  auto g = Backward(tr, LossRec(tr.logits, f.packed).dlogits);
  const std::string group = GetParam();
  std::vector<std::pair<Mat<double>*, const Mat<double>*>> checks;
  auto& l = f.params.layers[0];
  auto& gl = g.params.layers[0];
  if (group == "embedding") {
    checks = {{&f.params.embed, &g.params.embed}};
  } else if (group == "attention") {
    checks = {{&l.wq, &gl.wq}, {&l.wk, &gl.wk}, {&l.wv, &gl.wv},
              {&l.wo, &gl.wo}};
  } else if (group == "feed_forward") {
    checks = {{&l.w1, &gl.w1}, {&l.b1, &gl.b1}, {&l.w2, &gl.w2},
              {&l.b2, &gl.b2}};
  } else if (group == "layer_norm") {
    checks = {{&l.ln1_gain, &gl.ln1_gain},     {&l.ln1_bias, &gl.ln1_bias},
              {&l.ln2_gain, &gl.ln2_gain},     {&l.ln2_bias, &gl.ln2_bias},
              {&f.params.lnf_gain, &g.params.lnf_gain},
              {&f.params.lnf_bias, &g.params.lnf_bias}};
  } else if (group == "adapters") {
    checks = {{&f.adapters.query[0].a, &g.adapters.query[0].a},
              {&f.adapters.query[0].b, &g.adapters.query[0].b},
              {&f.adapters.value[0].a, &g.adapters.value[0].a},
              {&f.adapters.value[0].b, &g.adapters.value[0].b}};
  } else if (group == "perturbation") {
    checks = {{&f.delta, &g.input}};
  }
  ASSERT_FALSE(checks.empty());
  for (auto [param, grad] : checks) {
    EXPECT_LT(MaxRelErrorOver(*param, *grad, [&] { return f.RecLoss(); }),
              kGradTol);
  }
}

INSTANTIATE_TEST_SUITE_P(LayerTypes, GradCheckTest,
                         ::testing::Values("embedding", "attention",
                                           "feed_forward", "layer_norm",
                                           "adapters", "perturbation"));

TEST(KlGradCheckTest, KlGradientTreatsCleanLogitsAsConstant) {
  GradFixture f(22);
  const Mat<double> clean =
      ForwardTokens<double>(f.packed.tokens, nullptr, f.params, &f.adapters)
          .logits;
  const auto rows = f.packed.PredictionRows();
  auto kl = [&] {
    auto tr = ForwardTokens<double>(f.packed.tokens, &f.delta, f.params,
                                    &f.adapters);
    return KlDiv(tr.logits, clean, rows).value;
  };
  auto tr = ForwardTokens<double>(f.packed.tokens, &f.delta, f.params,
                                  &f.adapters);
  auto g = Backward(tr, KlDiv(tr.logits, clean, rows).dlogits);
  EXPECT_LT(MaxRelErrorOver(f.delta, g.input, kl), kGradTol);
  EXPECT_LT(MaxRelErrorOver(f.adapters.value[0].b, g.adapters.value[0].b, kl),
            kGradTol);
  EXPECT_LT(MaxRelErrorOver(f.adapters.query[0].a, g.adapters.query[0].a, kl),
            kGradTol);
}

TEST(BackwardTest, SkippingParameterGradientsKeepsInputGradient) {
  GradFixture f(23);
  auto tr = ForwardTokens<double>(f.packed.tokens, &f.delta, f.params,
                                  &f.adapters);
  auto dl = LossRec(tr.logits, f.packed).dlogits;
  auto full = Backward(tr, dl);
  BackwardOptions only_input;
  only_input.params = false;
  only_input.adapters = false;
  auto partial = Backward(tr, dl, only_input);
  EXPECT_FALSE(partial.has_params);
  EXPECT_FALSE(partial.has_adapters);
  EXPECT_EQ(partial.input, full.input);
}

}  // namespace
}  // namespace paravat
