#include <gtest/gtest.h>

#include <cmath>

#include "biastracer/attribution.hpp"
#include "biastracer/error.hpp"
#include "support.hpp"

namespace bt {
namespace {

using support::random_model;
using support::random_prompt;

ModelConfig tiny_config() {
  ModelConfig c;
  c.n_layers = 2;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 5;
  c.vocab_size = 12;
  c.max_len = 8;
  return c;
}

NeuronOverride pin(const std::vector<Vector>& values) {
  NeuronOverride o(OverrideScope::MaskPosition);
  for (std::size_t l = 0; l < values.size(); ++l) {
    for (int i = 0; i < values[l].size(); ++i) o.set({static_cast<int>(l), i}, OverrideSpec::set_to(values[l](i)));
  }
  return o;
}

TEST(IntegrateGradients, LinearProbeIsExactForAnyStepCount) {
  // P(v) = 0.3 + 0.7 v on a single neuron: the gradient is constant, so the
  // Riemann sum equals P(w) - P(0) for every m.
  const std::vector<Vector> observed{Vector::Constant(1, 0.8)};
  const auto grad = [](const std::vector<Vector>&) { return std::vector<Vector>{Vector::Constant(1, 0.7)}; };
  for (int m : {1, 2, 3, 7, 50}) {
    const auto s = integrate_gradients(observed, m, grad);
    EXPECT_NEAR(s[0](0), (0.3 + 0.7 * 0.8) - 0.3, 1e-15) << "m=" << m;
  }
}

TEST(IntegrateGradients, UsesRightRiemannPoints) {
  // grad = v^2 at v = alpha * 2 with m = 2: alphas 1/2 and 1 -> (1 + 4) * 2 / 2
  const std::vector<Vector> observed{Vector::Constant(1, 2.0)};
  const auto grad = [](const std::vector<Vector>& v) {
    return std::vector<Vector>{v[0].array().square().matrix()};
  };
  EXPECT_DOUBLE_EQ(integrate_gradients(observed, 2, grad)[0](0), 5.0);
  EXPECT_TRUE(support::throws_code([&] { integrate_gradients(observed, 0, grad); }, ErrorCode::InvalidArgument));
}

TEST(IgAttribution, ZeroActivationScoresExactlyZero) {
  auto params = random_model(tiny_config(), 5);
  params.layers[1].w_in.row(2).setZero();
  params.layers[1].b_in(2) = 0.0;
  Rng rng(1);
  const auto seq = random_prompt(12, 6, 3, rng);
  const auto map = ig_attribution(params, seq, 4, {.steps = 8});
  EXPECT_EQ(map.observed[1](2), 0.0);
  EXPECT_EQ(map.scores[1](2), 0.0);
}

TEST(IgAttribution, MatchesFiniteDifferenceRiemannOracle) {
  const auto params = random_model(tiny_config(), 6);
  Rng rng(2);
  const auto seq = random_prompt(12, 6, 1, rng);
  const TokenId answer = 7;
  const int m = 6;
  const auto map = ig_attribution(params, seq, answer, {.steps = m});
  const double eps = 1e-5;
  for (int l = 0; l < 2; ++l) {
    for (int i = 0; i < 5; ++i) {
      double sum = 0;
      for (int k = 1; k <= m; ++k) {
        auto values = map.observed;
        for (auto& v : values) v *= static_cast<double>(k) / m;
        const double centre = values[static_cast<std::size_t>(l)](i);
        values[static_cast<std::size_t>(l)](i) = centre + eps;
        const double up = mask_token_prob(params, seq, answer, pin(values));
        values[static_cast<std::size_t>(l)](i) = centre - eps;
        const double down = mask_token_prob(params, seq, answer, pin(values));
        sum += (up - down) / (2 * eps);
      }
      const double oracle = map.observed[static_cast<std::size_t>(l)](i) * sum / m;
      EXPECT_NEAR(map.scores[static_cast<std::size_t>(l)](i), oracle, 1e-8) << l << "," << i;
    }
  }
}

TEST(IgAttribution, JointPathScoresSumToProbabilityGap) {
  const auto params = random_model(tiny_config(), 7, 0.3);
  Rng rng(3);
  const auto seq = random_prompt(12, 5, 4, rng);
  const TokenId answer = 9;
  const auto map = ig_attribution(params, seq, answer, {.steps = 400});
  double total = 0;
  for (const auto& v : map.scores) total += v.sum();
  std::vector<Vector> zeros;
  for (const auto& v : map.observed) zeros.push_back(Vector::Zero(v.size()));
  const double gap = map.probability - mask_token_prob(params, seq, answer, pin(zeros));
  EXPECT_NEAR(total, gap, 1e-3 * std::max(1.0, std::abs(gap)));
}

TEST(BaselineAttribution, ScoresAreTheObservedActivations) {
  const auto params = random_model(tiny_config(), 8);
  Rng rng(4);
  const auto seq = random_prompt(12, 7, 0, rng);
  const auto map = baseline_attribution(params, seq, 5);
  const auto trace = forward(params, seq).trace;
  ASSERT_EQ(map.scores.size(), trace.activations.size());
  for (std::size_t l = 0; l < trace.activations.size(); ++l) {
    EXPECT_TRUE(map.scores[l] == trace.activations[l]);
  }
  EXPECT_NEAR(map.probability, mask_token_prob(params, seq, 5), 1e-15);
}

TEST(BaselineAttribution, DegenerateModelScoresZero) {
  auto params = random_model(tiny_config(), 9);
  for (auto& L : params.layers) {
    L.w_in.setZero();
    L.b_in.setZero();
  }
  Rng rng(5);
  const auto map = baseline_attribution(params, random_prompt(12, 4, 2, rng), 6);
  for (const auto& v : map.scores) EXPECT_TRUE(v.isZero(0.0));
}

TEST(Completeness, DeadPathHasZeroScoreAndGap) {
  auto params = random_model(tiny_config(), 10);
  params.layers[0].w_out.col(1).setZero();
  Rng rng(6);
  const auto seq = random_prompt(12, 6, 2, rng);
  const auto r = completeness_check(params, seq, 8, {0, 1}, 50);
  EXPECT_EQ(r.ig_score, 0.0);
  EXPECT_EQ(r.suppression_gap, 0.0);
}

TEST(Completeness, ErrorShrinksWithMoreSteps) {
  const auto params = random_model(tiny_config(), 11);
  Rng rng(7);
  for (int trial = 0; trial < 4; ++trial) {
    const auto seq = random_prompt(12, 6, rng.below(6), rng);
    const TokenId answer = 3 + static_cast<TokenId>(rng.below(9));
    for (int l = 0; l < 2; ++l) {
      for (int i = 0; i < 5; ++i) {
        const auto coarse = completeness_check(params, seq, answer, {l, i}, 5);
        const auto fine = completeness_check(params, seq, answer, {l, i}, 200);
        EXPECT_LE(fine.abs_error, coarse.abs_error + 1e-12);
        EXPECT_DOUBLE_EQ(fine.suppression_gap, coarse.suppression_gap);
      }
    }
  }
}

TEST(Attribution, RejectsBadPrompts) {
  const auto params = random_model(tiny_config(), 12);
  TokenSequence no_mask{{3, 4, 5}, std::nullopt};
  EXPECT_TRUE(support::throws_code([&] { ig_attribution(params, no_mask, 4); }, ErrorCode::NoMaskPosition));
  Rng rng(8);
  const auto seq = random_prompt(12, 4, 1, rng);
  EXPECT_TRUE(support::throws_code([&] { baseline_attribution(params, seq, kUnkId); }, ErrorCode::AnswerNotInVocab));
  EXPECT_TRUE(support::throws_code([&] { completeness_check(params, seq, 4, {2, 0}, 5); },
                                   ErrorCode::OverrideOutOfBounds));
  EXPECT_EQ(parse_method("baseline"), AttributionMethod::ActivationBaseline);
  EXPECT_EQ(method_name(AttributionMethod::IntegratedGradients), "ig");
}

}  // namespace
}  // namespace bt
