#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "biastracer/error.hpp"
#include "biastracer/rng.hpp"
#include "biastracer/stats.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace bt {
namespace {

using support::count_ranks;
using support::pair_count_delta;
using support::rank_pearson;

TEST(Wilcoxon, AllPositiveFiveGivesFifteenAndSixteenth) {
  const std::vector<double> before{1, 2, 3, 4, 5}, after{2, 4, 6, 8, 10};
  const auto r = wilcoxon_signed_rank(before, after);
  EXPECT_EQ(r.w_plus, 15.0);
  EXPECT_EQ(r.w_minus, 0.0);
  EXPECT_EQ(r.w_min, 0.0);
  EXPECT_EQ(r.n, 5u);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.p_value, 0.0625);
}

TEST(Wilcoxon, ExactPMatchesSignEnumeration) {
  Rng rng(2024);
  for (int fixture = 0; fixture < 200; ++fixture) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> before(n), after(n);
    for (std::size_t i = 0; i < n; ++i) {
      before[i] = static_cast<double>(rng.below(10));
      // small integer shifts produce tied magnitudes; zero shifts are avoided so n stays fixed
      const double shift = static_cast<double>(1 + rng.below(4)) * (rng.below(2) ? 1.0 : -1.0);
      after[i] = before[i] + shift;
    }
    const auto r = wilcoxon_signed_rank(before, after);
    std::vector<double> ranks;
    const double w_plus = support::signed_rank_w_plus(before, after, &ranks);
    ASSERT_EQ(r.n, n);
    EXPECT_EQ(r.w_plus, w_plus);
    EXPECT_EQ(r.p_value, support::enumerate_signed_rank_p(ranks, w_plus)) << "fixture " << fixture << " n=" << n;
  }
}

TEST(Wilcoxon, NormalApproximationTracksExactAtTwentyFive) {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> ranks(25);
    std::vector<double> magnitude(25);
    for (auto& m : magnitude) m = rng.uniform() + 0.01;
    ranks = average_ranks(magnitude);
    double w = 0;
    for (double r : ranks) {
      if (rng.uniform() < 0.6) w += r;
    }
    EXPECT_NEAR(wilcoxon_exact_p(ranks, w), wilcoxon_normal_p(ranks, w), 0.01) << "W+=" << w;
  }
}

TEST(Wilcoxon, ZeroDifferencesAreDropped) {
  const std::vector<double> before{1, 2, 3, 4}, after{1, 3, 5, 4};
  const auto r = wilcoxon_signed_rank(before, after);
  EXPECT_EQ(r.n, 2u);
  EXPECT_EQ(r.w_plus, 3.0);
}

TEST(Wilcoxon, DegenerateInputsFail) {
  const std::vector<double> a{1, 2, 3}, b{1, 2};
  EXPECT_TRUE(support::throws_code([&] { wilcoxon_signed_rank(a, a); }, ErrorCode::AllZeroDifferences));
  EXPECT_TRUE(support::throws_code([&] { wilcoxon_signed_rank(a, b); }, ErrorCode::LengthMismatch));
  EXPECT_TRUE(support::throws_code([&] { wilcoxon_signed_rank({}, {}); }, ErrorCode::EmptyInput));
}

TEST(CliffsDelta, WorkedExamples) {
  EXPECT_EQ(cliffs_delta(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0, 0}), 1.0);
  const std::vector<double> x{4, 1, 7, 2};
  EXPECT_EQ(cliffs_delta(x, x), 0.0);
  EXPECT_EQ(cliffs_delta(std::vector<double>{1, 3}, std::vector<double>{2, 4}), -0.5);
  EXPECT_TRUE(support::throws_code([] { cliffs_delta({}, std::vector<double>{1}); }, ErrorCode::EmptyInput));
}

TEST(CliffsDelta, EqualsPairCountOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> x(1 + rng.below(15)), y(1 + rng.below(15));
    for (auto& v : x) v = static_cast<double>(rng.below(6));
    for (auto& v : y) v = static_cast<double>(rng.below(6));
    EXPECT_EQ(cliffs_delta(x, y), pair_count_delta(x, y));
  }
}

TEST(CliffsDelta, PairedCountsDominance) {
  const std::vector<double> a{2, 2, 5, 1}, b{1, 2, 3, 4};
  EXPECT_EQ(cliffs_delta_paired(a, b), (2.0 - 1.0) / 4.0);
}

TEST(Spearman, WorkedExamples) {
  const std::vector<double> x{1, 2, 3, 4}, y{2, 1, 4, 3};
  const auto r = spearman(x, y);
  EXPECT_EQ(r.statistic, 0.6);
  // t = 0.6 * sqrt(2 / 0.64) on 2 df: two-tailed p = 1 - t / sqrt(2 + t^2) = 0.4
  EXPECT_NEAR(r.p_value, 0.4, 1e-12);

  const std::vector<double> inc{0.5, 1, 2, 3.5, 7};
  std::vector<double> sq;
  for (double v : inc) sq.push_back(v * v);
  EXPECT_EQ(spearman(inc, sq).statistic, 1.0);
  EXPECT_NEAR(spearman(inc, sq).p_value, 2.0 / 120.0, 1e-15);
  const std::vector<double> rev(inc.rbegin(), inc.rend());
  EXPECT_EQ(spearman(inc, rev).statistic, -1.0);
}

TEST(Spearman, MatchesClosedFormWithoutTies) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng.below(20);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(i) + 0.5 * rng.uniform();
      y[i] = rng.uniform();
    }
    rng.shuffle(x);
    EXPECT_EQ(spearman(x, y).statistic, support::spearman_closed_form(x, y));
  }
}

TEST(Spearman, MatchesRankPearsonWithTies) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4 + rng.below(20);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = static_cast<double>(rng.below(4));
    for (auto& v : y) v = static_cast<double>(rng.below(5));
    x[0] = 0;
    x[1] = 3;
    y[0] = 0;
    y[1] = 4;  // never constant
    EXPECT_NEAR(spearman(x, y).statistic, rank_pearson(x, y), 1e-12);
  }
}

TEST(Spearman, DegenerateInputsFail) {
  const std::vector<double> x{1, 2, 3}, c{5, 5, 5}, two{1, 2};
  EXPECT_TRUE(support::throws_code([&] { spearman(x, c); }, ErrorCode::ConstantInput));
  EXPECT_TRUE(support::throws_code([&] { spearman(two, two); }, ErrorCode::InvalidArgument));
  EXPECT_TRUE(support::throws_code([&] { spearman(x, two); }, ErrorCode::LengthMismatch));
}

TEST(Ranks, AverageTies) {
  EXPECT_EQ(average_ranks(std::vector<double>{10, 20, 10, 30}), (std::vector<double>{1.5, 3, 1.5, 4}));
}

}  // namespace
}  // namespace bt
