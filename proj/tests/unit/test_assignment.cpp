#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "tokenmixup/htm/assignment.hpp"

using namespace tkmx;

namespace {

GainMatrix gains(Dims dims, std::initializer_list<Scalar> values) { return {Tensor::from(std::move(dims), values)}; }

GainMatrix random_gains(std::size_t rows, std::size_t cols, CounterRng& rng) {
  return {oracle::random_tensor({rows, cols}, rng, 0.0, 1.0)};
}

}  // namespace

TEST(PairwiseGain, SelfPairsHaveZeroGain) {
  CounterRng rng(1, RngStream::kTest);
  const Tensor s = oracle::random_saliency_rows(4, 6, rng);
  const GainMatrix c = pairwise_gain(s, s, 0.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(c.at(i, i), 0.0);
  for (Scalar v : c.c.data()) EXPECT_GE(v, 0);
}

TEST(PairwiseGain, UniformAgainstOneHot) {
  const Tensor easy = Tensor::from({1, 4}, {0.25, 0.25, 0.25, 0.25});
  const Tensor all = Tensor::from({1, 4}, {0, 0, 1, 0});
  EXPECT_FLOAT_EQ(pairwise_gain(easy, all, 0.0).c[0], 0.75f);
}

TEST(PairwiseGain, LargeRhoZeroesEverything) {
  CounterRng rng(2, RngStream::kTest);
  const Tensor s = oracle::random_saliency_rows(5, 8, rng);
  const GainMatrix c = pairwise_gain(s, s, 1.0);
  for (Scalar v : c.c.data()) EXPECT_EQ(v, 0);
}

TEST(PairwiseGain, RejectsNegativeRhoAndShapeMismatch) {
  const Tensor a({1, 4}), b({2, 3});
  EXPECT_THROW(pairwise_gain(a, a, -0.1), UsageError);
  EXPECT_THROW(pairwise_gain(a, b, 0.0), ShapeError);
}

TEST(Hungarian, AntiDiagonal) {
  const MatchPlan p = hungarian_match(gains({2, 2}, {0, 5, 5, 0}));
  EXPECT_EQ(p.sigma, (std::vector<std::size_t>{1, 0}));
  EXPECT_DOUBLE_EQ(p.realized_gain, 10.0);
}

TEST(Hungarian, DiagonalDominant) {
  const MatchPlan p = hungarian_match(gains({2, 2}, {9, 1, 1, 9}));
  EXPECT_EQ(p.sigma, (std::vector<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(p.realized_gain, 18.0);
}

TEST(Hungarian, SingleRowPicksArgmax) {
  const MatchPlan p = hungarian_match(gains({1, 4}, {0.1f, 0.7f, 0.3f, 0.7f}));
  EXPECT_EQ(p.sigma, (std::vector<std::size_t>{1}));  // tie resolved to the lower column
}

TEST(Hungarian, AllZeroGivesIdentityPrefix) {
  const MatchPlan p = hungarian_match({Tensor({3, 5})});
  EXPECT_EQ(p.sigma, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(p.realized_gain, 0.0);
  EXPECT_EQ(brute_force_match({Tensor({3, 5})}).sigma, p.sigma);
}

TEST(Hungarian, MoreRowsThanColumnsIsUsageError) {
  EXPECT_THROW(hungarian_match({Tensor({3, 2})}), UsageError);
  EXPECT_THROW(brute_force_match({Tensor({3, 2})}), UsageError);
}

TEST(Hungarian, EmptyMatrixGivesEmptyPlan) {
  const MatchPlan p = hungarian_match(GainMatrix{});
  EXPECT_TRUE(p.sigma.empty());
  EXPECT_EQ(p.realized_gain, 0.0);
}

TEST(BruteForce, RejectsLargeBatches) { EXPECT_THROW(brute_force_match({Tensor({2, 9})}), UsageError); }

TEST(BruteForce, AgreesOnTwoByTwo) {
  CounterRng rng(3, RngStream::kTest);
  for (int trial = 0; trial < 50; ++trial) {
    const GainMatrix c = random_gains(2, 2, rng);
    EXPECT_EQ(hungarian_match(c).realized_gain, brute_force_match(c).realized_gain);
  }
}

TEST(Hungarian, MatchesBruteForceOnRandomRectangles) {
  CounterRng rng(4, RngStream::kTest);
  for (int trial = 0; trial < 200; ++trial) {
    const GainMatrix c = random_gains(5, 7, rng);
    const MatchPlan h = hungarian_match(c), b = brute_force_match(c);
    EXPECT_NEAR(h.realized_gain, b.realized_gain, 1e-6);
    EXPECT_EQ(h.sigma, b.sigma);
  }
}

TEST(Hungarian, MatchesBruteForceAcrossShapes) {
  CounterRng rng(5, RngStream::kTest);
  for (std::size_t b = 1; b <= 7; ++b)
    for (std::size_t rows = 1; rows <= b; ++rows)
      for (int trial = 0; trial < 10; ++trial) {
        const GainMatrix c = random_gains(rows, b, rng);
        const MatchPlan h = hungarian_match(c), bf = brute_force_match(c);
        EXPECT_NEAR(h.realized_gain, bf.realized_gain, 1e-6);
        EXPECT_EQ(h.sigma, bf.sigma);
      }
}

TEST(Hungarian, TieBreakOnQuantizedGains) {
  // Small integer gains produce many optimal assignments.
  CounterRng rng(6, RngStream::kTest);
  for (int trial = 0; trial < 100; ++trial) {
    GainMatrix c{Tensor({4, 6})};
    for (auto& v : c.c.storage()) v = static_cast<Scalar>(rng.below(3));
    EXPECT_EQ(hungarian_match(c).sigma, brute_force_match(c).sigma);
  }
}

TEST(Hungarian, SigmaInjectiveAndGainRecomputes) {
  CounterRng rng(7, RngStream::kTest);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 2 + rng.below(20), rows = 1 + rng.below(b);
    const GainMatrix c = random_gains(rows, b, rng);
    const MatchPlan p = hungarian_match(c);
    ASSERT_EQ(p.sigma.size(), rows);
    EXPECT_EQ(std::set<std::size_t>(p.sigma.begin(), p.sigma.end()).size(), rows);
    double total = 0;
    for (std::size_t i = 0; i < rows; ++i) total += c.at(i, p.sigma[i]);
    EXPECT_NEAR(total, p.realized_gain, 1e-6);
  }
}

TEST(Hungarian, MinCostSolverOnSquareMatrix) {
  const std::vector<double> cost{4, 1, 3, 2, 0, 5, 3, 2, 2};
  const auto a = detail::solve_min_cost_assignment(cost, 3);
  EXPECT_EQ(a, (std::vector<std::size_t>{1, 0, 2}));
}
