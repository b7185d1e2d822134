#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "tokenmixup/numerics/rng.hpp"

using namespace tkmx;

TEST(CounterRngTest, SameKeySameSequence) {
  CounterRng a(42, RngStream::kData, 3), b(42, RngStream::kData, 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(CounterRngTest, StreamsAreIndependent) {
  CounterRng a(42, RngStream::kData), b(42, RngStream::kInit), c(42, RngStream::kData, 1), d(43, RngStream::kData);
  const auto x = a.next_u64();
  EXPECT_NE(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
  EXPECT_NE(x, d.next_u64());
}

TEST(CounterRngTest, DrawingOneStreamLeavesAnotherUntouched) {
  CounterRng reference(5, RngStream::kMixup);
  const auto expected = reference.next_u64();
  CounterRng other(5, RngStream::kShuffle);
  for (int i = 0; i < 10; ++i) other.next_u64();
  CounterRng mixup(5, RngStream::kMixup);
  EXPECT_EQ(mixup.next_u64(), expected);
}

TEST(CounterRngTest, UniformMoments) {
  CounterRng rng(1, RngStream::kTest);
  const int n = 20000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  // mean 1/2, variance 1/12; 5 standard errors
  EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12, 0.005);
}

TEST(CounterRngTest, NormalMoments) {
  CounterRng rng(2, RngStream::kTest);
  const int n = 20000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 5 / std::sqrt(n));
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(CounterRngTest, TruncatedNormalBounded) {
  CounterRng rng(3, RngStream::kTest);
  for (int i = 0; i < 5000; ++i) EXPECT_LE(std::abs(rng.truncated_normal()), 2.0);
}

TEST(CounterRngTest, BelowCoversRange) {
  CounterRng rng(4, RngStream::kTest);
  std::set<std::size_t> seen;
  for (int i = 0; i < 500; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(CounterRngTest, ShuffleIsPermutation) {
  CounterRng rng(5, RngStream::kTest);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  rng.shuffle(v);
  std::multiset<int> s(v.begin(), v.end());
  EXPECT_EQ(s, (std::multiset<int>{0, 1, 2, 3, 4, 5, 6, 7}));
}
