#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "tokenmixup/numerics/ops.hpp"
#include "tokenmixup/scorenet/scorenet.hpp"

using namespace tkmx;

namespace {

struct Fixture {
  ParameterStore store;
  CounterRng rng{3, RngStream::kInit};
  ScoreNet net{store, 6, 3, rng};

  Fixture() {
    CounterRng r(4, RngStream::kTest);
    for (Parameter* p : store.all())
      for (auto& v : p->value.storage()) v = static_cast<Scalar>(r.uniform(-0.7, 0.7));
  }
};

}  // namespace

TEST(ScoreNetTest, ForwardMatchesOracle) {
  Fixture f;
  CounterRng rng(5, RngStream::kTest);
  Tensor tokens = oracle::random_tensor({2, 4, 6}, rng);
  Graph g(false);
  Tensor logits = f.net.forward(g, tokens).value();
  ASSERT_EQ(logits.dims(), (Dims{2, 3}));

  const Tensor& w1 = f.store.get("scorenet.fc1.w").value;
  const Tensor& b1 = f.store.get("scorenet.fc1.b").value;
  const Tensor& w2 = f.store.get("scorenet.fc2.w").value;
  const Tensor& b2 = f.store.get("scorenet.fc2.b").value;
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<double> pooled(6, 0.0), hidden(6, 0.0);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t e = 0; e < 6; ++e) pooled[e] += tokens.at(i, t, e) / 4.0;
    for (std::size_t o = 0; o < 6; ++o) {
      double z = b1[o];
      for (std::size_t e = 0; e < 6; ++e) z += pooled[e] * w1.at(e, o);
      hidden[o] = 0.5 * z * (1 + std::erf(z / std::sqrt(2.0)));
    }
    for (std::size_t k = 0; k < 3; ++k) {
      double z = b2[k];
      for (std::size_t o = 0; o < 6; ++o) z += hidden[o] * w2.at(o, k);
      EXPECT_NEAR(logits.at(i, k), z, 1e-5);
    }
  }
}

TEST(ScoreNetTest, DifficultyIsPerSampleCrossEntropy) {
  Fixture f;
  CounterRng rng(6, RngStream::kTest);
  Tensor tokens = oracle::random_tensor({3, 4, 6}, rng);
  Tensor labels = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Graph g(false);
  const Tensor p = oracle::softmax_rows(f.net.forward(g, tokens).value());
  const DifficultyVector u = f.net.difficulty(tokens, labels);
  ASSERT_EQ(u.u.dims(), (Dims{3}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(u.u[i], -std::log(static_cast<double>(p.at(i, i))), 1e-5);
}

TEST(ScoreNetTest, InputIsStopGradient) {
  Fixture f;
  CounterRng rng(7, RngStream::kTest);
  Graph g;
  Var x = g.leaf(oracle::random_tensor({2, 4, 6}, rng));
  Tensor labels = Tensor::from({2, 3}, {1, 0, 0, 0, 0, 1});
  Var loss = mean(cross_entropy(f.net.forward(g, x), labels));
  g.backward(loss);
  EXPECT_EQ(g.grad(x), nullptr);
  EXPECT_TRUE(f.store.get("scorenet.fc1.w").grad_ready);
  double mass = 0;
  for (Scalar v : f.store.get("scorenet.fc2.w").grad.data()) mass += std::abs(v);
  EXPECT_GT(mass, 0.0);
}

TEST(ScoreNetTest, ZeroHeadGivesUniformDifficulty) {
  Fixture f;
  f.net.zero_head();
  CounterRng rng(8, RngStream::kTest);
  const DifficultyVector u = f.net.difficulty(oracle::random_tensor({2, 4, 6}, rng), Tensor::from({2, 3}, {0, 1, 0, 1, 0, 0}));
  for (Scalar v : u.u.data()) EXPECT_NEAR(v, std::log(3.0), 1e-6);
}

TEST(SelectEasy, StrictThreshold) {
  DifficultyVector u{Tensor::from({4}, {0.1f, 0.2f, 0.3f, 0.05f})};
  EXPECT_EQ(select_easy(u, 0.2f).indices, (std::vector<std::size_t>{0, 3}));
  EXPECT_TRUE(select_easy(u, 0.0).empty());
  EXPECT_EQ(select_easy(u, std::numeric_limits<double>::infinity()).size(), 4u);
  EXPECT_THROW(select_easy(u, -1.0), UsageError);
}

TEST(SelectEasy, ZeroDifficultyStillExcludedAtTauZero) {
  DifficultyVector u{Tensor::from({2}, {0.0f, 0.0f})};
  EXPECT_TRUE(select_easy(u, 0.0).empty());
}
