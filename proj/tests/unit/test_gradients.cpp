#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "oracles.hpp"
#include "tokenmixup/numerics/ops.hpp"
#include "tokenmixup/saliency/saliency.hpp"

using namespace tkmx;

namespace {

using Fn = std::function<Var(Graph&, const std::vector<Var>&)>;

// Central differences against backward() for every input entry.
double worst_relative_error(const Fn& f, std::vector<Tensor> inputs, double h = 1e-6) {
  Graph g;
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(g.leaf(t));
  g.backward(f(g, leaves));

  auto eval = [&](const std::vector<Tensor>& in) {
    Graph ng(false);
    std::vector<Var> v;
    for (const auto& t : in) v.push_back(ng.constant(t));
    return static_cast<double>(f(ng, v).value()[0]);
  };

  double worst = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor* grad = g.grad(leaves[k]);
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const Scalar keep = inputs[k][i];
      inputs[k][i] = keep + h;
      const double up = eval(inputs);
      inputs[k][i] = keep - h;
      const double down = eval(inputs);
      inputs[k][i] = keep;
      const double fd = (up - down) / (2 * h);
      const double an = grad ? (*grad)[i] : 0.0;
      worst = std::max(worst, std::abs(an - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

// Reduces any output to a scalar with fixed random weights.
Var project(Graph& g, Var y, std::uint64_t seed) {
  CounterRng rng(seed, RngStream::kTest);
  return sum(mul(y, g.constant(oracle::random_tensor(y.dims(), rng))));
}

Tensor rnd(Dims d, std::uint64_t seed) {
  CounterRng rng(seed, RngStream::kTest);
  return oracle::random_tensor(std::move(d), rng);
}

constexpr double kTol = 1e-6;

}  // namespace

TEST(FiniteDifference, Matmul) {
  EXPECT_LT(worst_relative_error([](Graph& g, const auto& v) { return project(g, matmul(v[0], v[1]), 1); },
                                 {rnd({2, 3, 4}, 2), rnd({2, 4, 5}, 3)}),
            kTol);
  EXPECT_LT(worst_relative_error([](Graph& g, const auto& v) { return project(g, matmul(v[0], v[1]), 1); },
                                 {rnd({2, 3, 4}, 2), rnd({4, 5}, 3)}),
            kTol);
}

TEST(FiniteDifference, Elementwise) {
  Fn f = [](Graph& g, const auto& v) {
    Var y = add(mul(v[0], v[1]), sub(scale(v[0], 0.5), v[1]));
    return project(g, add_broadcast(gelu(y), v[2]), 4);
  };
  EXPECT_LT(worst_relative_error(f, {rnd({2, 3, 4}, 5), rnd({2, 3, 4}, 6), rnd({4}, 7)}), kTol);
}

TEST(FiniteDifference, SoftmaxAndLayerNorm) {
  Fn f = [](Graph& g, const auto& v) {
    return project(g, softmax_rows(layer_norm(v[0], v[1], v[2], 1e-5)), 8);
  };
  EXPECT_LT(worst_relative_error(f, {rnd({3, 6}, 9), rnd({6}, 10), rnd({6}, 11)}), kTol);
}

TEST(FiniteDifference, CrossEntropy) {
  Tensor targets = Tensor::from({2, 3}, {0.25, 0.75, 0, 0, 0, 1});
  Fn f = [&](Graph&, const auto& v) { return mean(cross_entropy(v[0], targets)); };
  EXPECT_LT(worst_relative_error(f, {rnd({2, 3}, 12)}), kTol);
}

TEST(FiniteDifference, ShapeOps) {
  Fn f = [](Graph& g, const auto& v) {
    Var p = permute(reshape(v[0], {2, 3, 2, 2}), {0, 2, 1, 3});
    Var c = concat({transpose_last2(v[1]), mean_axis(p, 1)}, 1);
    Var gathered = gather0(c, {1, 0, 1});
    return project(g, gathered, 13);
  };
  EXPECT_LT(worst_relative_error(f, {rnd({2, 12}, 14), rnd({2, 2, 1}, 15)}), kTol);
}

TEST(FiniteDifference, BlendIgnoresMask) {
  Tensor mask = Tensor::from({2, 3}, {1, 0, 1, 0, 0, 1});
  Fn f = [&](Graph& g, const auto& v) { return project(g, blend(v[0], v[1], mask), 16); };
  EXPECT_LT(worst_relative_error(f, {rnd({2, 3, 2}, 17), rnd({2, 3, 2}, 18)}), kTol);
}

TEST(FiniteDifference, StopGradientBlocksFlow) {
  Graph g;
  Var x = g.leaf(rnd({3}, 19));
  g.backward(sum(mul(stop_gradient(x), x)));
  const Tensor* grad = g.grad(x);
  ASSERT_NE(grad, nullptr);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ((*grad)[i], x.value()[i]);
}

TEST(FiniteDifference, ModelParameters) {
  ModelConfig cfg;
  cfg.image_size = 4;
  cfg.patch_size = 2;
  cfg.depth = 2;
  cfg.heads = 2;
  cfg.dim = 8;
  cfg.num_classes = 3;
  cfg.htm_layer = 1;
  cfg.vtm_layer = 2;
  cfg.kappa = 2;
  TransformerModel model(cfg, 3);
  const Tensor images = rnd({2, 1, 4, 4}, 20);
  const Tensor labels = Tensor::from({2, 3}, {1, 0, 0, 0, 0.4, 0.6});
  auto loss = [&](Graph& g) { return mean(cross_entropy(model.encoder_forward(g, model.tokenize(g, images)).logits, labels)); };

  model.params().zero_grad();
  {
    Graph g;
    g.backward(loss(g));
  }
  double worst = 0;
  const double h = 1e-6;
  for (Parameter* p : model.params().all()) {
    if (p->name.rfind("scorenet", 0) == 0) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const Scalar keep = p->value[i];
      p->value[i] = keep + h;
      Graph a(false);
      const double up = loss(a).value()[0];
      p->value[i] = keep - h;
      Graph b(false);
      const double down = loss(b).value()[0];
      p->value[i] = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(p->grad[i] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  EXPECT_LT(worst, kTol);
}

TEST(FiniteDifference, GradientSaliencyMatchesTokenDerivative) {
  ModelConfig cfg;
  cfg.image_size = 4;
  cfg.patch_size = 2;
  cfg.depth = 2;
  cfg.heads = 2;
  cfg.dim = 8;
  cfg.num_classes = 3;
  cfg.htm_layer = 1;
  cfg.vtm_layer = 2;
  cfg.kappa = 2;
  TransformerModel model(cfg, 5);
  const Tensor tokens = rnd({2, 4, 8}, 21);
  const Tensor labels = Tensor::from({2, 3}, {0, 1, 0, 0, 0, 1});
  const SaliencyMap s = gradient_saliency_from_tokens(model, tokens, labels, 2);

  auto loss = [&](const Tensor& x) {
    Graph g(false);
    return static_cast<double>(mean(cross_entropy(model.forward_from(g, 2, g.constant(x)), labels)).value()[0]);
  };
  const double h = 1e-6;
  Tensor x = tokens;
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<double> norms(4, 0.0);
    double total = 0;
    for (std::size_t t = 0; t < 4; ++t) {
      for (std::size_t k = 0; k < 8; ++k) {
        const Scalar keep = x.at(i, t, k);
        x.at(i, t, k) = keep + h;
        const double up = loss(x);
        x.at(i, t, k) = keep - h;
        const double down = loss(x);
        x.at(i, t, k) = keep;
        const double fd = (up - down) / (2 * h);
        norms[t] += fd * fd;
      }
      norms[t] = std::sqrt(norms[t]);
      total += norms[t];
    }
    for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(s.scores.at(i, t), norms[t] / total, 1e-6);
  }
  for (const Parameter* p : model.params().all()) EXPECT_FALSE(p->grad_ready) << p->name;
}
