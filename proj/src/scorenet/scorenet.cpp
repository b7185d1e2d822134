#include "tokenmixup/scorenet/scorenet.hpp"

#include "tokenmixup/numerics/ops.hpp"

namespace tkmx::inline TKMX_ABI {

namespace {

Tensor truncated_normal(Dims dims, double std, CounterRng& rng) {
  Tensor t(std::move(dims));
  for (auto& v : t.storage()) v = static_cast<Scalar>(std * rng.truncated_normal());
  return t;
}

}  // namespace

ScoreNet::ScoreNet(ParameterStore& store, std::size_t dim, std::size_t num_classes, CounterRng& init_rng) {
  fc1_w_ = &store.add("scorenet.fc1.w", truncated_normal({dim, dim}, 0.02, init_rng));
  fc1_b_ = &store.add("scorenet.fc1.b", Tensor({dim}));
  fc2_w_ = &store.add("scorenet.fc2.w", truncated_normal({dim, num_classes}, 0.02, init_rng));
  fc2_b_ = &store.add("scorenet.fc2.b", Tensor({num_classes}));
}

Var ScoreNet::forward(Graph& g, const Tensor& tokens) {
  if (tokens.rank() != 3) throw ShapeError("ScoreNet expects (b, n, d) tokens, got " + dims_to_string(tokens.dims()));
  return forward(g, g.constant(tokens));
}

Var ScoreNet::forward(Graph& g, Var tokens) {
  Var x = stop_gradient(tokens);
  Var pooled = mean_axis(x, 1);
  Var h = gelu(add_broadcast(matmul(pooled, g.param(*fc1_w_)), g.param(*fc1_b_)));
  return add_broadcast(matmul(h, g.param(*fc2_w_)), g.param(*fc2_b_));
}

Var ScoreNet::difficulty_node(Graph& g, const Tensor& tokens, const Tensor& labels) {
  return cross_entropy(forward(g, tokens), labels);
}

DifficultyVector ScoreNet::difficulty(const Tensor& tokens, const Tensor& labels) {
  Graph g(false);
  return {difficulty_node(g, tokens, labels).value()};
}

Var ScoreNet::aux_loss(Graph& g, const Tensor& tokens, const Tensor& labels) {
  return mean(difficulty_node(g, tokens, labels));
}

void ScoreNet::zero_head() {
  fc2_w_->value.fill(Scalar(0));
  fc2_b_->value.fill(Scalar(0));
}

EasySelection select_easy(const DifficultyVector& u, double tau) {
  if (!(tau >= 0.0)) throw UsageError("select_easy: tau must be >= 0");
  EasySelection sel;
  for (std::size_t i = 0; i < u.u.size(); ++i) {
    if (static_cast<double>(u.u[i]) < tau) sel.indices.push_back(i);
  }
  return sel;
}

}  // namespace tkmx::inline TKMX_ABI
