#pragma once

#include <cstddef>
#include <vector>

#include "tokenmixup/numerics/graph.hpp"
#include "tokenmixup/numerics/rng.hpp"

namespace tkmx::inline TKMX_ABI {

/// Per-sample ScoreNet cross-entropy, shape (b).
struct DifficultyVector {
  Tensor u;
};

/// Batch positions whose difficulty is strictly below tau, ascending.
struct EasySelection {
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

/// Small auxiliary classifier on stop-gradient intermediate tokens:
/// mean over tokens -> Linear(d, d) -> GELU -> Linear(d, c).
class ScoreNet {
 public:
  ScoreNet(ParameterStore& store, std::size_t dim, std::size_t num_classes, CounterRng& init_rng);

  /// Logits (b, c). The tokens enter the graph as a constant, so nothing
  /// upstream of them receives gradient from this branch.
  Var forward(Graph& g, const Tensor& tokens);
  Var forward(Graph& g, Var tokens);

  /// Per-sample CE as a graph node (b).
  Var difficulty_node(Graph& g, const Tensor& tokens, const Tensor& labels);
  /// Stop-gradient evaluation of the per-sample difficulty.
  DifficultyVector difficulty(const Tensor& tokens, const Tensor& labels);
  /// Mean difficulty, a scalar that only reaches ScoreNet parameters.
  Var aux_loss(Graph& g, const Tensor& tokens, const Tensor& labels);

  void zero_head();

 private:
  Parameter* fc1_w_;
  Parameter* fc1_b_;
  Parameter* fc2_w_;
  Parameter* fc2_b_;
};

/// Strict comparison u < tau.
EasySelection select_easy(const DifficultyVector& u, double tau);

}  // namespace tkmx::inline TKMX_ABI
