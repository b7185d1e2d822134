#pragma once

#include <cstddef>
#include <vector>

#include "tokenmixup/saliency/saliency.hpp"

namespace tkmx::inline TKMX_ABI {

/// C[i, j] = sum_t max(S_j[t] - S~_i[t] - rho, 0): rows are easy samples,
/// columns are all batch samples.
struct GainMatrix {
  Tensor c;

  std::size_t rows() const { return c.empty() ? 0 : c.dim(0); }
  std::size_t cols() const { return c.empty() ? 0 : c.dim(1); }
  double at(std::size_t i, std::size_t j) const { return static_cast<double>(c.at(i, j)); }
};

/// Injective assignment of each easy row i to a source column sigma[i].
struct MatchPlan {
  std::vector<std::size_t> sigma;
  double realized_gain = 0.0;
};

/// s_easy (b', n) against s_all (b, n).
GainMatrix pairwise_gain(const Tensor& s_easy, const Tensor& s_all, double rho);
GainMatrix pairwise_gain(const SaliencyMap& s_all, const std::vector<std::size_t>& easy, double rho);

/// Exact maximum-gain assignment via the Hungarian method. Among optimal
/// assignments the lexicographically smallest sigma is returned. Throws
/// UsageError when there are more rows than columns.
MatchPlan hungarian_match(const GainMatrix& gain);

/// Exhaustive search with the same tie rule; test oracle, b <= 8.
MatchPlan brute_force_match(const GainMatrix& gain);

/// Two gains are treated as tied when they differ by at most this much.
double gain_tie_tolerance(double best);

namespace detail {
/// Minimum-cost perfect assignment of a square cost matrix (row-major,
/// size n*n). Returns the column chosen for each row.
std::vector<std::size_t> solve_min_cost_assignment(const std::vector<double>& cost, std::size_t n);
}  // namespace detail

}  // namespace tkmx::inline TKMX_ABI
