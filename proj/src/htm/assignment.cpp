#include "tokenmixup/htm/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace tkmx::inline TKMX_ABI {

GainMatrix pairwise_gain(const Tensor& s_easy, const Tensor& s_all, double rho) {
  if (!(rho >= 0.0)) throw UsageError("pairwise_gain: rho must be >= 0");
  if (s_easy.rank() != 2 || s_all.rank() != 2 || s_easy.dim(1) != s_all.dim(1)) {
    throw ShapeError("pairwise_gain: saliency maps " + dims_to_string(s_easy.dims()) + " and " +
                     dims_to_string(s_all.dims()) + " must share n");
  }
  const std::size_t rows = s_easy.dim(0), cols = s_all.dim(0), n = s_all.dim(1);
  GainMatrix g{Tensor({rows, cols})};
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      double total = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double diff = static_cast<double>(s_all.at(j, t)) - static_cast<double>(s_easy.at(i, t));
        total += std::max(diff - rho, 0.0);
      }
      g.c.at(i, j) = static_cast<Scalar>(total);
    }
  return g;
}

GainMatrix pairwise_gain(const SaliencyMap& s_all, const std::vector<std::size_t>& easy, double rho) {
  if (easy.empty()) return GainMatrix{};
  Tensor s_easy({easy.size(), s_all.tokens()});
  for (std::size_t i = 0; i < easy.size(); ++i) s_easy.set_slice0(i, s_all.scores.slice0(easy[i]));
  return pairwise_gain(s_easy, s_all.scores, rho);
}

double gain_tie_tolerance(double best) { return 1e-9 * std::max(1.0, std::abs(best)); }

namespace detail {

std::vector<std::size_t> solve_min_cost_assignment(const std::vector<double>& cost, std::size_t n) {
  // Shortest augmenting path Hungarian method with potentials, O(n^3).
  // Arrays are 1-based; index 0 is the virtual source column.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

}  // namespace detail

namespace {

// Best total gain for rows [first, rows) over the columns not in `taken`.
// Rows are padded with zero-gain rows to a square problem.
double best_remaining_gain(const GainMatrix& gain, std::size_t first, const std::vector<char>& taken) {
  const std::size_t rows = gain.rows();
  if (first >= rows) return 0.0;
  std::vector<std::size_t> free_cols;
  for (std::size_t j = 0; j < gain.cols(); ++j)
    if (!taken[j]) free_cols.push_back(j);
  const std::size_t n = free_cols.size();
  std::vector<double> cost(n * n, 0.0);
  for (std::size_t i = first; i < rows; ++i)
    for (std::size_t k = 0; k < n; ++k) cost[(i - first) * n + k] = -gain.at(i, free_cols[k]);
  const auto assign = detail::solve_min_cost_assignment(cost, n);
  double total = 0.0;
  for (std::size_t i = first; i < rows; ++i) total += gain.at(i, free_cols[assign[i - first]]);
  return total;
}

double sum_gain(const GainMatrix& gain, const std::vector<std::size_t>& sigma) {
  double total = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) total += gain.at(i, sigma[i]);
  return total;
}

}  // namespace

MatchPlan hungarian_match(const GainMatrix& gain) {
  const std::size_t rows = gain.rows(), cols = gain.cols();
  if (rows > cols) {
    throw UsageError("hungarian_match: " + std::to_string(rows) + " easy rows exceed " + std::to_string(cols) +
                     " candidate sources");
  }
  MatchPlan plan;
  if (rows == 0) return plan;

  std::vector<char> taken(cols, 0);
  const double best = best_remaining_gain(gain, 0, taken);
  const double tol = gain_tie_tolerance(best);

  // Fix rows one at a time to the smallest column that still admits an
  // optimal completion.
  double fixed = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    bool placed = false;
    for (std::size_t j = 0; j < cols && !placed; ++j) {
      if (taken[j]) continue;
      taken[j] = 1;
      const double candidate = fixed + gain.at(i, j) + best_remaining_gain(gain, i + 1, taken);
      if (candidate >= best - tol) {
        plan.sigma.push_back(j);
        fixed += gain.at(i, j);
        placed = true;
      } else {
        taken[j] = 0;
      }
    }
    if (!placed) throw NumericError("hungarian_match: failed to reconstruct an optimal assignment");
  }
  plan.realized_gain = sum_gain(gain, plan.sigma);
  return plan;
}

MatchPlan brute_force_match(const GainMatrix& gain) {
  const std::size_t rows = gain.rows(), cols = gain.cols();
  if (cols > 8) throw UsageError("brute_force_match supports at most 8 columns, got " + std::to_string(cols));
  if (rows > cols) throw UsageError("brute_force_match: more rows than columns");
  MatchPlan plan;
  if (rows == 0) return plan;

  // Every injective map in lexicographic order.
  std::vector<std::vector<std::size_t>> all;
  std::vector<std::size_t> current;
  std::vector<char> taken(cols, 0);
  auto recurse = [&](auto&& self, std::size_t row) -> void {
    if (row == rows) {
      all.push_back(current);
      return;
    }
    for (std::size_t j = 0; j < cols; ++j) {
      if (taken[j]) continue;
      taken[j] = 1;
      current.push_back(j);
      self(self, row + 1);
      current.pop_back();
      taken[j] = 0;
    }
  };
  recurse(recurse, 0);

  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : all) best = std::max(best, sum_gain(gain, s));
  const double tol = gain_tie_tolerance(best);
  for (const auto& s : all) {
    if (sum_gain(gain, s) >= best - tol) {
      plan.sigma = s;
      break;
    }
  }
  plan.realized_gain = sum_gain(gain, plan.sigma);
  return plan;
}

}  // namespace tkmx::inline TKMX_ABI
