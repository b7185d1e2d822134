#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tokenmixup/htm/assignment.hpp"
#include "tokenmixup/numerics/ops.hpp"
#include "tokenmixup/scorenet/scorenet.hpp"

namespace tkmx::inline TKMX_ABI {

/// Rows follow the easy selection: 0 = replace token, 1 = keep.
struct MixMask {
  Tensor m;
};

struct MixReport {
  std::size_t num_mixed = 0;                // samples selected for mixing
  std::vector<std::size_t> tokens_replaced;  // per selected sample
  double realized_gain = 0.0;

  std::size_t total_tokens_replaced() const;
  double mean_tokens_replaced() const;
  bool operator==(const MixReport&) const = default;
};

/// Everything needed to replay one batch's mixing: who is mixed, with whom,
/// which tokens, and the resulting labels.
struct MixPlan {
  EasySelection easy;
  MatchPlan match;
  MixMask mask;                      // (b', n)
  std::vector<double> keep_weight;   // w_keep per selected sample
  Tensor labels;                     // (b, c) after relabeling
  MixReport report;

  bool active() const { return !easy.empty(); }
  /// Source row for every batch position (itself when not mixed).
  std::vector<std::size_t> source_rows(std::size_t batch) const;
  /// Full-batch keep mask (b, n); rows of unmixed samples are all ones.
  Tensor full_mask(std::size_t batch, std::size_t tokens) const;
};

/// m_t = 0 iff s_src[t] - s_easy[t] > rho.
Tensor mix_mask(std::span<const Scalar> s_easy, std::span<const Scalar> s_src, double rho);

/// m * x_easy + (1 - m) * x_src with m broadcast over d.
Tensor mix_tokens(const Tensor& x_easy, const Tensor& x_src, const Tensor& m);

/// Saliency-weighted label mix; returns y_easy unchanged when no saliency
/// mass is involved.
Tensor relabel(const Tensor& y_easy, const Tensor& y_src, std::span<const Scalar> s_easy,
               std::span<const Scalar> s_src, const Tensor& m);
double keep_weight(std::span<const Scalar> s_easy, std::span<const Scalar> s_src, const Tensor& m);

/// Matching, masks and labels for the given selection. Saliency and labels
/// describe the batch before mixing.
MixPlan plan_token_mixup(const SaliencyMap& s, const EasySelection& easy, const Tensor& labels, double rho);

/// Applies a plan to token values (b, n, d). Sources are read from x itself,
/// i.e. from the pre-mix batch.
Tensor apply_mix(const Tensor& x, const MixPlan& plan);

/// Graph version: gradient reaches both the kept and the inserted tokens;
/// the mask is a constant. Returns x itself when the plan is inactive.
Var apply_mix(Var x, const MixPlan& plan);

struct MixResult {
  Tensor tokens;
  Tensor labels;
  MixReport report;
  MixPlan plan;
};

/// select_easy(tau) -> gain -> Hungarian -> mask, mix and relabel.
MixResult token_mixup(const Tensor& x, const Tensor& y, const SaliencyMap& s, const DifficultyVector& u, double tau,
                      double rho);

/// Each sample is picked independently with probability k / b in place of
/// ScoreNet gating.
EasySelection random_selection(std::size_t batch, double k, CounterRng& rng);
MixResult random_sample_baseline(const Tensor& x, const Tensor& y, const SaliencyMap& s, double rho, double k,
                                 CounterRng& rng);

/// Random injective pairing and `per_pair_count` uniformly chosen tokens per
/// selected sample; labels mix in proportion to the replaced count.
MixPlan plan_random_token(std::size_t batch, std::size_t tokens, const EasySelection& easy, const Tensor& labels,
                          std::size_t per_pair_count, CounterRng& rng);
MixResult random_token_baseline(const Tensor& x, const Tensor& y, const EasySelection& easy,
                                std::size_t per_pair_count, CounterRng& rng);

/// Mean number of tokens whose gain exceeds rho over random pairs, rounded;
/// sizes the random-token baseline.
std::size_t mean_salient_token_count(const SaliencyMap& s, double rho, CounterRng& rng, std::size_t pairs = 64);

}  // namespace tkmx::inline TKMX_ABI
