#pragma once

#include <cstddef>
#include <span>

#include "tokenmixup/numerics/rng.hpp"
#include "tokenmixup/transformer/model.hpp"

namespace tkmx::inline TKMX_ABI {

enum class SaliencySource { kAttentionRollout, kGradient, kRandom };

/// Per-instance token scores (b, n); nonnegative, each row sums to 1.
struct SaliencyMap {
  Tensor scores;
  SaliencySource source = SaliencySource::kAttentionRollout;

  std::size_t batch() const { return scores.dim(0); }
  std::size_t tokens() const { return scores.dim(1); }
  std::span<const Scalar> row(std::size_t i) const {
    return scores.data().subspan(i * tokens(), tokens());
  }
};

/// Product of consecutive head-averaged maps, per batch element:
/// A = phi(i) * phi(i+1) * ... * phi(i+ell). A single record is returned as is.
Tensor attention_rollout(std::span<const AttentionRecord> records);

/// Column means of a row-stochastic (b, n, n) rollout: S_t = (1/n) sum_i A[i, t].
SaliencyMap token_saliency(const Tensor& rollout);

/// Scales each row of nonnegative raw scores to sum 1; all-zero rows become uniform.
SaliencyMap normalize_saliency(Tensor raw, SaliencySource source);

/// i.i.d. uniform scores, normalized.
SaliencyMap random_saliency(std::size_t batch, std::size_t tokens, CounterRng& rng);

/// Token-space gradient saliency at `layer`: one forward from the layer's
/// input tokens to the loss and one backward, score = L2 norm of dLoss/dToken
/// over d, normalized per instance. Parameters receive no gradient.
SaliencyMap gradient_saliency_from_tokens(TransformerModel& model, const Tensor& tokens, const Tensor& labels,
                                          std::size_t layer);
SaliencyMap gradient_saliency(TransformerModel& model, const Tensor& images, const Tensor& labels, std::size_t layer);

/// Attention-based saliency of the tokens entering `layer` (ell-step rollout).
SaliencyMap attention_saliency(TransformerModel& model, const Tensor& tokens, std::size_t layer, std::size_t ell);

enum class TvNorm { kL1, kL2 };

/// Total variation of one map laid out as an (h, w) grid; neighbours beyond
/// the grid are skipped.
double total_variation(std::span<const Scalar> map, std::size_t h, std::size_t w, TvNorm norm);

/// Population variance of each instance's n scores, (b).
Tensor saliency_variance(const SaliencyMap& s);

}  // namespace tkmx::inline TKMX_ABI
