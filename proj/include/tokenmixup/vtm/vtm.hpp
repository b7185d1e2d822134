#pragma once

#include <cstddef>
#include <vector>

#include "tokenmixup/saliency/saliency.hpp"

namespace tkmx::inline TKMX_ABI {

/// Tokens pooled from one earlier layer.
struct PooledEntry {
  std::size_t layer = 0;
  std::vector<std::vector<std::size_t>> indices;  // per instance, ascending
  Var tokens;                                     // (b, kappa, d)
};

struct PooledTokens {
  std::vector<PooledEntry> entries;  // ascending layer order
};

/// [1, ..., hook_layer - 1]; ConfigError when hook_layer < 2.
std::vector<std::size_t> previous_layers(std::size_t hook_layer);

/// Indices of the kappa largest scores in one row, ties to the lower index,
/// returned in ascending index order. ConfigError unless 1 <= kappa <= n.
std::vector<std::size_t> topk_indices(std::span<const Scalar> scores, std::size_t kappa);

/// Gathers each instance's top-kappa tokens of x_l (b, n, d). The result is a
/// stop-gradient copy unless `keep_grad` is set.
PooledEntry select_topk(Var x_l, const SaliencyMap& s_l, std::size_t kappa, bool keep_grad = false);

/// [x ; pooled(l_1) ; ... ] along the token axis: (b, n + kappa |L|, d).
Var build_extended_tokens(Var x, const PooledTokens& pooled);

/// Pools from every layer before `hook_layer` of a trace that has already run
/// those layers, scoring each with its own executed attention map.
PooledTokens pool_previous_layers(const ForwardTrace& trace, std::size_t hook_layer, std::size_t kappa,
                                  bool keep_grad);

/// Key/value hook realising vertical mixing at cfg.vtm_layer. When `frozen`
/// is non-null its pooled values are reused (as constants) instead of being
/// recomputed, and when `record` is non-null the pooled set is stored there.
LayerHook make_vtm_hook(const ModelConfig& cfg, const std::vector<Tensor>* frozen = nullptr,
                        std::vector<Tensor>* record = nullptr);

/// Layer output with queries x and key/values [x ; pooled], (b, n, d).
Var vertical_token_mixup(TransformerModel& model, Graph& g, const ForwardTrace& trace, Var x);

}  // namespace tkmx::inline TKMX_ABI
