#include "tokenmixup/vtm/vtm.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "tokenmixup/numerics/ops.hpp"

namespace tkmx::inline TKMX_ABI {

std::vector<std::size_t> previous_layers(std::size_t hook_layer) {
  if (hook_layer < 2) {
    throw ConfigError("vertical mixing at layer " + std::to_string(hook_layer) + " has no previous layers");
  }
  std::vector<std::size_t> layers(hook_layer - 1);
  std::iota(layers.begin(), layers.end(), std::size_t{1});
  return layers;
}

std::vector<std::size_t> topk_indices(std::span<const Scalar> scores, std::size_t kappa) {
  const std::size_t n = scores.size();
  if (kappa < 1 || kappa > n) {
    throw ConfigError("kappa = " + std::to_string(kappa) + " must lie in [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(kappa);
  std::sort(order.begin(), order.end());
  return order;
}

PooledEntry select_topk(Var x_l, const SaliencyMap& s_l, std::size_t kappa, bool keep_grad) {
  if (x_l.value().rank() != 3 || x_l.dim(0) != s_l.batch() || x_l.dim(1) != s_l.tokens()) {
    throw ShapeError("select_topk: tokens " + dims_to_string(x_l.dims()) + " do not match saliency " +
                     dims_to_string(s_l.scores.dims()));
  }
  const std::size_t b = x_l.dim(0), n = x_l.dim(1), d = x_l.dim(2);
  PooledEntry entry;
  std::vector<std::size_t> flat;
  flat.reserve(b * kappa);
  for (std::size_t i = 0; i < b; ++i) {
    entry.indices.push_back(topk_indices(s_l.row(i), kappa));
    for (std::size_t t : entry.indices.back()) flat.push_back(i * n + t);
  }
  Var picked = reshape(gather0(reshape(x_l, {b * n, d}), flat), {b, kappa, d});
  entry.tokens = keep_grad ? picked : stop_gradient(picked);
  return entry;
}

Var build_extended_tokens(Var x, const PooledTokens& pooled) {
  std::vector<Var> parts{x};
  for (const auto& e : pooled.entries) {
    if (e.tokens.value().rank() != 3 || e.tokens.dim(0) != x.dim(0) || e.tokens.dim(2) != x.dim(2)) {
      throw ShapeError("build_extended_tokens: pooled tokens from layer " + std::to_string(e.layer) + " are " +
                       dims_to_string(e.tokens.dims()) + ", queries are " + dims_to_string(x.dims()));
    }
    parts.push_back(e.tokens);
  }
  return concat(parts, 1);
}

PooledTokens pool_previous_layers(const ForwardTrace& trace, std::size_t hook_layer, std::size_t kappa,
                                  bool keep_grad) {
  PooledTokens pooled;
  for (std::size_t l : previous_layers(hook_layer)) {
    if (trace.executed.size() < l || trace.attention.size() < l) {
      throw UsageError("vertical mixing needs the trace of layer " + std::to_string(l));
    }
    const SaliencyMap s = token_saliency(trace.attention[l - 1].phi);
    PooledEntry e = select_topk(trace.executed[l - 1], s, kappa, keep_grad);
    e.layer = l;
    pooled.entries.push_back(std::move(e));
  }
  return pooled;
}

LayerHook make_vtm_hook(const ModelConfig& cfg, const std::vector<Tensor>* frozen, std::vector<Tensor>* record) {
  LayerHook hook;
  const std::size_t kappa = cfg.kappa;
  const bool keep_grad = cfg.vtm_pool_grad;
  hook.key_value = [=](std::size_t layer, Var x, ForwardTrace& trace) -> Var {
    PooledTokens pooled;
    if (frozen) {
      for (std::size_t l = 0; l < frozen->size(); ++l) {
        pooled.entries.push_back({l + 1, {}, x.graph().constant((*frozen)[l])});
      }
    } else {
      pooled = pool_previous_layers(trace, layer, kappa, keep_grad);
    }
    if (record) {
      record->clear();
      for (const auto& e : pooled.entries) record->push_back(e.tokens.value());
    }
    return build_extended_tokens(x, pooled);
  };
  return hook;
}

Var vertical_token_mixup(TransformerModel& model, Graph& g, const ForwardTrace& trace, Var x) {
  const ModelConfig& cfg = model.config();
  const std::size_t layer = trace.executed.size() + 1;
  PooledTokens pooled = pool_previous_layers(trace, layer, cfg.kappa, cfg.vtm_pool_grad);
  return model.block(g, layer, x, build_extended_tokens(x, pooled), nullptr);
}

}  // namespace tkmx::inline TKMX_ABI
