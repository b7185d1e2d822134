#pragma once

#include <cstddef>
#include <optional>

#include "tokenmixup/common.hpp"

namespace tkmx::inline TKMX_ABI {

struct ModelConfig {
  std::size_t image_size = 16;
  std::size_t patch_size = 4;
  std::size_t channels = 1;
  std::size_t depth = 4;
  std::size_t heads = 4;
  std::size_t dim = 64;
  double mlp_ratio = 2.0;
  std::size_t num_classes = 4;

  // Layers are 1-based. HTM rewrites the input of htm_layer; VTM widens the
  // key/value set of vtm_layer.
  std::optional<std::size_t> htm_layer = 2;
  std::optional<std::size_t> vtm_layer = 3;

  double tau = 0.2;    // difficulty threshold: mix only when ScoreNet CE < tau
  double rho = 0.005;  // minimum per-token saliency gain for a replacement
  std::size_t kappa = 5;  // tokens pooled per previous layer by VTM
  std::size_t ell = 0;    // extra attention-rollout layers for HTM saliency
  double score_loss_weight = 1.0;
  /// Lets gradients reach earlier layers through VTM's pooled tokens.
  bool vtm_pool_grad = false;
  double ln_eps = 1e-5;

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_tokens() const { return grid() * grid(); }
  std::size_t patch_dim() const { return channels * patch_size * patch_size; }
  std::size_t head_dim() const { return dim / heads; }
  std::size_t mlp_hidden() const;

  /// Throws ConfigError on any inconsistent field.
  void validate() const;
};

}  // namespace tkmx::inline TKMX_ABI
