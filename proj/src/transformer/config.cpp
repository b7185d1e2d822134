#include "tokenmixup/transformer/config.hpp"

#include <cmath>
#include <string>

namespace tkmx::inline TKMX_ABI {

std::size_t ModelConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::lround(static_cast<double>(dim) * mlp_ratio));
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (image_size == 0 || patch_size == 0 || channels == 0) fail("image_size, patch_size and channels must be positive");
  if (image_size % patch_size != 0) {
    fail("image_size " + std::to_string(image_size) + " is not divisible by patch_size " + std::to_string(patch_size));
  }
  if (heads == 0 || dim == 0 || dim % heads != 0) {
    fail("dim " + std::to_string(dim) + " must be a positive multiple of heads " + std::to_string(heads));
  }
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (!(mlp_ratio > 0.0) || mlp_hidden() == 0) fail("mlp_ratio must be positive");
  if (htm_layer) {
    if (*htm_layer < 1 || *htm_layer > depth) fail("htm_layer must lie in [1, depth]");
    if (num_tokens() < 2) fail("token mixing needs at least 2 tokens per instance");
    if (*htm_layer + ell > depth) fail("htm_layer + ell exceeds depth (rollout needs layers up to htm_layer + ell)");
  }
  if (vtm_layer) {
    if (*vtm_layer < 2 || *vtm_layer > depth) fail("vtm_layer must lie in [2, depth]");
    if (kappa < 1 || kappa > num_tokens()) fail("kappa must lie in [1, n]");
  }
  if (!(tau >= 0.0)) fail("tau must be >= 0");
  if (!(rho >= 0.0)) fail("rho must be >= 0");
  if (!(score_loss_weight >= 0.0)) fail("score_loss_weight must be >= 0");
  if (!(ln_eps > 0.0)) fail("ln_eps must be positive");
}

}  // namespace tkmx::inline TKMX_ABI
