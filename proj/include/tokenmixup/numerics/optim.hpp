#pragma once

#include <span>

#include "tokenmixup/numerics/graph.hpp"

namespace tkmx::inline TKMX_ABI {

/// Heavy-ball SGD: v <- momentum * v + grad; p <- p - lr * v; grads zeroed.
/// Throws UsageError if any parameter has no gradient from a backward pass.
void sgd_step(std::span<Parameter* const> params, Scalar lr, Scalar momentum);

}  // namespace tkmx::inline TKMX_ABI
