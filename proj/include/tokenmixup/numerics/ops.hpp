#pragma once

#include <cstddef>
#include <vector>

#include "tokenmixup/numerics/graph.hpp"

namespace tkmx::inline TKMX_ABI {

// Differentiable ops. All inputs must belong to the same Graph; results are
// recorded into it.

/// (..., m, k) x (..., k, p). Leading dims must match exactly, or one side
/// must be a plain matrix that broadcasts over the other's leading dims.
Var matmul(Var a, Var b);
Var transpose_last2(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, Scalar factor);
/// x + y where y's dims equal the trailing dims of x (bias, positional table).
Var add_broadcast(Var x, Var y);

Var gelu(Var x);
Var softmax_rows(Var x);
Var layer_norm(Var x, Var gamma, Var beta, Scalar eps);
/// Per-row -sum(target * log_softmax(logits)); logits (b, c), targets (b, c).
Var cross_entropy(Var logits, const Tensor& targets);

Var sum(Var x);
Var mean(Var x);
/// Mean over one axis, which is removed from the result.
Var mean_axis(Var x, std::size_t axis);

Var reshape(Var x, Dims dims);
Var permute(Var x, const std::vector<std::size_t>& order);
Var concat(const std::vector<Var>& parts, std::size_t axis);
/// out[i] = x[index[i]] along axis 0; gradients scatter-add back.
Var gather0(Var x, const std::vector<std::size_t>& index);
/// mask (B, n) broadcast over the trailing axis of a, b (B, n, d):
/// mask * a + (1 - mask) * b. The mask is a constant.
Var blend(Var a, Var b, const Tensor& mask);

/// Value-identical copy with no path back to x.
Var stop_gradient(Var x);

// Plain (non-recording) kernels shared with code that works on raw tensors.
namespace kernels {
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& x);
Tensor transpose_last2(const Tensor& x);
}  // namespace kernels

}  // namespace tkmx::inline TKMX_ABI
