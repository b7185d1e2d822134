#include "tokenmixup/numerics/optim.hpp"

namespace tkmx::inline TKMX_ABI {

void sgd_step(std::span<Parameter* const> params, Scalar lr, Scalar momentum) {
  for (const Parameter* p : params) {
    if (!p->grad_ready) throw UsageError("sgd_step: parameter '" + p->name + "' has no gradient");
  }
  for (Parameter* p : params) {
    auto& v = p->velocity.storage();
    auto& w = p->value.storage();
    const auto& g = p->grad.storage();
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum * v[i] + g[i];
      w[i] -= lr * v[i];
    }
    p->zero_grad();
  }
}

}  // namespace tkmx::inline TKMX_ABI
