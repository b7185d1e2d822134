#include "tokenmixup/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace tkmx::inline TKMX_ABI {

namespace {

using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap cmap(const Scalar* p, std::size_t r, std::size_t c) {
  return ConstMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MutMap mmap(Scalar* p, std::size_t r, std::size_t c) {
  return MutMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + dims_to_string(a.dims()) + " vs " +
                     dims_to_string(b.dims()));
  }
}

void accumulate(Tensor& dst, const Tensor& src) {
  auto& d = dst.storage();
  const auto& s = src.storage();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// Describes how the leading (batch) dims of a matmul's operands line up.
struct MatmulPlan {
  std::size_t m, k, p;
  std::size_t batches;  // number of (m,k)x(k,p) products
  bool a_batched, b_batched;
  Dims out_dims;
};

MatmulPlan plan_matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError("matmul needs rank >= 2 operands, got " + dims_to_string(a.dims()) + " and " +
                     dims_to_string(b.dims()));
  }
  MatmulPlan plan{};
  plan.m = a.dims()[a.rank() - 2];
  plan.k = a.dims()[a.rank() - 1];
  plan.p = b.dims()[b.rank() - 1];
  if (b.dims()[b.rank() - 2] != plan.k) {
    throw ShapeError("matmul inner dims disagree: " + dims_to_string(a.dims()) + " x " +
                     dims_to_string(b.dims()));
  }
  Dims lead_a(a.dims().begin(), a.dims().end() - 2);
  Dims lead_b(b.dims().begin(), b.dims().end() - 2);
  plan.a_batched = !lead_a.empty();
  plan.b_batched = !lead_b.empty();
  if (plan.a_batched && plan.b_batched && lead_a != lead_b) {
    throw ShapeError("matmul batch dims not broadcastable: " + dims_to_string(a.dims()) + " x " +
                     dims_to_string(b.dims()));
  }
  const Dims& lead = plan.a_batched ? lead_a : lead_b;
  plan.batches = dims_product(lead);
  plan.out_dims = lead;
  plan.out_dims.push_back(plan.m);
  plan.out_dims.push_back(plan.p);
  return plan;
}

}  // namespace

namespace kernels {

Tensor matmul(const Tensor& a, const Tensor& b) {
  const MatmulPlan plan = plan_matmul(a, b);
  Tensor out(plan.out_dims);
  if (!plan.b_batched) {
    // Fold a's leading dims into rows: one GEMM.
    const std::size_t rows = plan.batches * plan.m;
    mmap(out.storage().data(), rows, plan.p).noalias() =
        cmap(a.storage().data(), rows, plan.k) * cmap(b.storage().data(), plan.k, plan.p);
    return out;
  }
  for (std::size_t i = 0; i < plan.batches; ++i) {
    const Scalar* pa = a.storage().data() + (plan.a_batched ? i * plan.m * plan.k : 0);
    const Scalar* pb = b.storage().data() + i * plan.k * plan.p;
    mmap(out.storage().data() + i * plan.m * plan.p, plan.m, plan.p).noalias() =
        cmap(pa, plan.m, plan.k) * cmap(pb, plan.k, plan.p);
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() < 1) throw ShapeError("softmax_rows needs rank >= 1");
  const std::size_t n = x.dims().back();
  const std::size_t rows = x.size() / n;
  Tensor out(x.dims());
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* in = x.storage().data() + r * n;
    Scalar* o = out.storage().data() + r * n;
    Scalar mx = in[0];
    for (std::size_t j = 0; j < n; ++j) {
      if (std::isnan(in[j])) throw NumericError("softmax_rows: NaN input");
      mx = std::max(mx, in[j]);
    }
    Scalar total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= total;
  }
  return out;
}

Tensor transpose_last2(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("transpose_last2 needs rank >= 2");
  const std::size_t r = x.dims()[x.rank() - 2];
  const std::size_t c = x.dims()[x.rank() - 1];
  const std::size_t batches = x.size() / (r * c);
  Dims dims = x.dims();
  std::swap(dims[dims.size() - 1], dims[dims.size() - 2]);
  Tensor out(dims);
  for (std::size_t b = 0; b < batches; ++b) {
    const Scalar* in = x.storage().data() + b * r * c;
    Scalar* o = out.storage().data() + b * r * c;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) o[j * r + i] = in[i * c + j];
  }
  return out;
}

}  // namespace kernels

Var matmul(Var a, Var b) {
  Graph& g = a.graph();
  const MatmulPlan plan = plan_matmul(a.value(), b.value());
  return g.record("matmul", kernels::matmul(a.value(), b.value()), {a, b}, [plan](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    const std::size_t ia = node.inputs[0], ib = node.inputs[1];
    const Tensor& go = node.grad;
    const Tensor& va = g.node(ia).value;
    const Tensor& vb = g.node(ib).value;
    if (!plan.b_batched) {
      const std::size_t rows = plan.batches * plan.m;
      if (g.needs_grad(ia)) {
        mmap(g.grad_buffer(ia).storage().data(), rows, plan.k).noalias() +=
            cmap(go.storage().data(), rows, plan.p) * cmap(vb.storage().data(), plan.k, plan.p).transpose();
      }
      if (g.needs_grad(ib)) {
        mmap(g.grad_buffer(ib).storage().data(), plan.k, plan.p).noalias() +=
            cmap(va.storage().data(), rows, plan.k).transpose() * cmap(go.storage().data(), rows, plan.p);
      }
      return;
    }
    for (std::size_t i = 0; i < plan.batches; ++i) {
      const std::size_t off_a = plan.a_batched ? i * plan.m * plan.k : 0;
      const std::size_t off_b = i * plan.k * plan.p;
      const Scalar* pgo = go.storage().data() + i * plan.m * plan.p;
      if (g.needs_grad(ia)) {
        mmap(g.grad_buffer(ia).storage().data() + off_a, plan.m, plan.k).noalias() +=
            cmap(pgo, plan.m, plan.p) * cmap(vb.storage().data() + off_b, plan.k, plan.p).transpose();
      }
      if (g.needs_grad(ib)) {
        mmap(g.grad_buffer(ib).storage().data() + off_b, plan.k, plan.p).noalias() +=
            cmap(va.storage().data() + off_a, plan.m, plan.k).transpose() * cmap(pgo, plan.m, plan.p);
      }
    }
  });
}

Var transpose_last2(Var x) {
  return x.graph().record("transpose", kernels::transpose_last2(x.value()), {x}, [](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    accumulate(g.grad_buffer(node.inputs[0]), kernels::transpose_last2(node.grad));
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  accumulate(out, b.value());
  return a.graph().record("add", std::move(out), {a, b}, [](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    for (auto in : node.inputs)
      if (g.needs_grad(in)) accumulate(g.grad_buffer(in), node.grad);
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.graph().record("sub", std::move(out), {a, b}, [](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    if (g.needs_grad(node.inputs[0])) accumulate(g.grad_buffer(node.inputs[0]), node.grad);
    if (g.needs_grad(node.inputs[1])) {
      auto& gb = g.grad_buffer(node.inputs[1]);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= node.grad[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.graph().record("mul", std::move(out), {a, b}, [](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    const std::size_t ia = node.inputs[0], ib = node.inputs[1];
    if (g.needs_grad(ia)) {
      auto& ga = g.grad_buffer(ia);
      const Tensor& vb = g.node(ib).value;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += node.grad[i] * vb[i];
    }
    if (g.needs_grad(ib)) {
      auto& gb = g.grad_buffer(ib);
      const Tensor& va = g.node(ia).value;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += node.grad[i] * va[i];
    }
  });
}

Var scale(Var x, Scalar factor) {
  Tensor out = x.value();
  for (auto& v : out.storage()) v *= factor;
  return x.graph().record("scale", std::move(out), {x}, [factor](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    auto& gx = g.grad_buffer(node.inputs[0]);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += node.grad[i] * factor;
  });
}

Var add_broadcast(Var x, Var y) {
  const Dims& dx = x.dims();
  const Dims& dy = y.dims();
  if (dy.size() > dx.size() || !std::equal(dy.begin(), dy.end(), dx.end() - static_cast<std::ptrdiff_t>(dy.size()))) {
    throw ShapeError("add_broadcast: " + dims_to_string(dy) + " is not a suffix of " + dims_to_string(dx));
  }
  const std::size_t inner = y.value().size();
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y.value()[i % inner];
  return x.graph().record("add_broadcast", std::move(out), {x, y}, [inner](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    if (g.needs_grad(node.inputs[0])) accumulate(g.grad_buffer(node.inputs[0]), node.grad);
    if (g.needs_grad(node.inputs[1])) {
      auto& gy = g.grad_buffer(node.inputs[1]);
      for (std::size_t i = 0; i < node.grad.size(); ++i) gy[i % inner] += node.grad[i];
    }
  });
}

Var gelu(Var x) {
  constexpr Scalar kInvSqrt2 = Scalar(0.70710678118654752440);
  constexpr Scalar kInvSqrt2Pi = Scalar(0.39894228040143267794);
  Tensor out = x.value();
  for (auto& v : out.storage()) v = Scalar(0.5) * v * (Scalar(1) + std::erf(v * kInvSqrt2));
  return x.graph().record("gelu", std::move(out), {x}, [](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    const Tensor& vx = g.node(node.inputs[0]).value;
    auto& gx = g.grad_buffer(node.inputs[0]);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const Scalar v = vx[i];
      const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(v * kInvSqrt2));
      const Scalar pdf = kInvSqrt2Pi * std::exp(Scalar(-0.5) * v * v);
      gx[i] += node.grad[i] * (cdf + v * pdf);
    }
  });
}

Var softmax_rows(Var x) {
  return x.graph().record("softmax", kernels::softmax_rows(x.value()), {x}, [](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    const Tensor& y = node.value;
    auto& gx = g.grad_buffer(node.inputs[0]);
    const std::size_t n = y.dims().back();
    for (std::size_t r = 0; r < y.size() / n; ++r) {
      const std::size_t off = r * n;
      Scalar dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += node.grad[off + j] * y[off + j];
      for (std::size_t j = 0; j < n; ++j) gx[off + j] += y[off + j] * (node.grad[off + j] - dot);
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, Scalar eps) {
  const std::size_t d = x.dims().back();
  if (gamma.dims() != Dims{d} || beta.dims() != Dims{d}) {
    throw ShapeError("layer_norm: gamma/beta must be (" + std::to_string(d) + ")");
  }
  const std::size_t rows = x.value().size() / d;
  Tensor out(x.dims());
  std::vector<Scalar> xhat(x.value().size());
  std::vector<Scalar> inv_std(rows);
  const Tensor& vx = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* in = vx.storage().data() + r * d;
    Scalar mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= Scalar(d);
    Scalar var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= Scalar(d);
    inv_std[r] = Scalar(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (in[j] - mu) * inv_std[r];
      out[r * d + j] = xhat[r * d + j] * gamma.value()[j] + beta.value()[j];
    }
  }
  return x.graph().record(
      "layer_norm", std::move(out), {x, gamma, beta},
      [d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, std::size_t self) {
        const auto& node = g.node(self);
        const std::size_t ix = node.inputs[0], ig = node.inputs[1], ib = node.inputs[2];
        const Tensor& go = node.grad;
        if (g.needs_grad(ig)) {
          auto& gg = g.grad_buffer(ig);
          for (std::size_t i = 0; i < go.size(); ++i) gg[i % d] += go[i] * xhat[i];
        }
        if (g.needs_grad(ib)) {
          auto& gb = g.grad_buffer(ib);
          for (std::size_t i = 0; i < go.size(); ++i) gb[i % d] += go[i];
        }
        if (g.needs_grad(ix)) {
          const Tensor& gamma_v = g.node(ig).value;
          auto& gx = g.grad_buffer(ix);
          std::vector<Scalar> dxhat(d);
          for (std::size_t r = 0; r < rows; ++r) {
            Scalar mean_d = 0, mean_dx = 0;
            for (std::size_t j = 0; j < d; ++j) {
              dxhat[j] = go[r * d + j] * gamma_v[j];
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * xhat[r * d + j];
            }
            mean_d /= Scalar(d);
            mean_dx /= Scalar(d);
            for (std::size_t j = 0; j < d; ++j) {
              gx[r * d + j] += inv_std[r] * (dxhat[j] - mean_d - xhat[r * d + j] * mean_dx);
            }
          }
        }
      });
}

Var cross_entropy(Var logits, const Tensor& targets) {
  const Tensor& z = logits.value();
  if (z.rank() != 2) throw ShapeError("cross_entropy: logits must be (b, c), got " + dims_to_string(z.dims()));
  if (!z.same_shape(targets)) {
    throw ShapeError("cross_entropy: logits " + dims_to_string(z.dims()) + " vs targets " +
                     dims_to_string(targets.dims()));
  }
  const std::size_t b = z.dim(0), c = z.dim(1);
  Tensor probs(z.dims());
  Tensor out({b});
  for (std::size_t i = 0; i < b; ++i) {
    const Scalar* row = z.storage().data() + i * c;
    Scalar mx = row[0];
    for (std::size_t j = 0; j < c; ++j) {
      if (std::isnan(row[j])) throw NumericError("cross_entropy: NaN logit");
      mx = std::max(mx, row[j]);
    }
    Scalar total = 0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(row[j] - mx);
    const Scalar log_total = std::log(total) + mx;
    Scalar loss = 0;
    for (std::size_t j = 0; j < c; ++j) {
      probs.at(i, j) = std::exp(row[j] - log_total);
      loss -= targets.at(i, j) * (row[j] - log_total);
    }
    out[i] = loss;
  }
  return logits.graph().record(
      "cross_entropy", std::move(out), {logits},
      [b, c, probs = std::move(probs), targets](Graph& g, std::size_t self) {
        const auto& node = g.node(self);
        auto& gz = g.grad_buffer(node.inputs[0]);
        for (std::size_t i = 0; i < b; ++i) {
          Scalar tsum = 0;
          for (std::size_t j = 0; j < c; ++j) tsum += targets.at(i, j);
          for (std::size_t j = 0; j < c; ++j) {
            gz.at(i, j) += node.grad[i] * (probs.at(i, j) * tsum - targets.at(i, j));
          }
        }
      });
}

Var sum(Var x) {
  Scalar total = 0;
  for (auto v : x.value().storage()) total += v;
  return x.graph().record("sum", Tensor::scalar(total), {x}, [](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    auto& gx = g.grad_buffer(node.inputs[0]);
    for (auto& v : gx.storage()) v += node.grad[0];
  });
}

Var mean(Var x) {
  const Scalar inv = Scalar(1) / Scalar(x.value().size());
  Scalar total = 0;
  for (auto v : x.value().storage()) total += v;
  return x.graph().record("mean", Tensor::scalar(total * inv), {x}, [inv](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    auto& gx = g.grad_buffer(node.inputs[0]);
    for (auto& v : gx.storage()) v += node.grad[0] * inv;
  });
}

Var mean_axis(Var x, std::size_t axis) {
  const Dims& dims = x.dims();
  if (axis >= dims.size()) throw ShapeError("mean_axis: axis out of range for " + dims_to_string(dims));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= dims[i];
  for (std::size_t i = axis + 1; i < dims.size(); ++i) inner *= dims[i];
  const std::size_t len = dims[axis];
  Dims out_dims;
  for (std::size_t i = 0; i < dims.size(); ++i)
    if (i != axis) out_dims.push_back(dims[i]);
  if (out_dims.empty()) out_dims = {1};
  Tensor out(out_dims);
  const Scalar inv = Scalar(1) / Scalar(len);
  const Tensor& v = x.value();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += v[(o * len + l) * inner + i];
  for (auto& e : out.storage()) e *= inv;
  return x.graph().record("mean_axis", std::move(out), {x}, [outer, inner, len, inv](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    auto& gx = g.grad_buffer(node.inputs[0]);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t i = 0; i < inner; ++i) gx[(o * len + l) * inner + i] += node.grad[o * inner + i] * inv;
  });
}

Var reshape(Var x, Dims dims) {
  Tensor out = x.value().reshaped(std::move(dims));
  return x.graph().record("reshape", std::move(out), {x}, [](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    auto& gx = g.grad_buffer(node.inputs[0]);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += node.grad[i];
  });
}

namespace {

// For each output flat index, the flat index of the source element.
std::vector<std::size_t> permutation_map(const Dims& in_dims, const std::vector<std::size_t>& order, Dims& out_dims) {
  const std::size_t r = in_dims.size();
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r - 1; i-- > 0;) in_strides[i] = in_strides[i + 1] * in_dims[i + 1];
  out_dims.resize(r);
  for (std::size_t i = 0; i < r; ++i) out_dims[i] = in_dims[order[i]];
  const std::size_t total = dims_product(in_dims);
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < r; ++i) src += idx[i] * in_strides[order[i]];
    map[flat] = src;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_dims[i]) break;
      idx[i] = 0;
    }
  }
  return map;
}

}  // namespace

Var permute(Var x, const std::vector<std::size_t>& order) {
  const Dims& dims = x.dims();
  if (order.size() != dims.size()) throw ShapeError("permute: order rank mismatch");
  std::vector<std::size_t> check = order;
  std::sort(check.begin(), check.end());
  for (std::size_t i = 0; i < check.size(); ++i)
    if (check[i] != i) throw ShapeError("permute: order is not a permutation");
  Dims out_dims;
  auto map = permutation_map(dims, order, out_dims);
  Tensor out(out_dims);
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = x.value()[map[i]];
  return x.graph().record("permute", std::move(out), {x}, [map = std::move(map)](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    auto& gx = g.grad_buffer(node.inputs[0]);
    for (std::size_t i = 0; i < map.size(); ++i) gx[map[i]] += node.grad[i];
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw UsageError("concat of zero tensors");
  const Dims& first = parts[0].dims();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range");
  Dims out_dims = first;
  out_dims[axis] = 0;
  for (const Var& p : parts) {
    const Dims& d = p.dims();
    if (d.size() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (i != axis && d[i] != first[i]) {
        throw ShapeError("concat: " + dims_to_string(d) + " incompatible with " + dims_to_string(first));
      }
    }
    out_dims[axis] += d[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  std::vector<std::size_t> chunk;
  for (const Var& p : parts) chunk.push_back(p.dims()[axis] * inner);
  const std::size_t row = out_dims[axis] * inner;
  Tensor out(out_dims);
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& src = parts[k].value().storage();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * chunk[k]), chunk[k],
                  out.storage().begin() + static_cast<std::ptrdiff_t>(o * row + col));
    }
    col += chunk[k];
  }
  return parts[0].graph().record("concat", std::move(out), parts, [outer, row, chunk](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    std::size_t col = 0;
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      if (g.needs_grad(node.inputs[k])) {
        auto& gp = g.grad_buffer(node.inputs[k]);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < chunk[k]; ++i) gp[o * chunk[k] + i] += node.grad[o * row + col + i];
      }
      col += chunk[k];
    }
  });
}

Var gather0(Var x, const std::vector<std::size_t>& index) {
  const Dims& dims = x.dims();
  if (index.empty()) throw UsageError("gather0 with empty index");
  const std::size_t stride = x.value().size() / dims[0];
  Dims out_dims = dims;
  out_dims[0] = index.size();
  Tensor out(out_dims);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= dims[0]) throw ShapeError("gather0: index out of range");
    std::copy_n(x.value().storage().begin() + static_cast<std::ptrdiff_t>(index[i] * stride), stride,
                out.storage().begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return x.graph().record("gather0", std::move(out), {x}, [index, stride](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    auto& gx = g.grad_buffer(node.inputs[0]);
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t k = 0; k < stride; ++k) gx[index[i] * stride + k] += node.grad[i * stride + k];
  });
}

Var blend(Var a, Var b, const Tensor& mask) {
  require_same_shape("blend", a.value(), b.value());
  const Dims& dims = a.dims();
  if (dims.size() < 2 || mask.size() * dims.back() != a.value().size()) {
    throw ShapeError("blend: mask " + dims_to_string(mask.dims()) + " does not cover " + dims_to_string(dims));
  }
  const std::size_t d = dims.back();
  Tensor out(dims);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Scalar m = mask[i / d];
    out[i] = m * a.value()[i] + (Scalar(1) - m) * b.value()[i];
  }
  return a.graph().record("blend", std::move(out), {a, b}, [mask, d](Graph& g, std::size_t self) {
    const auto& node = g.node(self);
    if (g.needs_grad(node.inputs[0])) {
      auto& ga = g.grad_buffer(node.inputs[0]);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += mask[i / d] * node.grad[i];
    }
    if (g.needs_grad(node.inputs[1])) {
      auto& gb = g.grad_buffer(node.inputs[1]);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += (Scalar(1) - mask[i / d]) * node.grad[i];
    }
  });
}

Var stop_gradient(Var x) { return x.graph().constant(x.value()); }

}  // namespace tkmx::inline TKMX_ABI
