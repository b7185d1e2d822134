#include "tokenmixup/numerics/graph.hpp"

#include <algorithm>

namespace tkmx::inline TKMX_ABI {

void Parameter::zero_grad() {
  grad.fill(Scalar(0));
  grad_ready = false;
}

Parameter& ParameterStore::add(std::string name, Tensor init) {
  if (by_name_.count(name)) throw UsageError("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Tensor(init.dims());
  p->velocity = Tensor(init.dims());
  p->value = std::move(init);
  Parameter* raw = p.get();
  params_.push_back(std::move(p));
  by_name_.emplace(std::move(name), raw);
  return *raw;
}

Parameter* ParameterStore::find(std::string_view name) {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? nullptr : it->second;
}

Parameter& ParameterStore::get(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw UsageError("unknown parameter: " + std::string(name));
}

const Parameter& ParameterStore::get(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw UsageError("unknown parameter: " + std::string(name));
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = "leaf";
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.op = "param";
  n.value = p.value;
  n.requires_grad = grad_enabled_ && params_trainable_;
  n.param = &p;
  const bool n_requires = n.requires_grad;
  nodes_.push_back(std::move(n));
  const std::size_t id = nodes_.size() - 1;
  param_nodes_.emplace(&p, id);
  if (n_requires) bound_.push_back(&p);
  return Var(this, id);
}

Var Graph::record(std::string_view op, Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (&v.graph() != this) throw UsageError("op '" + std::string(op) + "' mixes vars from different graphs");
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor* Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  return n.grad.empty() ? nullptr : &n.grad;
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.dims());
  return n.grad;
}

void Graph::backward(Var loss) {
  if (&loss.graph() != this) throw UsageError("backward: loss belongs to another graph");
  Node& root = nodes_.at(loss.id());
  if (root.value.size() != 1) {
    throw UsageError("backward requires a scalar loss, got " + dims_to_string(root.value.dims()));
  }
  if (!root.requires_grad) throw UsageError("backward: loss does not depend on any trainable input");
  for (auto& n : nodes_) n.grad = Tensor();
  grad_buffer(loss.id()).fill(Scalar(1));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
  for (auto& n : nodes_) {
    if (!n.param || !n.requires_grad) continue;
    if (!n.grad.empty()) {
      auto& dst = n.param->grad.storage();
      const auto& src = n.grad.storage();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    n.param->grad_ready = true;
  }
}

std::vector<Parameter*> Graph::bound_parameters() const { return bound_; }

}  // namespace tkmx::inline TKMX_ABI
