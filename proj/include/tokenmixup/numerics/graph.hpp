#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tokenmixup/numerics/tensor.hpp"

namespace tkmx::inline TKMX_ABI {

/// A trainable tensor that outlives individual graphs. Gradients accumulate
/// into `grad` on every backward pass that reaches it.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor velocity;
  bool grad_ready = false;

  void zero_grad();
};

/// Owns parameters with stable addresses, in registration order.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor init);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Dims& dims() const { return value().dims(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  bool requires_grad() const;
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run tape. Nodes are appended in execution order, so every input
/// id precedes its consumer and the node list is a topological order.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  struct Node {
    std::string_view op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  /// grad_enabled=false records values only. params_trainable=false binds
  /// parameters as constants while leaves may still require grad.
  explicit Graph(bool grad_enabled = true, bool params_trainable = true)
      : grad_enabled_(grad_enabled), params_trainable_(params_trainable) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Tensor value);
  Var leaf(Tensor value, bool requires_grad = true);
  /// Binds a parameter; repeated binds of the same parameter share one node.
  Var param(Parameter& p);

  /// Appends an op node. `backward` is dropped when no input requires grad.
  Var record(std::string_view op, Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  /// Reverse sweep from a scalar loss. Parameter gradients are added into
  /// Parameter::grad; leaf gradients stay readable through grad().
  void backward(Var loss);

  const Node& node(std::size_t id) const { return nodes_.at(id); }
  Node& node(std::size_t id) { return nodes_.at(id); }
  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  /// Gradient of a node after backward(); nullptr if none reached it.
  const Tensor* grad(Var v) const;
  /// Accumulation buffer for an input's gradient, zero-initialized on first use.
  Tensor& grad_buffer(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  std::size_t size() const { return nodes_.size(); }
  std::vector<Parameter*> bound_parameters() const;

 private:
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  std::vector<Parameter*> bound_;
  bool grad_enabled_;
  bool params_trainable_;
};

inline const Tensor& Var::value() const { return graph_->value(*this); }
inline bool Var::requires_grad() const { return graph_->needs_grad(id_); }

}  // namespace tkmx::inline TKMX_ABI
