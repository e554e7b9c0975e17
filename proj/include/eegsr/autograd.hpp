#pragma once

// Tape-free reverse-mode differentiation over a DAG of tensor nodes.
//
// Every op records its inputs and a backward rule. Backward rules are written
// in terms of other differentiable ops, so running `grad` with
// `create_graph = true` yields gradients that are themselves differentiable.
// Rules that depend on a non-linear function of an input (ELU curvature,
// 1/sqrt, softmax Jacobian, ...) wrap that factor with `frozen`, which makes
// any attempt to differentiate through it a third time an explicit error.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "eegsr/error.hpp"
#include "eegsr/tensor.hpp"

namespace eegsr {

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

inline bool grad_enabled() { return grad_mode_flag(); }

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <class T>
class Var;

template <class T>
using BackwardFn =
    std::function<std::vector<Var<T>>(std::span<const Var<T>> inputs, const Var<T>& grad_out,
                                      const std::vector<bool>& needs)>;

template <class T>
struct Node {
  Tensor<T> value;
  bool requires_grad = false;
  std::vector<Var<T>> inputs;
  BackwardFn<T> backward;
  const char* op = "leaf";
};

/// Handle to a graph node. Copies share the node.
template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Var from_node(std::shared_ptr<Node<T>> node) {
    Var v;
    v.node_ = std::move(node);
    return v;
  }

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  /// In-place access for optimizers; only meaningful on leaves.
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  T item() const { return node_->value.item(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool is_leaf() const { return node_ && node_->inputs.empty(); }
  const char* op() const { return node_->op; }
  Node<T>* node() const noexcept { return node_.get(); }

  /// Same value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Builds the output node of an op. Records inputs only when grad mode is on
/// and at least one input needs a gradient.
template <class T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward,
               const char* name) {
  bool track = grad_enabled() &&
               std::any_of(inputs.begin(), inputs.end(),
                           [](const Var<T>& v) { return v.requires_grad(); });
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = name;
  if (track) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Var<T>::from_node(std::move(node));
}

/// A value computed from `depends_on` that first-order rules use as a
/// constant factor. Its own derivative is not implemented: if a later
/// gradient pass needs to flow through it, `grad` raises instead of silently
/// dropping the term.
template <class T>
Var<T> frozen(Tensor<T> value, std::vector<Var<T>> depends_on, const char* name) {
  return make_op<T>(
      std::move(value), std::move(depends_on),
      [name](std::span<const Var<T>>, const Var<T>&,
             const std::vector<bool>&) -> std::vector<Var<T>> {
        throw Error(std::string("higher-order gradient through '") + name +
                    "' is not supported");
      },
      name);
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b);

namespace detail {

template <class T>
std::vector<Node<T>*> topo_order(Node<T>* root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].node();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace detail

/// Gradients of a scalar `output` with respect to `targets`. Targets that do
/// not influence the output receive zeros. With `create_graph` the returned
/// gradients carry their own graph and may be differentiated again.
template <class T>
std::vector<Var<T>> grad(const Var<T>& output, const std::vector<Var<T>>& targets,
                         bool create_graph = false) {
  if (!output.defined() || !output.requires_grad()) {
    throw Error("backward called before a forward pass recorded a graph");
  }
  if (output.size() != 1) {
    throw ShapeError("grad requires a scalar output, got shape " + shape_str(output.shape()));
  }
  std::vector<Var<T>> result(targets.size());
  std::unordered_map<Node<T>*, std::vector<std::size_t>> target_slots;
  for (std::size_t i = 0; i < targets.size(); ++i) target_slots[targets[i].node()].push_back(i);

  auto order = detail::topo_order(output.node());
  // A node is relevant when a target is reachable through it.
  std::unordered_set<Node<T>*> relevant;
  for (Node<T>* n : order) {  // post-order: inputs before consumers
    bool r = target_slots.count(n) > 0;
    for (const auto& in : n->inputs) r = r || relevant.count(in.node()) > 0;
    if (r) relevant.insert(n);
  }

  std::unordered_map<Node<T>*, Var<T>> grads;
  {
    std::unique_ptr<NoGradGuard> guard;
    if (!create_graph) guard = std::make_unique<NoGradGuard>();
    grads[output.node()] = Var<T>(Tensor<T>(output.shape(), T(1)));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<T>* n = *it;
      if (!relevant.count(n)) continue;
      auto g_it = grads.find(n);
      if (g_it == grads.end()) continue;
      Var<T> g = g_it->second;
      if (auto slots = target_slots.find(n); slots != target_slots.end()) {
        for (std::size_t s : slots->second) result[s] = g;
      }
      if (n->inputs.empty()) continue;
      std::vector<bool> needs(n->inputs.size());
      bool any = false;
      for (std::size_t i = 0; i < needs.size(); ++i) {
        needs[i] = relevant.count(n->inputs[i].node()) > 0;
        any = any || needs[i];
      }
      if (!any) continue;
      auto in_grads = n->backward(std::span<const Var<T>>(n->inputs), g, needs);
      for (std::size_t i = 0; i < needs.size(); ++i) {
        if (!needs[i] || !in_grads[i].defined()) continue;
        Node<T>* child = n->inputs[i].node();
        auto existing = grads.find(child);
        if (existing == grads.end()) {
          grads.emplace(child, in_grads[i]);
        } else {
          existing->second = add(existing->second, in_grads[i]);
        }
      }
      // Free intermediate gradients once consumed.
      if (!target_slots.count(n)) grads.erase(n);
    }
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!result[i].defined()) result[i] = Var<T>(Tensor<T>(targets[i].shape(), T(0)));
  }
  return result;
}

/// Gradients of a scalar loss for every parameter, first order only.
template <class T>
std::vector<Var<T>> backward(const Var<T>& loss, const std::vector<Var<T>>& params) {
  return grad(loss, params, false);
}

}  // namespace eegsr
