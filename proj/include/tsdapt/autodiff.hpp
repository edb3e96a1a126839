#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tsdapt/array.hpp"

namespace tsdapt {

namespace detail {

/// Accumulates the local gradient contribution into each parent's gradient.
/// `parent_grads[i]` is null when parent `i` does not require a gradient.
using BackwardRule =
    std::function<void(const Array& upstream, std::span<Array* const> parent_grads)>;

struct Node {
  Array value;
  std::vector<std::shared_ptr<const Node>> parents;
  BackwardRule rule;
  bool requires_grad = false;
  std::string op;
};

}  // namespace detail

class Gradients;

/// Handle to an immutable node in a reverse-mode differentiation graph.
///
/// Copies share the node. Leaves are created with `constant` or `parameter`;
/// every other node is produced by an operation in ops.hpp.
class Var {
 public:
  Var() = default;

  const Array& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::string& op() const { return node_->op; }
  explicit operator bool() const noexcept { return static_cast<bool>(node_); }

  const detail::Node* id() const noexcept { return node_.get(); }

  /// Builds an interior node. Throws NumericError if `value` is not finite.
  static Var make(Array value, std::vector<Var> parents, detail::BackwardRule rule,
                  std::string op);

 private:
  explicit Var(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const detail::Node> node_;

  friend Var constant(Array value);
  friend Var parameter(Array value);
  friend class Gradients;
  friend Gradients backward(const Var& output);
};

Var constant(Array value);
Var parameter(Array value);

/// Gradients of a scalar output with respect to every node requiring one.
class Gradients {
 public:
  bool contains(const Var& v) const { return grads_.count(v.id()) != 0; }
  /// Gradient for `v`; an all-zero array of v's shape if `v` was not reached.
  Array at(const Var& v) const;

 private:
  std::unordered_map<const detail::Node*, Array> grads_;
  friend Gradients backward(const Var& output);
};

/// Reverse-mode sweep from a scalar output. Each node is visited once in
/// reverse topological order. Pure: calling twice gives identical results.
Gradients backward(const Var& output);

}  // namespace tsdapt
