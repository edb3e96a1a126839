#include "tsdapt/autodiff.hpp"

#include <unordered_set>

#include "tsdapt/errors.hpp"

namespace tsdapt {

Var Var::make(Array value, std::vector<Var> parents, detail::BackwardRule rule,
              std::string op) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by " + op);
  }
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->op = std::move(op);
  node->rule = std::move(rule);
  node->parents.reserve(parents.size());
  for (auto& p : parents) {
    node->requires_grad = node->requires_grad || p.requires_grad();
    node->parents.push_back(std::move(p.node_));
  }
  return Var(std::move(node));
}

Var constant(Array value) {
  if (!value.all_finite()) throw NumericError("non-finite constant");
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->op = "constant";
  return Var(std::move(node));
}

Var parameter(Array value) {
  if (!value.all_finite()) throw NumericError("non-finite parameter");
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->op = "parameter";
  node->requires_grad = true;
  return Var(std::move(node));
}

Array Gradients::at(const Var& v) const {
  auto it = grads_.find(v.id());
  if (it == grads_.end()) return Array(v.shape());
  return it->second;
}

Gradients backward(const Var& output) {
  if (!output) throw std::invalid_argument("backward on empty Var");
  if (output.value().size() != 1) {
    throw ShapeError("backward requires a scalar output, got shape " +
                     shape_string(output.shape()));
  }

  // Iterative DFS producing a post-order (parents before children).
  std::vector<const detail::Node*> order;
  std::unordered_set<const detail::Node*> done;
  std::unordered_set<const detail::Node*> on_stack;
  struct Frame {
    const detail::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  if (output.requires_grad()) stack.push_back({output.id(), 0});
  on_stack.insert(output.id());
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_parent < top.node->parents.size()) {
      const detail::Node* parent = top.node->parents[top.next_parent++].get();
      if (!parent->requires_grad || done.count(parent)) continue;
      if (on_stack.count(parent)) throw std::logic_error("cycle detected in graph");
      on_stack.insert(parent);
      stack.push_back({parent, 0});
    } else {
      on_stack.erase(top.node);
      done.insert(top.node);
      order.push_back(top.node);
      stack.pop_back();
    }
  }

  Gradients result;
  if (order.empty()) return result;
  result.grads_.emplace(output.id(), Array(output.shape(), 1.0));

  std::vector<Array*> parent_grads;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const detail::Node* node = *it;
    if (!node->rule) continue;
    const Array& upstream = result.grads_.at(node);
    parent_grads.assign(node->parents.size(), nullptr);
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
      const detail::Node* parent = node->parents[i].get();
      if (!parent->requires_grad) continue;
      auto [slot, inserted] = result.grads_.try_emplace(parent, parent->value.shape());
      parent_grads[i] = &slot->second;
    }
    node->rule(upstream, parent_grads);
  }
  return result;
}

}  // namespace tsdapt
