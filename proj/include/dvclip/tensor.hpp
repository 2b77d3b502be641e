// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace dvclip {

/// Operand shapes do not conform to the requested operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input outside the mathematical domain of an operation (log of a
/// non-positive value, normalizing a zero vector, non-finite loss, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Misuse of the differentiation graph.
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs that require grad.
  std::function<void(Node&)> backward_fn;
  const char* op = "leaf";

  bool is_leaf() const { return !backward_fn; }

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Shape-carrying array of doubles taking part in reverse-mode
/// differentiation. Copies share the underlying storage; use clone() for a
/// deep copy. Values of op results are never mutated after construction.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    for (auto dim : shape) {
      if (dim == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    }
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    if (shape_numel(shape) != values.size()) {
      throw ShapeError("shape " + shape_str(shape) + " holds " +
                       std::to_string(shape_numel(shape)) + " values, got " +
                       std::to_string(values.size()));
    }
    node_->shape = std::move(shape);
    node_->values = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double value) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return Tensor({1}, {value}, requires_grad);
  }

  static Tensor identity(std::size_t n) {
    auto t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.node_->values[i * n + i] = 1.0;
    return t;
  }

  bool defined() const { return static_cast<bool>(node_); }

  const Shape& shape() const { return node().shape; }
  std::size_t rank() const { return node().shape.size(); }
  std::size_t numel() const { return node().values.size(); }
  std::size_t dim(std::size_t axis) const { return node().shape.at(axis); }

  /// Matrix view: rank-1 tensors are a single row.
  std::size_t rows() const { return rank() == 1 ? 1 : node().shape[0]; }
  std::size_t cols() const { return node().shape.back(); }

  std::span<const double> values() const { return node().values; }
  double at(std::size_t i) const { return node().values.at(i); }
  double at(std::size_t r, std::size_t c) const { return node().values.at(r * cols() + c); }

  double item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node().values[0];
  }

  /// Row `r` of a rank-2 tensor as a plain vector.
  std::vector<double> row(std::size_t r) const {
    auto c = cols();
    auto v = values();
    return {v.begin() + static_cast<std::ptrdiff_t>(r * c),
            v.begin() + static_cast<std::ptrdiff_t>((r + 1) * c)};
  }

  bool requires_grad() const { return node().requires_grad; }

  Tensor& set_requires_grad(bool on) {
    if (!node().is_leaf()) throw GraphError("requires_grad can only be toggled on leaf tensors");
    node_->requires_grad = on;
    if (!on) node_->grad.clear();
    return *this;
  }

  bool has_grad() const { return !node().grad.empty(); }
  std::span<const double> grad() const { return node().grad; }
  void zero_grad() { node().grad.clear(); }

  bool has_graph() const { return !node().is_leaf(); }

  /// In-place access for optimizers; only leaves may be mutated.
  std::span<double> mutable_values() {
    if (has_graph()) throw GraphError("cannot mutate a tensor recorded in a graph");
    return node_->values;
  }

  /// Deep copy as a leaf without gradient tracking.
  Tensor clone() const { return Tensor(shape(), node().values); }

  Tensor reshaped(Shape shape) const;

  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  static Tensor from_node(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  detail::Node& node() const {
    if (!node_) throw GraphError("use of an undefined tensor");
    return *node_;
  }

  std::shared_ptr<detail::Node> node_;
};

namespace detail {

/// Builds an op result. The graph edge is recorded only when some input
/// requires grad; otherwise the result is a plain constant.
inline Tensor make_result(Shape shape, std::vector<double> values,
                          std::initializer_list<const Tensor*> inputs, const char* op,
                          std::function<void(Node&)> backward_fn) {
  Tensor out(std::move(shape), std::move(values));
  bool needs = false;
  for (const auto* in : inputs) needs = needs || in->requires_grad();
  if (!needs) return out;
  auto& node = *out.node_ptr();
  node.requires_grad = true;
  node.op = op;
  for (const auto* in : inputs) node.inputs.push_back(in->node_ptr());
  node.backward_fn = std::move(backward_fn);
  return out;
}

inline Tensor make_result(Shape shape, std::vector<double> values,
                          std::span<const Tensor> inputs, const char* op,
                          std::function<void(Node&)> backward_fn) {
  Tensor out(std::move(shape), std::move(values));
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (!needs) return out;
  auto& node = *out.node_ptr();
  node.requires_grad = true;
  node.op = op;
  for (const auto& in : inputs) node.inputs.push_back(in.node_ptr());
  node.backward_fn = std::move(backward_fn);
  return out;
}

}  // namespace detail

inline Tensor Tensor::reshaped(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw ShapeError("cannot reshape " + shape_str(shape()) + " to " + shape_str(new_shape));
  }
  std::vector<double> v(values().begin(), values().end());
  return detail::make_result(std::move(new_shape), std::move(v), {this}, "reshape",
                             [](detail::Node& self) {
                               auto& in = *self.inputs[0];
                               if (!in.requires_grad) return;
                               auto& g = in.grad_buffer();
                               for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                             });
}

/// Reverse-mode sweep from a scalar loss. Gradients accumulate additively
/// into every reachable tensor that requires grad. The graph is released
/// afterwards; intermediate results become constants.
inline void backward(const Tensor& loss) {
  if (!loss.defined()) throw GraphError("backward on an undefined tensor");
  if (loss.numel() != 1) {
    throw GraphError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw GraphError("backward on a tensor that is not connected to any trainable tensor");
  }
  using detail::Node;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  Node* root = loss.node_ptr().get();
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  for (Node* node : order) {
    if (node->is_leaf()) continue;
    node->backward_fn = nullptr;
    node->inputs.clear();
    node->requires_grad = false;
  }
}

}  // namespace dvclip
