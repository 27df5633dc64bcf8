#include "ssr/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace ssr {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, ", ")); }

Tensor::Tensor() : node_(std::make_shared<detail::Node>()) { node_->value.assign(1, 0.0); }

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError(fmt::format("shape {} holds {} values, got {}", shape_str(shape),
                                 shape_numel(shape), values.size()));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError(fmt::format("axis {} out of range for shape {}", axis, shape_str(shape())));
  }
  return node_->shape[axis];
}

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  node_->grad_touched = false;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError(fmt::format("item() on shape {}", shape_str(shape())));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (rank() != 2) throw ShapeError(fmt::format("at(r, c) on shape {}", shape_str(shape())));
  return node_->value[r * node_->shape[1] + c];
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->value); }

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                           std::function<void(detail::Node&)> backward) {
  Tensor out(std::move(shape), std::move(values));
  const bool any = g_grad_enabled && std::any_of(parents.begin(), parents.end(),
                                                 [](const Tensor& p) { return p.requires_grad(); });
  if (any) {
    auto& node = *out.node_;
    node.requires_grad = true;
    node.parents.reserve(parents.size());
    for (auto& p : parents) node.parents.push_back(p.node_);
    node.backward = std::move(backward);
  }
  return out;
}

void Tensor::backward() const {
  if (size() != 1) {
    throw ShapeError(fmt::format("backward() needs a scalar loss, got shape {}", shape_str(shape())));
  }
  if (!requires_grad()) return;

  // Iterative post-order DFS; reversed order is a valid topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior gradients are scratch space for this pass only.
  for (auto* n : order) {
    if (n->backward) {
      n->grad.assign(n->value.size(), 0.0);
    } else {
      n->ensure_grad();
      n->grad_touched = true;
    }
  }
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward) {
      n->backward(*n);
      std::vector<double>().swap(n->grad);
    }
  }
}

}  // namespace ssr
