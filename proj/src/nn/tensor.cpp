// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/nn/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "vidbrain/nn/precision.hpp"

namespace vidbrain::nn {
namespace {
thread_local bool t_grad_enabled = true;
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ']';
  return os.str();
}

Tensor Tensor::wrap(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, v), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("Tensor::from: shape " + shape_str(shape) + " needs " +
                                std::to_string(shape_numel(shape)) + " values, got " +
                                std::to_string(values.size()));
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({}, {v}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) throw std::out_of_range("Tensor::dim: axis out of range");
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->value.size(); }

std::span<const double> Tensor::data() const { return node_->value; }

std::span<double> Tensor::mutable_data() {
  if (!is_leaf()) throw std::logic_error("mutable_data: op results are immutable");
  return node_->value;
}

std::vector<double> Tensor::to_vector() const { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item: tensor has " + std::to_string(numel()) + " elements");
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return !node_->backward; }

void Tensor::set_requires_grad(bool on) {
  if (!is_leaf()) throw std::logic_error("set_requires_grad: only leaves can be toggled");
  node_->requires_grad = on;
}

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }
bool grad_enabled() { return t_grad_enabled; }

std::vector<Tensor> grad(const Tensor& loss, const std::vector<Tensor>& leaves, double seed) {
  if (!loss.defined() || loss.numel() != 1 || !loss.shape().empty())
    throw std::invalid_argument("grad: loss must be a scalar tensor");

  // Iterative post-order DFS gives a topological order of the tape.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  detail::Node* root = const_cast<detail::Node*>(loss.node());
  if (root->requires_grad) {
    stack.emplace_back(root, 0);
    seen.insert(root);
  }
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
  for (const Tensor& leaf : leaves) {
    if (!leaf.defined() || !seen.contains(const_cast<detail::Node*>(leaf.node())))
      throw std::invalid_argument("grad: leaf is not on the tape of this loss");
  }

  for (detail::Node* n : order) n->grad.clear();
  root->grad_buffer()[0] = seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->grad.empty() || !n->backward) continue;
    if (n->round_grad && n != root) round_half_inplace(n->grad);
    n->backward(*n);
  }

  std::vector<Tensor> out;
  out.reserve(leaves.size());
  for (const Tensor& leaf : leaves) {
    auto* n = const_cast<detail::Node*>(leaf.node());
    std::vector<double> g = n->grad.empty() ? std::vector<double>(n->value.size(), 0.0) : n->grad;
    out.push_back(Tensor::from(n->shape, std::move(g)));
  }
  for (detail::Node* n : order) {
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
  return out;
}

}  // namespace vidbrain::nn
