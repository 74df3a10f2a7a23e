// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>

#include "vidbrain/nn/precision.hpp"
#include "vidbrain/nn/tensor.hpp"

namespace vidbrain::nn::detail {

// Gradient buffer of an operand, or nullptr if it does not take gradients.
inline std::vector<double>* grad_of(const std::shared_ptr<Node>& n) {
  return n->requires_grad ? &n->grad_buffer() : nullptr;
}

// Creates an op result. The backward closure is recorded only when the tape
// is on and some operand requires gradients.
template <class Backward>
Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                   std::initializer_list<Tensor> operands, Backward&& backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  // Scalar results (loss reductions) stay at working precision.
  if (half_storage_enabled() && !node->shape.empty()) {
    round_half_inplace(node->value);
    node->round_grad = true;
  }
  bool needs = false;
  if (grad_enabled()) {
    for (const Tensor& t : operands) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor& t : operands) node->parents.push_back(t.node_ptr());
    node->backward = std::forward<Backward>(backward);
  }
  return Tensor::wrap(std::move(node));
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

}  // namespace vidbrain::nn::detail
