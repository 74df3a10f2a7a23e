// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vidbrain::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

// One vertex of the tape. Values are written once by the op that created the
// node; grad is scratch space owned by the backward pass.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool round_grad = false;  // half storage for this activation's gradient
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  // Lazily sized gradient buffer.
  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major tensor handle. Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Only for leaves (parameters, inputs); op results are immutable.
  std::span<double> mutable_data();
  std::vector<double> to_vector() const;
  double item() const;
  double at(std::size_t flat) const { return data()[flat]; }

  bool requires_grad() const;
  bool is_leaf() const;
  void set_requires_grad(bool on);

  const detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  /// Internal: wraps a freshly created op node.
  static Tensor wrap(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Suspends tape recording on this thread (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

/// Reverse pass. Returns dLoss/dLeaf for every leaf, scaled by `seed`.
/// Throws std::invalid_argument if loss is not a scalar or a leaf is not
/// reachable from loss on the tape.
std::vector<Tensor> grad(const Tensor& loss, const std::vector<Tensor>& leaves,
                         double seed = 1.0);

}  // namespace vidbrain::nn
