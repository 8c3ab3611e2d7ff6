// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "fepcross/numcore/tensor.hpp"

namespace fepcross::numcore {

/// One vertex of the reverse-mode tape. Interior nodes keep their parents alive
/// until the last handle to the result is dropped.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  /// Zero-initialized gradient buffer, allocated on first use.
  Tensor<T>& grad_buffer();
};

/// Handle to a tape node. Cheap to copy; copies alias the same node.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& mutable_grad() { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const noexcept { return static_cast<bool>(node_); }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

  /// Value of a one-element tensor.
  T item() const;

  void zero_grad();

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Leaf that participates in differentiation; grad is allocated and zeroed.
template <typename T>
Var<T> parameter(Tensor<T> value);

/// Leaf that never receives a gradient.
template <typename T>
Var<T> constant(Tensor<T> value);

/// Populates grad of every requires_grad node reachable from a one-element root.
template <typename T>
void backward(const Var<T>& root);

// Elementwise binary ops broadcast with numpy rules.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> div(const Var<T>& a, const Var<T>& b);

template <typename T> Var<T> add_scalar(const Var<T>& a, T c);
template <typename T> Var<T> mul_scalar(const Var<T>& a, T c);

template <typename T> Var<T> relu(const Var<T>& x);
/// Smallest |x| fed to relu on this thread since the last reset. Finite
/// difference checks use it to confirm no input sits near the kink.
double relu_margin();
void reset_relu_margin();
template <typename T> Var<T> sigmoid(const Var<T>& x);
template <typename T> Var<T> tanh(const Var<T>& x);
template <typename T> Var<T> exp(const Var<T>& x);
template <typename T> Var<T> log(const Var<T>& x);
template <typename T> Var<T> sqrt(const Var<T>& x);

/// a [..., m, k] x b [k, n] (b shared across the batch) or b [..., k, n] (same batch).
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);

template <typename T> Var<T> softmax(const Var<T>& x, std::size_t axis);
/// Normalizes over the last axis; no affine part.
template <typename T> Var<T> layer_norm(const Var<T>& x, T eps = T(1e-5));

template <typename T> Var<T> concat(std::span<const Var<T>> parts, std::size_t axis);
template <typename T> Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t start, std::size_t length);
template <typename T> std::vector<Var<T>> split(const Var<T>& x, std::span<const std::size_t> sizes, std::size_t axis);

template <typename T> Var<T> sum(const Var<T>& x, std::size_t axis, bool keepdim = false);
template <typename T> Var<T> mean(const Var<T>& x, std::size_t axis, bool keepdim = false);
template <typename T> Var<T> sum_all(const Var<T>& x);
template <typename T> Var<T> mean_all(const Var<T>& x);

template <typename T> Var<T> transpose(const Var<T>& x, std::size_t axis0, std::size_t axis1);
template <typename T> Var<T> permute(const Var<T>& x, std::span<const std::size_t> order);
template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);

/// Rows of table [V, d] selected by index, giving [indices.size(), d].
template <typename T> Var<T> embedding(const Var<T>& table, std::span<const std::size_t> indices);

/// Mean of squared differences over all elements; shapes must match.
template <typename T> Var<T> mse(const Var<T>& a, const Var<T>& b);

template <typename T> Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T> Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T> Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }
template <typename T> Var<T> operator/(const Var<T>& a, const Var<T>& b) { return div(a, b); }

}  // namespace fepcross::numcore
