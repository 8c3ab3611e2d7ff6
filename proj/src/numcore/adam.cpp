// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/numcore/adam.hpp"

#include <cmath>
#include <string>

namespace fepcross::numcore {

template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads, AdamState<T>& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params vs " + std::to_string(grads.size()) +
                     " grads");
  }
  if (state.m.empty()) {
    for (const Tensor<T>* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state tracks a different parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || state.m[i].shape() != params[i]->shape()) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " shape " + shape_to_string(params[i]->shape()) +
                       " vs grad " + shape_to_string(grads[i]->shape()));
    }
  }

  const AdamOptions& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);
  const T decay = static_cast<T>(1.0 - o.learning_rate * o.weight_decay);
  const T b1 = static_cast<T>(o.beta1);
  const T b2 = static_cast<T>(o.beta2);
  const T step_size = static_cast<T>(o.learning_rate / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(o.eps);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    const auto g = grads[i]->data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (o.weight_decay != 0.0) p[j] *= decay;
      m[j] = b1 * m[j] + (T{1} - b1) * g[j];
      v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
      p[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + eps);
    }
  }
}

template <typename T>
void adam_step(std::span<Var<T>> params, AdamState<T>& state) {
  std::vector<Tensor<T>*> values;
  std::vector<const Tensor<T>*> grads;
  values.reserve(params.size());
  grads.reserve(params.size());
  for (auto& p : params) {
    if (!p.requires_grad()) throw std::invalid_argument("adam_step: parameter does not require grad");
    values.push_back(&p.mutable_value());
    grads.push_back(&p.grad());
  }
  adam_step<T>(std::span<Tensor<T>* const>(values), std::span<const Tensor<T>* const>(grads), state);
}

template void adam_step<float>(std::span<Tensor<float>* const>, std::span<const Tensor<float>* const>,
                               AdamState<float>&);
template void adam_step<double>(std::span<Tensor<double>* const>, std::span<const Tensor<double>* const>,
                                AdamState<double>&);
template void adam_step<float>(std::span<Var<float>>, AdamState<float>&);
template void adam_step<double>(std::span<Var<double>>, AdamState<double>&);

}  // namespace fepcross::numcore
