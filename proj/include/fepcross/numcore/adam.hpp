// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fepcross/numcore/autodiff.hpp"
#include "fepcross/numcore/tensor.hpp"

namespace fepcross::numcore {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Moment buffers are created lazily on the first step, one per parameter.
template <typename T>
struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
};

/// AdamW: param -= lr*wd*param, then the bias-corrected Adam update.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads, AdamState<T>& state);

/// Same update reading each parameter's accumulated gradient.
template <typename T>
void adam_step(std::span<Var<T>> params, AdamState<T>& state);

}  // namespace fepcross::numcore
