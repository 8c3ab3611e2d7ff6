// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>

#include "fepcross/numcore/autodiff.hpp"
#include "fepcross/numcore/parameters.hpp"

namespace fepcross::encoder {

using numcore::ParameterStore;
using numcore::Tensor;
using numcore::Var;

/// One pre-norm transformer encoder layer: multi-head self-attention then a
/// relu feed-forward block, each with a residual connection.
template <typename T>
struct TSLayer {
  static void declare(ParameterStore<T>& params, const std::string& prefix, std::size_t d_model, std::size_t ff_width,
                      std::mt19937_64& rng);

  /// x is [B, L, d]; attention runs over L independently per batch row.
  /// When `attention` is non-null it receives the softmax weights [B, H, L, L].
  static Var<T> forward(const ParameterStore<T>& params, const std::string& prefix, const Var<T>& x,
                        std::size_t heads, Tensor<T>* attention = nullptr);
};

extern template struct TSLayer<float>;
extern template struct TSLayer<double>;

}  // namespace fepcross::encoder
