// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>
#include <vector>

#include "fepcross/numcore/parameters.hpp"

namespace fepcross::finetune {

using numcore::ParameterStore;
using numcore::Tensor;
using numcore::Var;

/// Short-term backbone: start projection, gated dilated causal convolutions
/// (two taps) each followed by a diffusion graph convolution, summed skips.
struct STConfig {
  std::size_t d_model = 128;
  std::size_t in_steps = 12;
  std::size_t channels = 1;
  std::vector<std::size_t> dilations = {1, 2};
  std::size_t diffusion_order = 2;
};

template <typename T>
struct STModel {
  static void declare(ParameterStore<T>& params, const std::string& prefix, const STConfig& config,
                      std::mt19937_64& rng);

  /// Per-step activations relu(sum of skips), [N, in_steps, d]. Step t depends
  /// only on input steps <= t.
  static Var<T> sequence(const ParameterStore<T>& params, const std::string& prefix, const STConfig& config,
                         const Var<T>& input, const Var<T>& graph);

  /// H^ST [N, d]: the last step of `sequence` through the output projection.
  static Var<T> forward(const ParameterStore<T>& params, const std::string& prefix, const STConfig& config,
                        const Var<T>& input, const Var<T>& graph);
};

}  // namespace fepcross::finetune
