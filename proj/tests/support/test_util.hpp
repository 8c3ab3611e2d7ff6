// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include "fepcross/numcore/autodiff.hpp"

namespace fepcross::testing {

template <typename T = double>
numcore::Tensor<T> random_tensor(numcore::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  numcore::Tensor<T> t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (T& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

/// Values with |x| >= margin, so kinks such as relu's are avoided.
inline numcore::TensorD away_from_zero(numcore::Shape shape, std::uint64_t seed, double margin = 0.05) {
  auto t = random_tensor(std::move(shape), seed);
  for (double& v : t.data()) v = v < 0 ? v - margin : v + margin;
  return t;
}

/// Contracts `out` with fixed pseudo-random weights so every output
/// coordinate contributes to the scalar used in gradient checks.
inline numcore::Var<double> probe(const numcore::Var<double>& out, std::uint64_t seed = 99) {
  auto w = numcore::constant(random_tensor(out.shape(), seed));
  return numcore::sum_all(numcore::mul(out, w));
}

}  // namespace fepcross::testing
