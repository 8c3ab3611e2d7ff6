// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fepcross/numcore/autodiff.hpp"

namespace fepcross::numcore {

/// Builds a one-element loss from the given leaves.
using ScalarGraph = std::function<Var<double>(std::span<const Var<double>>)>;

/// Max over all leaf coordinates of |analytic - central| / max(1, |central|),
/// with the central difference taken at +-step. Throws DomainError when the
/// forward value is not finite.
double grad_check(const ScalarGraph& graph, const std::vector<Tensor<double>>& inputs, double step = 1e-4);

}  // namespace fepcross::numcore
