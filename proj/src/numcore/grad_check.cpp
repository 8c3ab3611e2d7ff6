// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/numcore/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace fepcross::numcore {

namespace {

double evaluate(const ScalarGraph& graph, const std::vector<Tensor<double>>& inputs) {
  std::vector<Var<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(constant(t));
  const double value = graph(leaves).item();
  if (!std::isfinite(value)) throw DomainError("grad_check: non-finite forward value");
  return value;
}

}  // namespace

double grad_check(const ScalarGraph& graph, const std::vector<Tensor<double>>& inputs, double step) {
  std::vector<Var<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(parameter(t));
  const Var<double> out = graph(leaves);
  if (!std::isfinite(out.item())) throw DomainError("grad_check: non-finite forward value");
  backward(out);

  std::vector<Tensor<double>> probe = inputs;
  double worst = 0.0;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const auto analytic = leaves[k].grad().data();
    for (std::size_t j = 0; j < probe[k].size(); ++j) {
      const double saved = probe[k][j];
      probe[k][j] = saved + step;
      const double up = evaluate(graph, probe);
      probe[k][j] = saved - step;
      const double down = evaluate(graph, probe);
      probe[k][j] = saved;
      const double central = (up - down) / (2.0 * step);
      worst = std::max(worst, std::abs(analytic[j] - central) / std::max(1.0, std::abs(central)));
    }
  }
  return worst;
}

}  // namespace fepcross::numcore
