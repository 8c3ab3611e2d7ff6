// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/finetune/momentum_graph.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fepcross/data/windows.hpp"

namespace fepcross::finetune {

namespace nc = numcore;

MomentumGraph initial_graph(const TensorF& adjacency, double tau) {
  return MomentumGraph{data::normalize_adjacency(adjacency), 0, tau};
}

TensorF build_meta_graph(const TensorF& embeddings) {
  if (embeddings.rank() != 2) throw nc::ShapeError("build_meta_graph: expected [N, d], got " + nc::shape_to_string(embeddings.shape()));
  const std::size_t n = embeddings.dim(0), d = embeddings.dim(1);
  for (float v : embeddings.data()) {
    if (!std::isfinite(v)) throw nc::DomainError("build_meta_graph: non-finite embedding");
  }
  TensorF out({n, n});
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0;
      for (std::size_t c = 0; c < d; ++c) dot += static_cast<double>(embeddings[i * d + c]) * embeddings[j * d + c];
      logits[j] = dot;
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double total = 0;
    for (double& l : logits) total += (l = std::exp(l - top));
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<float>(logits[j] / total);
  }
  return out;
}

void momentum_update(MomentumGraph& graph, const TensorF& meta, double tau) {
  if (meta.shape() != graph.a_hat.shape()) {
    throw nc::ShapeError("momentum_update: meta-graph " + nc::shape_to_string(meta.shape()) + " vs graph " +
                         nc::shape_to_string(graph.a_hat.shape()));
  }
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("momentum ratio must be in [0, 1]");
  auto a = graph.a_hat.data();
  const auto m = meta.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<float>(tau * m[i] + (1.0 - tau) * a[i]);
  graph.tau = tau;
  ++graph.k;
}

}  // namespace fepcross::finetune
