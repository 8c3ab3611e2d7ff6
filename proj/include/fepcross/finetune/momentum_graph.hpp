// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "fepcross/numcore/tensor.hpp"

namespace fepcross::finetune {

using numcore::TensorF;

/// Refined adjacency kept as a moving average of meta-graphs.
struct MomentumGraph {
  TensorF a_hat;  // [N, N], rows sum to 1
  std::size_t k = 0;
  double tau = 0.1;
};

/// Starts from the row-normalized adjacency with self-loops.
MomentumGraph initial_graph(const TensorF& adjacency, double tau);

/// Row-wise softmax of H H^T for node embeddings H [N, d].
TensorF build_meta_graph(const TensorF& embeddings);

/// A_hat <- tau * meta + (1 - tau) * A_hat, and k += 1.
void momentum_update(MomentumGraph& graph, const TensorF& meta, double tau);

}  // namespace fepcross::finetune
