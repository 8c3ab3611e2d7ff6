// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "fepcross/encoder/encoder.hpp"

namespace fepcross::pretrain {

using encoder::DomainVars;
using numcore::Var;

/// Sum over `domains` of the squared error averaged over masked elements of
/// that domain. Domains without masked patches contribute 0; if no domain has
/// any, a warning is logged and the loss is 0.
template <typename T>
Var<T> reconstruction_loss(const DomainVars<T>& reconstruction, const spectral::TriDomainSample& target,
                           const std::vector<spectral::Domain>& domains);

using NegativeSets = std::vector<std::vector<std::size_t>>;

/// max(1, round(fraction * n)) distinct negatives per node, never the node itself.
std::size_t negative_count(std::size_t nodes, double fraction);
NegativeSets sample_negatives(std::size_t nodes, double fraction, std::uint64_t seed);

/// NT-Xent with cosine similarity and no temperature, averaged over nodes:
/// -log(e^{s(i,i)} / (e^{s(i,i)} + sum_{j in neg(i)} e^{s(i,j)})), s(i,j) = cos(H_i, H~_j).
/// Throws numcore::DomainError on a zero-norm row.
template <typename T>
Var<T> contrastive_loss(const Var<T>& original, const Var<T>& augmented, const NegativeSets& negatives);

}  // namespace fepcross::pretrain
