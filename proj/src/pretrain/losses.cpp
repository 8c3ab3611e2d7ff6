// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/pretrain/losses.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fepcross::pretrain {

namespace nc = numcore;
using numcore::Tensor;

template <typename T>
Var<T> reconstruction_loss(const DomainVars<T>& reconstruction, const spectral::TriDomainSample& target,
                           const std::vector<spectral::Domain>& domains) {
  if (reconstruction.size() != domains.size()) {
    throw nc::ShapeError("reconstruction_loss: " + std::to_string(reconstruction.size()) + " reconstructions for " +
                         std::to_string(domains.size()) + " domains");
  }
  Var<T> total = nc::constant(Tensor<T>::scalar(T{0}));
  bool any = false;
  for (std::size_t k = 0; k < domains.size(); ++k) {
    const auto& truth = target.patches_of(domains[k]);
    const auto& grid = target.mask(domains[k]);
    if (reconstruction[k].shape() != truth.shape()) {
      throw nc::ShapeError("reconstruction_loss: " + nc::shape_to_string(reconstruction[k].shape()) + " vs target " +
                           nc::shape_to_string(truth.shape()));
    }
    const std::size_t masked = grid.total();
    if (masked == 0) continue;
    any = true;
    const std::size_t width = truth.dim(2);
    Tensor<T> weights({grid.nodes(), grid.patches(), 1});
    const T inv = T{1} / static_cast<T>(masked * width);
    for (std::size_t i = 0; i < grid.nodes(); ++i)
      for (std::size_t p = 0; p < grid.patches(); ++p) weights[i * grid.patches() + p] = grid.masked(i, p) ? inv : T{0};
    auto diff = reconstruction[k] - nc::constant(truth.template cast<T>());
    total = total + nc::sum_all(diff * diff * nc::constant(std::move(weights)));
  }
  if (!any) spdlog::warn("reconstruction_loss: no masked patches, loss defined as 0");
  return total;
}

std::size_t negative_count(std::size_t nodes, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("negative fraction must be in (0, 1]");
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(nodes)));
  return std::min(std::max<std::size_t>(1, k), nodes == 0 ? 0 : nodes - 1);
}

NegativeSets sample_negatives(std::size_t nodes, double fraction, std::uint64_t seed) {
  if (nodes < 2) throw std::invalid_argument("contrastive negatives need at least two nodes");
  const std::size_t k = negative_count(nodes, fraction);
  std::mt19937_64 rng(seed);
  NegativeSets out(nodes);
  std::vector<std::size_t> pool(nodes - 1);
  for (std::size_t i = 0; i < nodes; ++i) {
    // Every index except i, then a partial Fisher-Yates draw of k of them.
    std::iota(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(i), std::size_t{0});
    std::iota(pool.begin() + static_cast<std::ptrdiff_t>(i), pool.end(), i + 1);
    for (std::size_t m = 0; m < k; ++m) {
      std::uniform_int_distribution<std::size_t> pick(m, pool.size() - 1);
      std::swap(pool[m], pool[pick(rng)]);
    }
    out[i].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

namespace {

template <typename T>
Var<T> unit_rows(const Var<T>& x) {
  const auto& v = x.value();
  const std::size_t d = v.dim(1);
  for (std::size_t i = 0; i < v.dim(0); ++i) {
    T sq = 0;
    for (std::size_t c = 0; c < d; ++c) sq += v[i * d + c] * v[i * d + c];
    if (!(sq > T{0})) throw nc::DomainError("contrastive_loss: zero-norm embedding at node " + std::to_string(i));
  }
  return x / nc::sqrt(nc::sum(x * x, 1, true));
}

}  // namespace

template <typename T>
Var<T> contrastive_loss(const Var<T>& original, const Var<T>& augmented, const NegativeSets& negatives) {
  if (original.shape().size() != 2 || original.shape() != augmented.shape()) {
    throw nc::ShapeError("contrastive_loss: " + nc::shape_to_string(original.shape()) + " vs " +
                         nc::shape_to_string(augmented.shape()));
  }
  const std::size_t n = original.shape()[0];
  if (negatives.size() != n || n == 0) throw nc::ShapeError("contrastive_loss: one negative set per node required");
  const std::size_t k = negatives[0].size();
  std::vector<std::size_t> gather;
  gather.reserve(n * (k + 1));
  for (std::size_t i = 0; i < n; ++i) {
    if (negatives[i].size() != k || k == 0) throw nc::ShapeError("contrastive_loss: negative sets must share a size >= 1");
    gather.push_back(i * n + i);
    for (std::size_t j : negatives[i]) {
      if (j == i || j >= n) throw std::invalid_argument("contrastive_loss: invalid negative index");
      gather.push_back(i * n + j);
    }
  }
  auto sims = nc::matmul(unit_rows(original), nc::transpose(unit_rows(augmented), 0, 1));
  auto logits = nc::reshape(nc::embedding<T>(nc::reshape(sims, {n * n, 1}), gather), {n, k + 1});
  auto positive = nc::slice(nc::softmax(logits, 1), 1, 0, 1);
  return nc::mul_scalar(nc::mean_all(nc::log(positive)), T{-1});
}

template Var<float> reconstruction_loss<float>(const DomainVars<float>&, const spectral::TriDomainSample&,
                                               const std::vector<spectral::Domain>&);
template Var<double> reconstruction_loss<double>(const DomainVars<double>&, const spectral::TriDomainSample&,
                                                 const std::vector<spectral::Domain>&);
template Var<float> contrastive_loss<float>(const Var<float>&, const Var<float>&, const NegativeSets&);
template Var<double> contrastive_loss<double>(const Var<double>&, const Var<double>&, const NegativeSets&);

}  // namespace fepcross::pretrain
