// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/finetune/st_model.hpp"

#include <array>

namespace fepcross::finetune {

namespace nc = numcore;

template <typename T>
void STModel<T>::declare(ParameterStore<T>& params, const std::string& prefix, const STConfig& config,
                         std::mt19937_64& rng) {
  const std::size_t d = config.d_model;
  const std::size_t c = config.channels;
  params.add(prefix + "start/weight", nc::xavier_uniform<T>({c, d}, c, d, rng));
  params.add(prefix + "start/bias", Tensor<T>({d}));
  for (std::size_t b = 0; b < config.dilations.size(); ++b) {
    const std::string blk = prefix + "block" + std::to_string(b) + "/";
    for (const char* gate : {"filter", "gate"}) {
      for (const char* tap : {"tap0", "tap1"}) {
        params.add(blk + gate + "/" + tap, nc::xavier_uniform<T>({d, d}, 2 * d, d, rng));
      }
      params.add(blk + gate + "/bias", Tensor<T>({d}));
    }
    for (std::size_t k = 0; k <= config.diffusion_order; ++k) {
      params.add(blk + "gconv/hop" + std::to_string(k), nc::xavier_uniform<T>({d, d}, d * (config.diffusion_order + 1), d, rng));
    }
    params.add(blk + "gconv/bias", Tensor<T>({d}));
    params.add(blk + "skip/weight", nc::xavier_uniform<T>({d, d}, d, d, rng));
    params.add(blk + "skip/bias", Tensor<T>({d}));
  }
  params.add(prefix + "end/weight", nc::xavier_uniform<T>({d, d}, d, d, rng));
  params.add(prefix + "end/bias", Tensor<T>({d}));
}

template <typename T>
Var<T> STModel<T>::sequence(const ParameterStore<T>& params, const std::string& prefix, const STConfig& config,
                            const Var<T>& input, const Var<T>& graph) {
  const auto& s = input.shape();
  if (s.size() != 3 || s[1] != config.in_steps || s[2] != config.channels) {
    throw nc::ShapeError("STModel: input " + nc::shape_to_string(s) + " does not match [N, " +
                         std::to_string(config.in_steps) + ", " + std::to_string(config.channels) + "]");
  }
  const std::size_t n = s[0], len = s[1], d = config.d_model;
  if (graph.shape() != nc::Shape{n, n}) {
    throw nc::ShapeError("STModel: graph " + nc::shape_to_string(graph.shape()) + " for " + std::to_string(n) + " nodes");
  }
  auto p = [&](const std::string& name) { return params.get(prefix + name); };
  auto h = nc::matmul(input, p("start/weight")) + p("start/bias");
  Var<T> skip;
  for (std::size_t b = 0; b < config.dilations.size(); ++b) {
    const std::string blk = "block" + std::to_string(b) + "/";
    const std::size_t dil = config.dilations[b];
    // x[t - dil] with zeros before the first step.
    Var<T> shifted;
    if (dil >= len) {
      shifted = nc::constant(Tensor<T>({n, len, d}));
    } else {
      const std::array<Var<T>, 2> parts = {nc::constant(Tensor<T>({n, dil, d})), nc::slice(h, 1, 0, len - dil)};
      shifted = nc::concat<T>(parts, 1);
    }
    auto conv = [&](const char* gate) {
      const std::string g = blk + gate + "/";
      return nc::matmul(h, p(g + "tap0")) + nc::matmul(shifted, p(g + "tap1")) + p(g + "bias");
    };
    auto z = nc::tanh(conv("filter")) * nc::sigmoid(conv("gate"));
    auto sk = nc::matmul(z, p(blk + "skip/weight")) + p(blk + "skip/bias");
    skip = skip.defined() ? skip + sk : sk;
    auto hop = z;
    auto mixed = nc::matmul(z, p(blk + "gconv/hop0"));
    for (std::size_t k = 1; k <= config.diffusion_order; ++k) {
      hop = nc::reshape(nc::matmul(graph, nc::reshape(hop, {n, len * d})), {n, len, d});
      mixed = mixed + nc::matmul(hop, p(blk + "gconv/hop" + std::to_string(k)));
    }
    h = mixed + p(blk + "gconv/bias") + h;
  }
  return nc::relu(skip);
}

template <typename T>
Var<T> STModel<T>::forward(const ParameterStore<T>& params, const std::string& prefix, const STConfig& config,
                           const Var<T>& input, const Var<T>& graph) {
  auto seq = sequence(params, prefix, config, input, graph);
  const std::size_t n = seq.shape()[0];
  auto last = nc::reshape(nc::slice(seq, 1, config.in_steps - 1, 1), {n, config.d_model});
  return nc::matmul(last, params.get(prefix + "end/weight")) + params.get(prefix + "end/bias");
}

template struct STModel<float>;
template struct STModel<double>;

}  // namespace fepcross::finetune
