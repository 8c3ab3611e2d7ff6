// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/encoder/ts_layer.hpp"

#include <array>
#include <cmath>

namespace fepcross::encoder {

using numcore::Shape;
namespace nc = numcore;

template <typename T>
void TSLayer<T>::declare(ParameterStore<T>& params, const std::string& prefix, std::size_t d_model,
                         std::size_t ff_width, std::mt19937_64& rng) {
  const std::size_t d = d_model;
  params.add(prefix + "ln1/gain", Tensor<T>({d}, T{1}));
  params.add(prefix + "ln1/bias", Tensor<T>({d}));
  for (const char* name : {"query", "key", "value", "out"}) {
    params.add(prefix + "attn/" + name + "/weight", nc::xavier_uniform<T>({d, d}, d, d, rng));
    params.add(prefix + "attn/" + name + "/bias", Tensor<T>({d}));
  }
  params.add(prefix + "ln2/gain", Tensor<T>({d}, T{1}));
  params.add(prefix + "ln2/bias", Tensor<T>({d}));
  params.add(prefix + "ff1/weight", nc::xavier_uniform<T>({d, ff_width}, d, ff_width, rng));
  params.add(prefix + "ff1/bias", Tensor<T>({ff_width}));
  params.add(prefix + "ff2/weight", nc::xavier_uniform<T>({ff_width, d}, ff_width, d, rng));
  params.add(prefix + "ff2/bias", Tensor<T>({d}));
}

template <typename T>
Var<T> TSLayer<T>::forward(const ParameterStore<T>& params, const std::string& prefix, const Var<T>& x,
                           std::size_t heads, Tensor<T>* attention) {
  const Shape& s = x.shape();
  if (s.size() != 3) throw nc::ShapeError("TSLayer: expected [B, L, d], got " + nc::shape_to_string(s));
  const std::size_t batch = s[0], len = s[1], d = s[2];
  if (heads == 0 || d % heads != 0) throw nc::ShapeError("TSLayer: width " + std::to_string(d) + " not divisible by heads");
  const std::size_t dh = d / heads;
  auto p = [&](const char* name) { return params.get(prefix + name); };
  static constexpr std::array<std::size_t, 4> kSplitHeads = {0, 2, 1, 3};
  static constexpr std::array<std::size_t, 4> kKeysT = {0, 2, 3, 1};

  auto h = nc::layer_norm(x) * p("ln1/gain") + p("ln1/bias");
  auto project = [&](const char* w, const char* b) {
    return nc::reshape(nc::matmul(h, p(w)) + p(b), {batch, len, heads, dh});
  };
  auto q = nc::permute<T>(project("attn/query/weight", "attn/query/bias"), kSplitHeads);
  auto kt = nc::permute<T>(project("attn/key/weight", "attn/key/bias"), kKeysT);
  auto v = nc::permute<T>(project("attn/value/weight", "attn/value/bias"), kSplitHeads);
  auto scores = nc::mul_scalar(nc::matmul(q, kt), T{1} / std::sqrt(static_cast<T>(dh)));
  auto weights = nc::softmax(scores, 3);
  if (attention) *attention = weights.value();
  auto context = nc::reshape(nc::permute<T>(nc::matmul(weights, v), kSplitHeads), {batch, len, d});
  auto y = x + (nc::matmul(context, p("attn/out/weight")) + p("attn/out/bias"));

  auto h2 = nc::layer_norm(y) * p("ln2/gain") + p("ln2/bias");
  auto ff = nc::matmul(nc::relu(nc::matmul(h2, p("ff1/weight")) + p("ff1/bias")), p("ff2/weight")) + p("ff2/bias");
  return y + ff;
}

template struct TSLayer<float>;
template struct TSLayer<double>;

}  // namespace fepcross::encoder
