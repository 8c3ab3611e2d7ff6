// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fepcross/numcore/autodiff.hpp"
#include "fepcross/numcore/checkpoint.hpp"
#include "fepcross/numcore/parameters.hpp"
#include "fepcross/spectral/tri_domain.hpp"

namespace fepcross::encoder {

using numcore::ParameterStore;
using numcore::Tensor;
using numcore::TensorF;
using numcore::Var;
using spectral::Domain;
using spectral::TriDomainSample;

struct EncoderConfig {
  std::size_t history_steps = 288;
  std::size_t patches = 24;
  std::size_t d_model = 128;
  std::size_t heads = 4;
  std::size_t ff_multiplier = 4;
  /// Scale applied to DFT magnitudes when samples are built; <= 0 means 2 / history_steps.
  double amplitude_scale = 0.0;

  // Component switches used by the ablation ladder.
  bool use_frequency = true;
  bool use_cross_domain = true;
  bool use_cross_space = true;
  bool share_aggregators = false;

  std::size_t time_width() const { return history_steps / patches; }
  std::size_t freq_width() const { return history_steps / 2 / patches; }
  std::size_t width_of(Domain d) const { return d == Domain::kTime ? time_width() : freq_width(); }
  std::vector<Domain> domains() const;
  double effective_amplitude_scale() const;
  spectral::SampleOptions sample_options() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

/// Learnable state of the cross-domain spatial-temporal encoder, its
/// reconstruction heads and the domain-embedding aggregator.
template <typename T>
class EncoderModel {
 public:
  EncoderModel(EncoderConfig config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  ParameterStore<T>& params() { return params_; }
  const ParameterStore<T>& params() const { return params_; }
  const Var<T>& param(const std::string& name) const { return params_.get(name); }

  /// Two aggregator parameter prefixes (identical when shared).
  std::string aggregator_prefix(int which) const;

 private:
  EncoderConfig config_;
  ParameterStore<T> params_;
};

/// Per active domain (config().domains() order), one tensor each.
template <typename T>
using DomainVars = std::vector<Var<T>>;

template <typename T>
struct EncodeTrace {
  /// Softmax weights of the second cross-domain aggregator, [N, H, D*P, D*P].
  Tensor<T> aggregator_attention;
};

/// Patch embedding + positional + domain-type embeddings, with masked
/// positions replaced by the domain's mask token. Each output is [N, P, d].
template <typename T>
DomainVars<T> embed_patches(const TriDomainSample& sample, const EncoderModel<T>& model);

/// Per-domain TSLayer, cross-domain aggregator, per-domain graph convolution
/// over the row-stochastic adjacency, second cross-domain aggregator.
template <typename T>
DomainVars<T> encode(const TriDomainSample& sample, const TensorF& adjacency, const EncoderModel<T>& model,
                     EncodeTrace<T>* trace = nullptr);

/// Tokenwise linear heads back to patch widths.
template <typename T>
DomainVars<T> reconstruct(const DomainVars<T>& encoded, const EncoderModel<T>& model);

enum class PoolMode { kLinearConcat, kSum };
PoolMode parse_pool_mode(const std::string& name);

/// Mean over patches per domain, then a linear map of the concatenation
/// (kLinearConcat) or an elementwise sum (kSum). Result is [N, d].
template <typename T>
Var<T> pool_node_embedding(const DomainVars<T>& encoded, const EncoderModel<T>& model, PoolMode mode);

void save_encoder(const std::filesystem::path& dir, const EncoderModel<float>& model);
EncoderModel<float> load_encoder(const std::filesystem::path& dir);

/// Tensors stored under this prefix in every checkpoint that embeds an encoder.
inline constexpr const char* kEncoderPrefix = "encoder/";

extern template class EncoderModel<float>;
extern template class EncoderModel<double>;

}  // namespace fepcross::encoder
