// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/encoder/encoder.hpp"

#include <fstream>
#include <random>

#include "fepcross/encoder/ts_layer.hpp"

namespace fepcross::encoder {

namespace nc = numcore;
using nlohmann::json;

std::vector<Domain> EncoderConfig::domains() const {
  if (use_frequency) return {Domain::kTime, Domain::kAmplitude, Domain::kPhase};
  return {Domain::kTime};
}

double EncoderConfig::effective_amplitude_scale() const {
  return amplitude_scale > 0.0 ? amplitude_scale : 2.0 / static_cast<double>(history_steps);
}

spectral::SampleOptions EncoderConfig::sample_options() const {
  return {patches, effective_amplitude_scale()};
}

void EncoderConfig::validate() const {
  spectral::validate_layout(history_steps, patches);
  if (d_model == 0 || heads == 0 || d_model % heads != 0) {
    throw spectral::ConfigError("d_model " + std::to_string(d_model) + " must be a positive multiple of heads");
  }
  if (ff_multiplier == 0) throw spectral::ConfigError("ff_multiplier must be positive");
}

void to_json(json& j, const EncoderConfig& c) {
  j = json{{"history_steps", c.history_steps},     {"patches", c.patches},
           {"d_model", c.d_model},                 {"heads", c.heads},
           {"ff_multiplier", c.ff_multiplier},     {"amplitude_scale", c.amplitude_scale},
           {"use_frequency", c.use_frequency},     {"use_cross_domain", c.use_cross_domain},
           {"use_cross_space", c.use_cross_space}, {"share_aggregators", c.share_aggregators}};
}

void from_json(const json& j, EncoderConfig& c) {
  c.history_steps = j.value("history_steps", c.history_steps);
  c.patches = j.value("patches", c.patches);
  c.d_model = j.value("d_model", c.d_model);
  c.heads = j.value("heads", c.heads);
  c.ff_multiplier = j.value("ff_multiplier", c.ff_multiplier);
  c.amplitude_scale = j.value("amplitude_scale", c.amplitude_scale);
  c.use_frequency = j.value("use_frequency", c.use_frequency);
  c.use_cross_domain = j.value("use_cross_domain", c.use_cross_domain);
  c.use_cross_space = j.value("use_cross_space", c.use_cross_space);
  c.share_aggregators = j.value("share_aggregators", c.share_aggregators);
}

template <typename T>
EncoderModel<T>::EncoderModel(EncoderConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.d_model;
  const auto domains = config_.domains();
  for (Domain dom : domains) {
    const std::string name = spectral::domain_name(dom);
    const std::size_t w = config_.width_of(dom);
    params_.add("embed/" + name + "/weight", nc::xavier_uniform<T>({w, d}, w, d, rng));
    params_.add("embed/" + name + "/bias", Tensor<T>({d}));
    params_.add("mask_token/" + name, nc::normal_init<T>({d}, 0.02, rng));
  }
  params_.add("position_embedding", nc::normal_init<T>({config_.patches, d}, 0.02, rng));
  params_.add("domain_embedding", nc::normal_init<T>({3, d}, 0.02, rng));
  const std::size_t ff = config_.ff_multiplier * d;
  for (Domain dom : domains) TSLayer<T>::declare(params_, std::string("ts/") + spectral::domain_name(dom) + "/", d, ff, rng);
  if (config_.use_cross_domain) {
    TSLayer<T>::declare(params_, aggregator_prefix(1), d, ff, rng);
    if (!config_.share_aggregators) TSLayer<T>::declare(params_, aggregator_prefix(2), d, ff, rng);
  }
  if (config_.use_cross_space) {
    for (Domain dom : domains) {
      params_.add(std::string("gcn/") + spectral::domain_name(dom) + "/weight", nc::xavier_uniform<T>({d, d}, d, d, rng));
    }
  }
  for (Domain dom : domains) {
    const std::string name = spectral::domain_name(dom);
    const std::size_t w = config_.width_of(dom);
    params_.add("head/" + name + "/weight", nc::xavier_uniform<T>({d, w}, d, w, rng));
    params_.add("head/" + name + "/bias", Tensor<T>({w}));
  }
  const std::size_t concat = domains.size() * d;
  params_.add("pool/weight", nc::xavier_uniform<T>({concat, d}, concat, d, rng));
  params_.add("pool/bias", Tensor<T>({d}));
}

template <typename T>
std::string EncoderModel<T>::aggregator_prefix(int which) const {
  if (which == 1 || config_.share_aggregators) return "cda1/";
  return "cda2/";
}

namespace {

template <typename T>
Var<T> mask_column(const spectral::MaskGrid& grid, bool masked_value) {
  Tensor<T> m({grid.nodes(), grid.patches(), 1});
  for (std::size_t i = 0; i < grid.nodes(); ++i) {
    for (std::size_t p = 0; p < grid.patches(); ++p) {
      m[i * grid.patches() + p] = (grid.masked(i, p) == masked_value) ? T{1} : T{0};
    }
  }
  return nc::constant(std::move(m));
}

}  // namespace

template <typename T>
DomainVars<T> embed_patches(const TriDomainSample& sample, const EncoderModel<T>& model) {
  const auto& cfg = model.config();
  const std::size_t d = cfg.d_model;
  if (sample.patches() != cfg.patches) {
    throw nc::ShapeError("embed_patches: sample has " + std::to_string(sample.patches()) + " patches, model expects " +
                         std::to_string(cfg.patches));
  }
  auto positions = model.param("position_embedding");
  DomainVars<T> out;
  for (Domain dom : cfg.domains()) {
    const std::string name = spectral::domain_name(dom);
    const TensorF& raw = sample.patches_of(dom);
    if (raw.rank() != 3 || raw.dim(2) != cfg.width_of(dom)) {
      throw nc::ShapeError("embed_patches: " + name + " patches " + nc::shape_to_string(raw.shape()) +
                           " do not match width " + std::to_string(cfg.width_of(dom)));
    }
    auto patches = nc::constant(raw.template cast<T>());
    auto projected = nc::matmul(patches, model.param("embed/" + name + "/weight")) + model.param("embed/" + name + "/bias");
    const std::size_t dom_index[] = {static_cast<std::size_t>(dom)};
    auto dom_row = nc::reshape(nc::embedding<T>(model.param("domain_embedding"), dom_index), {d});
    auto keep = mask_column<T>(sample.mask(dom), false);
    auto masked = mask_column<T>(sample.mask(dom), true);
    auto tokens = projected * keep + model.param("mask_token/" + name) * masked;
    out.push_back(nc::add(nc::add(tokens, positions), dom_row));
  }
  return out;
}

template <typename T>
DomainVars<T> encode(const TriDomainSample& sample, const TensorF& adjacency, const EncoderModel<T>& model,
                     EncodeTrace<T>* trace) {
  const auto& cfg = model.config();
  const std::size_t n = sample.nodes();
  const std::size_t p = cfg.patches;
  const std::size_t d = cfg.d_model;
  if (adjacency.rank() != 2 || adjacency.dim(0) != n || adjacency.dim(1) != n) {
    throw nc::ShapeError("encode: adjacency " + nc::shape_to_string(adjacency.shape()) + " does not match " +
                         std::to_string(n) + " nodes");
  }
  const auto domains = cfg.domains();
  DomainVars<T> h = embed_patches(sample, model);
  for (std::size_t k = 0; k < domains.size(); ++k) {
    h[k] = TSLayer<T>::forward(model.params(), std::string("ts/") + spectral::domain_name(domains[k]) + "/", h[k],
                               cfg.heads);
  }
  const std::vector<std::size_t> sizes(domains.size(), p);
  auto aggregate = [&](int which, Tensor<T>* attention) {
    auto joined = nc::concat<T>(h, 1);
    auto mixed = TSLayer<T>::forward(model.params(), model.aggregator_prefix(which), joined, cfg.heads, attention);
    h = nc::split<T>(mixed, sizes, 1);
  };
  if (cfg.use_cross_domain) aggregate(1, nullptr);
  if (cfg.use_cross_space) {
    auto a = nc::constant(adjacency.template cast<T>());
    for (std::size_t k = 0; k < domains.size(); ++k) {
      auto mixed = nc::matmul(a, nc::reshape(h[k], {n, p * d}));
      auto weight = model.param(std::string("gcn/") + spectral::domain_name(domains[k]) + "/weight");
      h[k] = nc::relu(nc::matmul(nc::reshape(mixed, {n, p, d}), weight));
    }
  }
  if (cfg.use_cross_domain) aggregate(2, trace ? &trace->aggregator_attention : nullptr);
  return h;
}

template <typename T>
DomainVars<T> reconstruct(const DomainVars<T>& encoded, const EncoderModel<T>& model) {
  const auto domains = model.config().domains();
  if (encoded.size() != domains.size()) throw nc::ShapeError("reconstruct: domain count mismatch");
  DomainVars<T> out;
  for (std::size_t k = 0; k < domains.size(); ++k) {
    const std::string name = spectral::domain_name(domains[k]);
    out.push_back(nc::matmul(encoded[k], model.param("head/" + name + "/weight")) + model.param("head/" + name + "/bias"));
  }
  return out;
}

PoolMode parse_pool_mode(const std::string& name) {
  if (name == "linear-concat") return PoolMode::kLinearConcat;
  if (name == "sum") return PoolMode::kSum;
  throw std::invalid_argument("unknown pooling mode '" + name + "'");
}

template <typename T>
Var<T> pool_node_embedding(const DomainVars<T>& encoded, const EncoderModel<T>& model, PoolMode mode) {
  if (encoded.empty()) throw nc::ShapeError("pool_node_embedding: no domains");
  DomainVars<T> pooled;
  for (const auto& h : encoded) pooled.push_back(nc::mean(h, 1));
  if (mode == PoolMode::kSum) {
    Var<T> total = pooled[0];
    for (std::size_t k = 1; k < pooled.size(); ++k) total = total + pooled[k];
    return total;
  }
  auto joined = nc::concat<T>(pooled, 1);
  return nc::matmul(joined, model.param("pool/weight")) + model.param("pool/bias");
}

void save_encoder(const std::filesystem::path& dir, const EncoderModel<float>& model) {
  nc::save_checkpoint(dir, model.params().export_tensors(kEncoderPrefix));
  std::ofstream(dir / "encoder.json") << json(model.config()).dump(2) << '\n';
}

EncoderModel<float> load_encoder(const std::filesystem::path& dir) {
  std::ifstream in(dir / "encoder.json");
  if (!in) throw nc::CheckpointError("missing " + (dir / "encoder.json").string());
  json j;
  in >> j;
  EncoderModel<float> model(j.get<EncoderConfig>(), 0);
  model.params().import_tensors(nc::load_checkpoint(dir), kEncoderPrefix);
  return model;
}

template class EncoderModel<float>;
template class EncoderModel<double>;

#define FEPCROSS_INSTANTIATE_ENCODER(T)                                                                    \
  template DomainVars<T> embed_patches<T>(const TriDomainSample&, const EncoderModel<T>&);                 \
  template DomainVars<T> encode<T>(const TriDomainSample&, const TensorF&, const EncoderModel<T>&,         \
                                   EncodeTrace<T>*);                                                       \
  template DomainVars<T> reconstruct<T>(const DomainVars<T>&, const EncoderModel<T>&);                     \
  template Var<T> pool_node_embedding<T>(const DomainVars<T>&, const EncoderModel<T>&, PoolMode);

FEPCROSS_INSTANTIATE_ENCODER(float)
FEPCROSS_INSTANTIATE_ENCODER(double)

}  // namespace fepcross::encoder
