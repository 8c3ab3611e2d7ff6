// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/finetune/finetune.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "fepcross/common/rng.hpp"
#include "fepcross/finetune/enrich.hpp"
#include "fepcross/numcore/adam.hpp"
#include "fepcross/pretrain/pretrain.hpp"

namespace fepcross::finetune {

namespace nc = numcore;
using nlohmann::json;

namespace {

enum : std::uint64_t { kInit = 11, kEnrich = 12, kShuffle = 13 };

constexpr const char* kStPrefix = "st/";
constexpr const char* kHeadPrefix = "head/";

encoder::EncoderModel<float> clone(const encoder::EncoderModel<float>& src) {
  encoder::EncoderModel<float> out(src.config(), 0);
  out.params().import_tensors(src.params().export_tensors(""), "");
  return out;
}

TensorF short_term_input(const TensorF& history, std::size_t steps) {
  const std::size_t n = history.dim(0), len = history.dim(1);
  TensorF out({n, steps, 1});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < steps; ++t) out[i * steps + t] = history[i * len + len - steps + t];
  return out;
}

}  // namespace

void FinetuneConfig::validate() const {
  if (!(enrich_mask_ratio >= 0.0 && enrich_mask_ratio < 1.0)) {
    throw spectral::ConfigError("enrich_mask_ratio must be in [0, 1)");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) throw spectral::ConfigError("tau must be in [0, 1]");
  if (batch_size == 0 || window_stride == 0 || future_steps == 0) {
    throw spectral::ConfigError("batch_size, window_stride and future_steps must be positive");
  }
}

void to_json(json& j, const FinetuneConfig& c) {
  j = json{{"learning_rate", c.learning_rate},
           {"weight_decay", c.weight_decay},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"enrich_mask_ratio", c.enrich_mask_ratio},
           {"enrich_copies", c.enrich_copies},
           {"enrich_keep_recent", c.enrich_keep_recent},
           {"tau", c.tau},
           {"future_steps", c.future_steps},
           {"window_stride", c.window_stride},
           {"probe_windows", c.probe_windows},
           {"use_momentum", c.use_momentum},
           {"use_enrichment", c.use_enrichment},
           {"freeze_encoder", c.freeze_encoder},
           {"seed", c.seed}};
}

void from_json(const json& j, FinetuneConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.enrich_mask_ratio = j.value("enrich_mask_ratio", c.enrich_mask_ratio);
  c.enrich_copies = j.value("enrich_copies", c.enrich_copies);
  c.enrich_keep_recent = j.value("enrich_keep_recent", c.enrich_keep_recent);
  c.tau = j.value("tau", c.tau);
  c.future_steps = j.value("future_steps", c.future_steps);
  c.window_stride = j.value("window_stride", c.window_stride);
  c.probe_windows = j.value("probe_windows", c.probe_windows);
  c.use_momentum = j.value("use_momentum", c.use_momentum);
  c.use_enrichment = j.value("use_enrichment", c.use_enrichment);
  c.freeze_encoder = j.value("freeze_encoder", c.freeze_encoder);
  c.seed = j.value("seed", c.seed);
}

void to_json(json& j, const FinetuneEpoch& e) {
  j = json{{"epoch", e.epoch}, {"loss", e.loss}, {"train_windows", e.train_windows}, {"graph_k", e.graph_k},
           {"wall_ms", e.wall_ms}};
}

FinetunedModel init_finetuned(const encoder::EncoderModel<float>& encoder, const TensorF& adjacency,
                              const data::NormalizationStats& stats, const FinetuneConfig& config) {
  config.validate();
  const auto& enc = encoder.config();
  FinetunedModel m{clone(encoder), {}, {}, initial_graph(adjacency, config.tau), data::normalize_adjacency(adjacency),
                   stats, config.future_steps};
  m.st.d_model = enc.d_model;
  m.st.in_steps = enc.time_width();
  std::mt19937_64 rng(derive_seed(config.seed, {kInit}));
  STModel<float>::declare(m.params, kStPrefix, m.st, rng);
  m.params.add(std::string(kHeadPrefix) + "weight", nc::TensorF({2 * enc.d_model, config.future_steps}));
  m.params.add(std::string(kHeadPrefix) + "bias", nc::TensorF({config.future_steps}));
  return m;
}

Var<float> encoder_embedding(const FinetunedModel& model, const TensorF& history) {
  const auto sample = spectral::make_sample(history, model.encoder.config().sample_options());
  return encoder::pool_node_embedding(encoder::encode(sample, model.encoder_adjacency, model.encoder), model.encoder,
                                      encoder::PoolMode::kSum);
}

Var<float> predict_normalized(const FinetunedModel& model, const Var<float>& embedding, const TensorF& history) {
  const std::size_t n = history.dim(0);
  auto x = nc::constant(short_term_input(history, model.st.in_steps));
  auto h_st = STModel<float>::forward(model.params, kStPrefix, model.st, x, nc::constant(model.graph.a_hat));
  const std::array<Var<float>, 2> parts = {embedding, h_st};
  auto joined = nc::concat<float>(parts, 1);
  auto y = nc::matmul(joined, model.params.get(std::string(kHeadPrefix) + "weight")) +
           model.params.get(std::string(kHeadPrefix) + "bias");
  return nc::reshape(y, {n, model.future_steps, 1});
}

TensorF forecast(const FinetunedModel& model, const TensorF& history) {
  auto y = predict_normalized(model, encoder_embedding(model, history), history).value();
  for (float& v : y.data()) v = model.stats.denormalize(v);
  return y;
}

FinetuneResult finetune_run(const data::TrafficCity& city, const data::FewShotSplit& split,
                            const encoder::EncoderModel<float>& encoder, const FinetuneConfig& config,
                            const std::function<void(const FinetuneEpoch&)>& on_epoch) {
  config.validate();
  const auto& enc = encoder.config();
  FinetuneResult result{init_finetuned(encoder, city.adjacency, split.stats, config), {}};
  auto& model = result.model;

  std::vector<data::Window> originals;
  for (std::size_t s : data::window_starts(split.finetune, enc.history_steps, config.future_steps, config.window_stride)) {
    originals.push_back(data::make_window(city, s, enc.history_steps, config.future_steps, split.stats));
  }
  spdlog::info("finetune: {} windows in the {}-step few-shot range of {}, {} epochs", originals.size(),
               split.finetune.length(), city.name, config.epochs);

  // With a frozen encoder the embeddings of the original windows never change.
  std::vector<Var<float>> cached;
  if (config.freeze_encoder) {
    for (const auto& w : originals) cached.push_back(nc::constant(encoder_embedding(model, w.history).value()));
  }
  std::vector<std::size_t> probes;
  const std::size_t probe_count = std::min(std::max<std::size_t>(1, config.probe_windows), originals.size());
  for (std::size_t i = 0; i < probe_count; ++i) probes.push_back(i * originals.size() / probe_count);

  auto trainable = model.params.vars();
  if (!config.freeze_encoder) {
    for (auto& v : model.encoder.params().vars()) trainable.push_back(v);
  }
  nc::AdamState<float> state;
  state.options.learning_rate = config.learning_rate;
  state.options.weight_decay = config.weight_decay;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<data::Window> train = originals;
    if (config.use_enrichment && config.enrich_copies > 0) {
      train = enrich_training_data(originals, model.encoder, model.encoder_adjacency,
                                   {config.enrich_mask_ratio, config.enrich_copies, config.enrich_keep_recent},
                                   derive_seed(config.seed, {kEnrich, epoch}));
    }
    std::vector<Var<float>> embeddings;
    if (config.freeze_encoder) {
      embeddings = cached;
      for (std::size_t i = originals.size(); i < train.size(); ++i) {
        embeddings.push_back(nc::constant(encoder_embedding(model, train[i].history).value()));
      }
    }

    if (config.use_momentum) {
      TensorF mean_h;
      for (std::size_t p : probes) {
        const auto h = config.freeze_encoder ? cached[p].value() : encoder_embedding(model, originals[p].history).value();
        if (mean_h.empty()) mean_h = TensorF(h.shape());
        for (std::size_t i = 0; i < h.size(); ++i) mean_h[i] += h[i] / static_cast<float>(probes.size());
      }
      momentum_update(model.graph, build_meta_graph(mean_h), config.tau);
    }

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(config.seed, {kShuffle, epoch}));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t end = std::min(order.size(), b + config.batch_size);
      const float share = 1.0f / static_cast<float>(end - b);
      for (auto& v : trainable) v.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = b; i < end; ++i) {
        const auto& w = train[order[i]];
        auto h = config.freeze_encoder ? embeddings[order[i]] : encoder_embedding(model, w.history);
        auto loss = nc::mse(predict_normalized(model, h, w.history), nc::constant(w.future));
        batch_loss += loss.item() * share;
        nc::backward(nc::mul_scalar(loss, share));
      }
      if (!std::isfinite(batch_loss)) {
        throw pretrain::TrainingError("non-finite fine-tuning loss in epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(batches) + " (seed " + std::to_string(config.seed) + ")");
      }
      nc::adam_step<float>(trainable, state);
      loss_sum += batch_loss;
      ++batches;
    }
    FinetuneEpoch rec{epoch, batches ? loss_sum / static_cast<double>(batches) : 0.0, train.size(), model.graph.k,
                      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()};
    spdlog::debug("finetune epoch {}: loss {:.5f} ({} windows, {:.0f} ms)", epoch, rec.loss, rec.train_windows, rec.wall_ms);
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

void save_finetuned(const std::filesystem::path& dir, const FinetunedModel& model) {
  std::filesystem::create_directories(dir);
  auto tensors = model.encoder.params().export_tensors(encoder::kEncoderPrefix);
  tensors.merge(model.params.export_tensors(""));
  tensors.emplace("graph/A_hat", model.graph.a_hat);
  tensors.emplace("graph/encoder_adjacency", model.encoder_adjacency);
  nc::save_checkpoint(dir, tensors);
  const json meta = {{"encoder", model.encoder.config()},
                     {"st",
                      {{"d_model", model.st.d_model},
                       {"in_steps", model.st.in_steps},
                       {"channels", model.st.channels},
                       {"dilations", model.st.dilations},
                       {"diffusion_order", model.st.diffusion_order}}},
                     {"graph", {{"k", model.graph.k}, {"tau", model.graph.tau}}},
                     {"stats", {{"mean", model.stats.mean}, {"std", model.stats.std}}},
                     {"future_steps", model.future_steps}};
  std::ofstream(dir / "finetune.json") << meta.dump(2) << '\n';
}

FinetunedModel load_finetuned(const std::filesystem::path& dir) {
  std::ifstream in(dir / "finetune.json");
  if (!in) throw nc::CheckpointError("missing " + (dir / "finetune.json").string());
  const json meta = json::parse(in);
  if (!meta.contains("stats")) throw nc::CheckpointError("finetune.json has no normalization stats");
  const auto tensors = nc::load_checkpoint(dir);
  encoder::EncoderModel<float> enc(meta.at("encoder").get<encoder::EncoderConfig>(), 0);
  enc.params().import_tensors(tensors, encoder::kEncoderPrefix);
  auto find = [&](const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw nc::CheckpointError("checkpoint is missing " + name);
    return it->second;
  };
  STConfig st;
  const auto& s = meta.at("st");
  st.d_model = s.at("d_model");
  st.in_steps = s.at("in_steps");
  st.channels = s.at("channels");
  st.dilations = s.at("dilations").get<std::vector<std::size_t>>();
  st.diffusion_order = s.at("diffusion_order");
  const std::size_t future = meta.at("future_steps");
  FinetunedModel m{std::move(enc),
                   st,
                   {},
                   {find("graph/A_hat"), meta.at("graph").at("k"), meta.at("graph").at("tau")},
                   find("graph/encoder_adjacency"),
                   {meta.at("stats").at("mean"), meta.at("stats").at("std")},
                   future};
  std::mt19937_64 rng(0);
  STModel<float>::declare(m.params, kStPrefix, m.st, rng);
  m.params.add(std::string(kHeadPrefix) + "weight", nc::TensorF({2 * st.d_model, future}));
  m.params.add(std::string(kHeadPrefix) + "bias", nc::TensorF({future}));
  m.params.import_tensors(tensors, "");
  return m;
}

void write_finetune_outputs(const std::filesystem::path& dir, const FinetuneResult& result,
                            const FinetuneConfig& config) {
  save_finetuned(dir, result.model);
  std::ofstream log(dir / "finetune_log.ndjson");
  for (const auto& e : result.log) log << json(e).dump() << '\n';
  std::ofstream(dir / "finetune_config.json") << json(config).dump(2) << '\n';
  if (!log) throw std::runtime_error("failed to write " + (dir / "finetune_log.ndjson").string());
}

}  // namespace fepcross::finetune
