// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/pretrain/pretrain.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "fepcross/common/rng.hpp"
#include "fepcross/data/windows.hpp"
#include "fepcross/pretrain/losses.hpp"

namespace fepcross::pretrain {

namespace nc = numcore;
using nlohmann::json;

namespace {

// Seed-derivation tags.
enum : std::uint64_t { kInit = 1, kShuffle = 2, kStep = 3, kReconMask = 4, kSwap = 5, kViewA = 6, kViewB = 7, kNegatives = 8 };

}  // namespace

void PretrainConfig::validate() const {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw spectral::ConfigError("pretrain mask_ratio must be in (0, 1)");
  if (!(alpha >= 0.0)) throw spectral::ConfigError("alpha must be non-negative");
  if (!(negative_fraction > 0.0 && negative_fraction <= 1.0)) {
    throw spectral::ConfigError("negative_fraction must be in (0, 1]");
  }
  if (batch_size == 0 || window_stride == 0) throw spectral::ConfigError("batch_size and window_stride must be positive");
  if (use_contrastive && !encoder.use_frequency) {
    throw spectral::ConfigError("the contrastive objective needs the frequency domains");
  }
  encoder.validate();
}

void to_json(json& j, const PretrainConfig& c) {
  j = json{{"mask_ratio", c.mask_ratio},
           {"alpha", c.alpha},
           {"learning_rate", c.learning_rate},
           {"weight_decay", c.weight_decay},
           {"batch_size", c.batch_size},
           {"epochs", c.epochs},
           {"negative_fraction", c.negative_fraction},
           {"window_stride", c.window_stride},
           {"use_contrastive", c.use_contrastive},
           {"detach_augmented", c.detach_augmented},
           {"seed", c.seed},
           {"encoder", c.encoder}};
}

void from_json(const json& j, PretrainConfig& c) {
  c.mask_ratio = j.value("mask_ratio", c.mask_ratio);
  c.alpha = j.value("alpha", c.alpha);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.negative_fraction = j.value("negative_fraction", c.negative_fraction);
  c.window_stride = j.value("window_stride", c.window_stride);
  c.use_contrastive = j.value("use_contrastive", c.use_contrastive);
  c.detach_augmented = j.value("detach_augmented", c.detach_augmented);
  c.seed = j.value("seed", c.seed);
  if (j.contains("encoder")) j.at("encoder").get_to(c.encoder);
}

void to_json(json& j, const EpochRecord& r) {
  j = json{{"epoch", r.epoch}, {"loss_total", r.loss_total}, {"loss_re", r.loss_re}, {"loss_con", r.loss_con},
           {"wall_ms", r.wall_ms}};
}

StepLosses batch_losses(const std::vector<TensorF>& histories, const TensorF& adjacency,
                        const EncoderModel<float>& model, const PretrainConfig& config, std::uint64_t seed,
                        bool backprop) {
  if (histories.empty()) throw std::invalid_argument("batch_losses: empty batch");
  const auto& enc = model.config();
  const auto domains = enc.domains();
  const auto options = enc.sample_options();
  const float share = 1.0f / static_cast<float>(histories.size());
  StepLosses out;
  for (std::size_t w = 0; w < histories.size(); ++w) {
    const auto base = spectral::make_sample(histories[w], options);
    const auto masked = spectral::apply_mask(base, config.mask_ratio, derive_seed(seed, {kReconMask, w}));
    auto l_re = reconstruction_loss(encoder::reconstruct(encoder::encode(masked, adjacency, model), model), masked, domains);
    auto total = l_re;
    double con = 0.0;
    if (config.use_contrastive) {
      const auto swapped = spectral::swap_node_amplitudes(base, derive_seed(seed, {kSwap, w}));
      const auto view_a = spectral::apply_mask(base, config.mask_ratio, derive_seed(seed, {kViewA, w}));
      const auto view_b = spectral::apply_mask(swapped.sample, config.mask_ratio, derive_seed(seed, {kViewB, w}));
      const auto pool = encoder::PoolMode::kLinearConcat;
      auto h_a = encoder::pool_node_embedding(encoder::encode(view_a, adjacency, model), model, pool);
      auto h_b = encoder::pool_node_embedding(encoder::encode(view_b, adjacency, model), model, pool);
      if (config.detach_augmented) h_b = nc::constant(h_b.value());
      const auto negatives =
          sample_negatives(base.nodes(), config.negative_fraction, derive_seed(seed, {kNegatives, w}));
      auto l_con = contrastive_loss(h_a, h_b, negatives);
      con = l_con.item();
      if (config.alpha != 0.0) total = total + nc::mul_scalar(l_con, static_cast<float>(config.alpha));
    }
    out.reconstruction += l_re.item() * share;
    out.contrastive += con * share;
    out.total += total.item() * share;
    if (backprop) nc::backward(nc::mul_scalar(total, share));
  }
  return out;
}

StepLosses pretrain_step(const std::vector<TensorF>& histories, const TensorF& adjacency, EncoderModel<float>& model,
                         nc::AdamState<float>& state, const PretrainConfig& config, std::uint64_t seed) {
  model.params().zero_grad();
  const auto losses = batch_losses(histories, adjacency, model, config, seed, true);
  if (!std::isfinite(losses.total)) {
    throw TrainingError("non-finite pretraining loss at step " + std::to_string(state.step) + " (batch seed " +
                        std::to_string(seed) + "): total=" + std::to_string(losses.total) +
                        " re=" + std::to_string(losses.reconstruction) + " con=" + std::to_string(losses.contrastive));
  }
  auto params = model.params().vars();
  nc::adam_step<float>(params, state);
  if (!model.params().all_finite()) {
    throw TrainingError("non-finite encoder parameters after step " + std::to_string(state.step) + " (batch seed " +
                        std::to_string(seed) + ")");
  }
  return losses;
}

PretrainResult pretrain_run(const data::TrafficCity& city, const PretrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const auto& enc = config.encoder;
  const data::StepRange all{0, city.steps()};
  const auto stats = data::stats_for(city, all);
  const auto adjacency = data::normalize_adjacency(city.adjacency);
  const auto starts = data::window_starts(all, enc.history_steps, 0, config.window_stride);
  std::vector<TensorF> pool;
  pool.reserve(starts.size());
  for (std::size_t s : starts) pool.push_back(data::make_window(city, s, enc.history_steps, 0, stats).history);
  spdlog::info("pretrain: {} windows of {} steps from {} ({} nodes), {} epochs", pool.size(), enc.history_steps,
               city.name, city.node_count(), config.epochs);

  PretrainResult result{EncoderModel<float>(enc, derive_seed(config.seed, {kInit})), {}};
  nc::AdamState<float> state;
  state.options.learning_rate = config.learning_rate;
  state.options.weight_decay = config.weight_decay;

  std::vector<std::size_t> order(pool.size());
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(config.seed, {kShuffle, epoch}));
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      std::vector<TensorF> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + config.batch_size); ++i) batch.push_back(pool[order[i]]);
      const auto l = pretrain_step(batch, adjacency, result.model, state, config, derive_seed(config.seed, {kStep, step++}));
      rec.loss_total += l.total;
      rec.loss_re += l.reconstruction;
      rec.loss_con += l.contrastive;
      ++batches;
    }
    rec.loss_total /= static_cast<double>(batches);
    rec.loss_re /= static_cast<double>(batches);
    rec.loss_con /= static_cast<double>(batches);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    spdlog::debug("pretrain epoch {}: total {:.5f} re {:.5f} con {:.5f} ({:.0f} ms)", epoch, rec.loss_total, rec.loss_re,
                  rec.loss_con, rec.wall_ms);
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

void write_pretrain_outputs(const std::filesystem::path& dir, const PretrainResult& result,
                            const PretrainConfig& config) {
  std::filesystem::create_directories(dir);
  encoder::save_encoder(dir, result.model);
  std::ofstream log(dir / "pretrain_log.ndjson");
  for (const auto& r : result.log) log << json(r).dump() << '\n';
  std::ofstream(dir / "pretrain_config.json") << json(config).dump(2) << '\n';
  if (!log) throw std::runtime_error("failed to write " + (dir / "pretrain_log.ndjson").string());
}

}  // namespace fepcross::pretrain
