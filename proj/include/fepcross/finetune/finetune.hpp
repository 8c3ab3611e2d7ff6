// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <json.hpp>

#include "fepcross/data/windows.hpp"
#include "fepcross/encoder/encoder.hpp"
#include "fepcross/finetune/momentum_graph.hpp"
#include "fepcross/finetune/st_model.hpp"

namespace fepcross::finetune {

struct FinetuneConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  double enrich_mask_ratio = 0.25;
  std::size_t enrich_copies = 1;
  bool enrich_keep_recent = true;
  double tau = 0.1;
  std::size_t future_steps = 12;
  /// Spacing of window starts inside the fine-tune range.
  std::size_t window_stride = 12;
  /// Windows (evenly spaced over the pool) whose pooled embeddings feed the meta-graph.
  std::size_t probe_windows = 4;
  bool use_momentum = true;
  bool use_enrichment = true;
  bool freeze_encoder = true;
  std::uint64_t seed = 7;

  void validate() const;
};

void to_json(nlohmann::json& j, const FinetuneConfig& c);
void from_json(const nlohmann::json& j, FinetuneConfig& c);

/// Everything needed to forecast on the target city.
struct FinetunedModel {
  encoder::EncoderModel<float> encoder;
  STConfig st;
  /// "st/..." backbone and "head/..." forecasting layer.
  ParameterStore<float> params;
  MomentumGraph graph;
  /// Row-normalized target adjacency used by the encoder's graph convolution.
  TensorF encoder_adjacency;
  data::NormalizationStats stats;
  std::size_t future_steps = 12;
};

/// Deep-copies `encoder`, initializes the backbone and a zero forecasting head.
FinetunedModel init_finetuned(const encoder::EncoderModel<float>& encoder, const TensorF& adjacency,
                              const data::NormalizationStats& stats, const FinetuneConfig& config);

/// "sum"-pooled encoder embedding [N, d] of an unmasked normalized history.
Var<float> encoder_embedding(const FinetunedModel& model, const TensorF& history);

/// Normalized forecast [N, T_f, 1] from a cached embedding and the history.
Var<float> predict_normalized(const FinetunedModel& model, const Var<float>& embedding, const TensorF& history);

/// Forecast in raw speed units, [N, T_f, 1].
TensorF forecast(const FinetunedModel& model, const TensorF& history);

struct FinetuneEpoch {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::size_t train_windows = 0;
  std::size_t graph_k = 0;
  double wall_ms = 0.0;
};

void to_json(nlohmann::json& j, const FinetuneEpoch& e);

struct FinetuneResult {
  FinetunedModel model;
  std::vector<FinetuneEpoch> log;
};

/// Per epoch: regenerate the enriched set, one momentum update from the probe
/// windows, then Adam over the backbone and head on the normalized-target MSE.
FinetuneResult finetune_run(const data::TrafficCity& city, const data::FewShotSplit& split,
                            const encoder::EncoderModel<float>& encoder, const FinetuneConfig& config,
                            const std::function<void(const FinetuneEpoch&)>& on_epoch = {});

void save_finetuned(const std::filesystem::path& dir, const FinetunedModel& model);
FinetunedModel load_finetuned(const std::filesystem::path& dir);

/// Writes the checkpoint, `finetune_log.ndjson` and `finetune_config.json`.
void write_finetune_outputs(const std::filesystem::path& dir, const FinetuneResult& result,
                            const FinetuneConfig& config);

}  // namespace fepcross::finetune
