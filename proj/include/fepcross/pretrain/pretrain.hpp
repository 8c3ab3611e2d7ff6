// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "fepcross/data/city.hpp"
#include "fepcross/encoder/encoder.hpp"
#include "fepcross/numcore/adam.hpp"

namespace fepcross::pretrain {

using encoder::EncoderModel;
using numcore::TensorF;

/// Raised when a loss or parameter turns non-finite during training.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PretrainConfig {
  double mask_ratio = 0.75;
  double alpha = 1.0;
  double learning_rate = 1e-4;
  double weight_decay = 0.0;
  std::size_t batch_size = 1;
  std::size_t epochs = 10;
  double negative_fraction = 0.10;
  /// Spacing of window starts in the training pool, in steps.
  std::size_t window_stride = 288;
  bool use_contrastive = true;
  /// Stops gradients through the amplitude-swapped branch.
  bool detach_augmented = false;
  std::uint64_t seed = 7;
  encoder::EncoderConfig encoder;

  void validate() const;
};

void to_json(nlohmann::json& j, const PretrainConfig& c);
void from_json(const nlohmann::json& j, PretrainConfig& c);

struct StepLosses {
  double total = 0.0;
  double reconstruction = 0.0;
  double contrastive = 0.0;
};

/// Loss of one batch of normalized [N, T_h] histories. When `backprop` is set,
/// gradients of the batch mean are accumulated into the model parameters.
StepLosses batch_losses(const std::vector<TensorF>& histories, const TensorF& adjacency,
                        const EncoderModel<float>& model, const PretrainConfig& config, std::uint64_t seed,
                        bool backprop);

/// One optimizer update on the batch; throws TrainingError on non-finite values.
StepLosses pretrain_step(const std::vector<TensorF>& histories, const TensorF& adjacency, EncoderModel<float>& model,
                         numcore::AdamState<float>& state, const PretrainConfig& config, std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss_total = 0.0;
  double loss_re = 0.0;
  double loss_con = 0.0;
  double wall_ms = 0.0;
};

void to_json(nlohmann::json& j, const EpochRecord& r);

struct PretrainResult {
  EncoderModel<float> model;
  std::vector<EpochRecord> log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Epoch loop over a fixed pool of source-city windows, z-scored with the
/// whole-series statistics of the source city.
PretrainResult pretrain_run(const data::TrafficCity& city, const PretrainConfig& config,
                            const EpochCallback& on_epoch = {});

/// Writes the encoder checkpoint, `pretrain_log.ndjson` and `pretrain_config.json`.
void write_pretrain_outputs(const std::filesystem::path& dir, const PretrainResult& result,
                            const PretrainConfig& config);

}  // namespace fepcross::pretrain
