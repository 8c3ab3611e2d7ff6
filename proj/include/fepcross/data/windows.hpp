// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "fepcross/data/city.hpp"

namespace fepcross::data {

/// z-score transform; a zero std leaves values centered but unscaled.
struct NormalizationStats {
  double mean = 0.0;
  double std = 1.0;

  double scale() const { return std > 1e-12 ? std : 1.0; }
  float normalize(float x) const { return static_cast<float>((x - mean) / scale()); }
  float denormalize(float z) const { return static_cast<float>(z * scale() + mean); }
};

/// Target-city partition: fine-tune window at the head, test window after it.
struct FewShotSplit {
  StepRange finetune;
  StepRange test;
  NormalizationStats stats;  // from the fine-tune range only
};

FewShotSplit few_shot_split(const TrafficCity& city, std::size_t days = 2);

NormalizationStats stats_for(const TrafficCity& city, StepRange range);

/// One forecasting example. history is [N, T_h]; futures are [N, T_f, 1].
struct Window {
  std::size_t start = 0;
  TensorF history;
  TensorF future;
  TensorF future_raw;
};

Window make_window(const TrafficCity& city, std::size_t start, std::size_t history_steps, std::size_t future_steps,
                   const NormalizationStats& stats);

/// `batch_size` windows with uniformly drawn starts; each spans
/// history_steps + future_steps consecutive steps inside `range`.
std::vector<Window> sample_windows(const TrafficCity& city, std::size_t history_steps, std::size_t future_steps,
                                   StepRange range, std::size_t batch_size, std::uint64_t seed,
                                   const NormalizationStats& stats);

/// Every start in `range` at multiples of `stride` whose window fits.
std::vector<std::size_t> window_starts(StepRange range, std::size_t history_steps, std::size_t future_steps,
                                       std::size_t stride);

/// D^{-1}(A + I): row-stochastic with self-loops.
TensorF normalize_adjacency(const TensorF& adjacency);

}  // namespace fepcross::data
