// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/data/windows.hpp"

#include <random>
#include <string>

namespace fepcross::data {

namespace {

void require_fit(StepRange range, std::size_t span) {
  if (range.length() < span) {
    throw DataError("step range holds " + std::to_string(range.length()) + " steps, a window needs " +
                    std::to_string(span));
  }
}

}  // namespace

NormalizationStats stats_for(const TrafficCity& city, StepRange range) {
  const auto s = compute_stats(city, range);
  return {s.mean, s.std};
}

FewShotSplit few_shot_split(const TrafficCity& city, std::size_t days) {
  const std::size_t head = days * city.steps_per_day();
  if (city.steps() <= head) {
    throw DataError(city.name + ": " + std::to_string(city.steps()) + " steps cannot hold a " + std::to_string(days) +
                    "-day fine-tune window plus test data");
  }
  FewShotSplit split;
  split.finetune = {0, head};
  split.test = {head, city.steps()};
  split.stats = stats_for(city, split.finetune);
  return split;
}

Window make_window(const TrafficCity& city, std::size_t start, std::size_t history_steps, std::size_t future_steps,
                   const NormalizationStats& stats) {
  if (start + history_steps + future_steps > city.steps()) throw DataError("window runs past the end of the series");
  const std::size_t n = city.node_count();
  Window w;
  w.start = start;
  w.history = TensorF({n, history_steps});
  w.future = TensorF({n, future_steps, 1});
  w.future_raw = TensorF({n, future_steps, 1});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < history_steps; ++t) {
      w.history[i * history_steps + t] = stats.normalize(city.reading(start + t, i));
    }
    for (std::size_t t = 0; t < future_steps; ++t) {
      const float raw = city.reading(start + history_steps + t, i);
      w.future_raw[i * future_steps + t] = raw;
      w.future[i * future_steps + t] = stats.normalize(raw);
    }
  }
  return w;
}

std::vector<Window> sample_windows(const TrafficCity& city, std::size_t history_steps, std::size_t future_steps,
                                   StepRange range, std::size_t batch_size, std::uint64_t seed,
                                   const NormalizationStats& stats) {
  const std::size_t span = history_steps + future_steps;
  require_fit(range, span);
  if (range.end > city.steps()) throw DataError("step range exceeds the series");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(range.begin, range.end - span);
  std::vector<Window> out;
  out.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) out.push_back(make_window(city, pick(rng), history_steps, future_steps, stats));
  return out;
}

std::vector<std::size_t> window_starts(StepRange range, std::size_t history_steps, std::size_t future_steps,
                                       std::size_t stride) {
  const std::size_t span = history_steps + future_steps;
  require_fit(range, span);
  if (stride == 0) throw DataError("window stride must be positive");
  std::vector<std::size_t> starts;
  for (std::size_t s = range.begin; s + span <= range.end; s += stride) starts.push_back(s);
  return starts;
}

TensorF normalize_adjacency(const TensorF& adjacency) {
  if (adjacency.rank() != 2 || adjacency.dim(0) != adjacency.dim(1)) {
    throw DataError("normalize_adjacency: expected a square matrix, got " + numcore::shape_to_string(adjacency.shape()));
  }
  const std::size_t n = adjacency.dim(0);
  TensorF out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    double degree = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const float w = adjacency[i * n + j];
      if (w < 0.0f) throw DataError("normalize_adjacency: negative weight");
      degree += w;
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double w = adjacency[i * n + j] + (i == j ? 1.0 : 0.0);
      out[i * n + j] = static_cast<float>(w / degree);
    }
  }
  return out;
}

}  // namespace fepcross::data
