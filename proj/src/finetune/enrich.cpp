// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/finetune/enrich.hpp"

#include <random>

#include "fepcross/common/rng.hpp"

namespace fepcross::finetune {

namespace nc = numcore;

TensorF enrich_history(const TensorF& history, const encoder::EncoderModel<float>& model, const TensorF& adjacency,
                       double mask_ratio, std::uint64_t seed, spectral::MaskGrid* time_mask,
                       bool keep_recent_patch) {
  const auto& cfg = model.config();
  if (history.rank() != 2 || history.dim(1) != cfg.history_steps) {
    throw nc::ShapeError("enrich_history: history " + nc::shape_to_string(history.shape()) + " vs encoder window of " +
                         std::to_string(cfg.history_steps) + " steps");
  }
  auto sample = spectral::apply_mask(spectral::make_sample(history, cfg.sample_options()), mask_ratio, seed);
  auto& grid = sample.mask(spectral::Domain::kTime);
  if (keep_recent_patch && grid.patches() > 1) {
    const std::size_t last = grid.patches() - 1;
    std::mt19937_64 rng(derive_seed(seed, {1}));
    for (std::size_t n = 0; n < grid.nodes(); ++n) {
      if (!grid.masked(n, last)) continue;
      std::vector<std::size_t> free;
      for (std::size_t p = 0; p < last; ++p) {
        if (!grid.masked(n, p)) free.push_back(p);
      }
      grid.set(n, last, false);
      if (!free.empty()) grid.set(n, free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)], true);
    }
  }
  TensorF out = history;
  if (time_mask) *time_mask = grid;
  if (grid.total() == 0) return out;
  const auto rec = encoder::reconstruct(encoder::encode(sample, adjacency, model), model);
  const auto& time = rec[0].value();  // time is always the first active domain
  const std::size_t width = cfg.time_width();
  const std::size_t steps = cfg.history_steps;
  for (std::size_t n = 0; n < grid.nodes(); ++n) {
    for (std::size_t p = 0; p < grid.patches(); ++p) {
      if (!grid.masked(n, p)) continue;
      for (std::size_t c = 0; c < width; ++c) out[n * steps + p * width + c] = time[(n * grid.patches() + p) * width + c];
    }
  }
  return out;
}

std::vector<data::Window> enrich_training_data(const std::vector<data::Window>& windows,
                                               const encoder::EncoderModel<float>& model, const TensorF& adjacency,
                                               const EnrichOptions& options, std::uint64_t seed) {
  if (!(options.mask_ratio >= 0.0 && options.mask_ratio < 1.0)) {
    throw std::invalid_argument("enrichment mask ratio must be in [0, 1)");
  }
  std::vector<data::Window> out = windows;
  out.reserve(windows.size() * (1 + options.copies));
  for (std::size_t copy = 0; copy < options.copies; ++copy) {
    for (std::size_t w = 0; w < windows.size(); ++w) {
      data::Window aug = windows[w];
      aug.history = enrich_history(windows[w].history, model, adjacency, options.mask_ratio, derive_seed(seed, {copy, w}),
                                   nullptr, options.keep_recent_patch);
      out.push_back(std::move(aug));
    }
  }
  return out;
}

}  // namespace fepcross::finetune
