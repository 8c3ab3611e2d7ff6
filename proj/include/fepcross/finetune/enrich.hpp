// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "fepcross/data/windows.hpp"
#include "fepcross/encoder/encoder.hpp"

namespace fepcross::finetune {

using numcore::TensorF;

struct EnrichOptions {
  double mask_ratio = 0.25;
  std::size_t copies = 1;
  /// Never mask the newest time patch, which is the backbone's short-term input.
  bool keep_recent_patch = true;
};

/// Masks a normalized [N, T_h] history in all three domains, reconstructs it
/// with the frozen encoder and writes the reconstruction into the masked time
/// patches only. Unmasked steps keep their original values bit for bit.
/// `time_mask`, if given, receives the time-domain mask that was used. With
/// `keep_recent_patch`, a mask landing on the last time patch moves to a
/// random unmasked earlier patch, so the count per node is unchanged.
TensorF enrich_history(const TensorF& history, const encoder::EncoderModel<float>& model, const TensorF& adjacency,
                       double mask_ratio, std::uint64_t seed, spectral::MaskGrid* time_mask = nullptr,
                       bool keep_recent_patch = false);

/// The originals followed by `copies` enriched versions of each (labels unchanged).
std::vector<data::Window> enrich_training_data(const std::vector<data::Window>& windows,
                                               const encoder::EncoderModel<float>& model, const TensorF& adjacency,
                                               const EnrichOptions& options, std::uint64_t seed);

}  // namespace fepcross::finetune
