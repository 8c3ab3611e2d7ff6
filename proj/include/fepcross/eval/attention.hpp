// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fepcross/encoder/encoder.hpp"

namespace fepcross::eval {

/// One row/column of the cross-domain attention grid.
struct AttentionAxis {
  std::string domain;
  std::size_t patch = 0;
  /// Time steps for the time domain, DFT bins for amplitude and phase; half-open.
  std::size_t range_begin = 0;
  std::size_t range_end = 0;
};

void to_json(nlohmann::json& j, const AttentionAxis& a);

struct AttentionMap {
  /// [D*P, D*P] averaged over heads and nodes; rows are queries.
  numcore::TensorD mean;
  /// [N, D*P, D*P] averaged over heads only; filled when requested.
  numcore::TensorD per_node;
  std::vector<AttentionAxis> axes;
  /// [D, D]: average mass a query of domain r puts on all keys of domain c.
  numcore::TensorD domain_mass;
};

/// Attention of the second cross-domain aggregator on an unmasked normalized
/// [N, T_h] history. Throws if the model has no cross-domain aggregator.
AttentionMap export_attention(const encoder::EncoderModel<float>& model, const numcore::TensorF& history,
                              const numcore::TensorF& adjacency, bool per_node = false);

/// Writes `<stem>.csv` (matrix), `<stem>_axes.json` (axis metadata and
/// domain mass) and, if present, `<stem>_node<i>.csv`.
void write_attention(const std::filesystem::path& dir, const std::string& stem, const AttentionMap& map);

}  // namespace fepcross::eval
