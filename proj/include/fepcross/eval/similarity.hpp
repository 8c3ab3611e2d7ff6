// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

#include <json.hpp>

#include "fepcross/data/city.hpp"

namespace fepcross::eval {

/// kAllPairs compares every node of one city with every node of the other;
/// kAligned pairs node k with node k (both cities need the same node count).
enum class Pairing { kAllPairs, kAligned };

struct SimilarityOptions {
  std::size_t window_days = 7;
  Pairing pairing = Pairing::kAllPairs;
  std::size_t max_pairs = 10000;
  std::uint64_t seed = 7;
};

struct SimilarityReport {
  double mean_time_cos = 0.0;
  double mean_freq_cos = 0.0;
  std::size_t pairs = 0;
  std::size_t windows = 0;
  std::size_t window_steps = 0;
  /// [N_a, N_b]: cosine per cross-city node pair, averaged over aligned windows.
  numcore::TensorF time_matrix;
  numcore::TensorF freq_matrix;
};

void to_json(nlohmann::json& j, const SimilarityReport& r);

/// Cosine of two vectors; two all-zero vectors count as identical, one as orthogonal.
double cosine(std::span<const double> a, std::span<const double> b);

/// Compares aligned windows of both cities node against node. Each node window
/// is z-scored first, so the daily mean level does not dominate either domain;
/// the frequency view is the amplitude spectrum of that z-scored window.
SimilarityReport similarity_analysis(const data::TrafficCity& a, const data::TrafficCity& b,
                                     const SimilarityOptions& options = {});

}  // namespace fepcross::eval
