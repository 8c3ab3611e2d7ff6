// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fepcross/numcore/tensor.hpp"

namespace fepcross::data {

using numcore::TensorF;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Half-open index range [begin, end) over time steps.
struct StepRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - begin; }
  bool operator==(const StepRange&) const = default;
};

struct SeriesStats {
  double mean = 0.0;
  double std = 0.0;
};

/// One road network: adjacency [N, N] and single-channel speed readings
/// stored in file order [T, N].
struct TrafficCity {
  std::string name;
  int interval_minutes = 5;
  std::vector<std::string> nodes;
  TensorF adjacency;
  TensorF readings;

  std::size_t node_count() const { return adjacency.empty() ? 0 : adjacency.dim(0); }
  std::size_t steps() const { return readings.empty() ? 0 : readings.dim(0); }
  std::size_t steps_per_day() const;
  float reading(std::size_t step, std::size_t node) const { return readings[step * node_count() + node]; }
};

/// Throws DataError on non-square/negative/non-finite adjacency or non-finite readings.
void validate_city(const TrafficCity& city);

SeriesStats compute_stats(const TrafficCity& city, StepRange range);

/// Reads `meta.json`, `adjacency.csv` (src,dst,weight) and `readings.f32`
/// (little-endian f32, row-major T x N x C with C = 1).
TrafficCity load_city(const std::filesystem::path& dir);

void save_city(const std::filesystem::path& dir, const TrafficCity& city);

}  // namespace fepcross::data
