// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fepcross/data/windows.hpp"

namespace fepcross::eval {

using numcore::TensorF;

class EvalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kMapeFloor = 1e-3;

double mae(std::span<const double> y, std::span<const double> y_hat);

/// Percent; entries with |y| < floor are skipped.
double mape(std::span<const double> y, std::span<const double> y_hat, double floor = kMapeFloor);

/// Steps {1, 3, 6}: 5/15/30 min on 5-minute cities, 10/30/60 min on 10-minute ones.
std::vector<std::size_t> default_horizons();

struct HorizonMetric {
  std::size_t horizon_steps = 0;
  int horizon_minutes = 0;
  double mae = 0.0;
  double mape = 0.0;
  std::size_t count = 0;

  bool operator==(const HorizonMetric&) const = default;
};

struct MetricReport {
  std::string method;
  std::string source_city;
  std::string target_city;
  std::uint64_t seed = 0;
  std::size_t windows = 0;
  std::vector<HorizonMetric> horizons;
  /// Over every forecast step 1..T_f.
  double mae_all = 0.0;
  double mape_all = 0.0;
  std::size_t count_all = 0;

  bool operator==(const MetricReport&) const = default;
};

void to_json(nlohmann::json& j, const HorizonMetric& m);
void to_json(nlohmann::json& j, const MetricReport& r);

/// Raw-unit forecast [N, T_f, 1] for one test window.
using Predictor = std::function<TensorF(const data::Window&)>;

struct EvalWindows {
  std::size_t history_steps = 288;
  std::size_t future_steps = 12;
  std::size_t stride = 12;
};

/// Scores `predict` on every window lying inside `range`.
MetricReport horizon_metrics(const data::TrafficCity& city, data::StepRange range, const data::NormalizationStats& stats,
                             const Predictor& predict, const std::vector<std::size_t>& horizons,
                             const EvalWindows& windows);

/// Per node and time-of-day slot mean over a fitting range.
class HistoricalAverage {
 public:
  HistoricalAverage(const data::TrafficCity& city, data::StepRange fit_range);

  /// Forecast for the steps following the window's history.
  TensorF predict(std::size_t window_start, std::size_t history_steps, std::size_t future_steps) const;
  float slot_mean(std::size_t node, std::size_t slot) const { return table_[slot * nodes_ + node]; }

 private:
  std::size_t nodes_ = 0;
  std::size_t slots_ = 0;
  std::vector<float> table_;
};

}  // namespace fepcross::eval
