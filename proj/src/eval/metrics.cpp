// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/eval/metrics.hpp"

#include <cmath>

namespace fepcross::eval {

using nlohmann::json;

namespace {

void check_lengths(std::span<const double> y, std::span<const double> y_hat, const char* what) {
  if (y.empty()) throw EvalError(std::string(what) + ": empty input");
  if (y.size() != y_hat.size()) {
    throw EvalError(std::string(what) + ": " + std::to_string(y.size()) + " targets vs " +
                    std::to_string(y_hat.size()) + " predictions");
  }
}

}  // namespace

double mae(std::span<const double> y, std::span<const double> y_hat) {
  check_lengths(y, y_hat, "mae");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) total += std::abs(y[i] - y_hat[i]);
  return total / static_cast<double>(y.size());
}

double mape(std::span<const double> y, std::span<const double> y_hat, double floor) {
  check_lengths(y, y_hat, "mape");
  double total = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::abs(y[i]) < floor) continue;
    total += std::abs((y[i] - y_hat[i]) / y[i]);
    ++kept;
  }
  if (kept == 0) throw EvalError("mape: every target is below the floor");
  return 100.0 * total / static_cast<double>(kept);
}

std::vector<std::size_t> default_horizons() { return {1, 3, 6}; }

void to_json(json& j, const HorizonMetric& m) {
  j = json{{"horizon_steps", m.horizon_steps}, {"horizon_minutes", m.horizon_minutes},
           {"mae", m.mae}, {"mape", m.mape}, {"count", m.count}};
}

void to_json(json& j, const MetricReport& r) {
  j = json{{"method", r.method},   {"source_city", r.source_city}, {"target_city", r.target_city},
           {"seed", r.seed},       {"windows", r.windows},         {"horizons", r.horizons},
           {"mae_all", r.mae_all}, {"mape_all", r.mape_all},       {"count_all", r.count_all}};
}

MetricReport horizon_metrics(const data::TrafficCity& city, data::StepRange range, const data::NormalizationStats& stats,
                             const Predictor& predict, const std::vector<std::size_t>& horizons,
                             const EvalWindows& windows) {
  const std::size_t tf = windows.future_steps;
  for (std::size_t h : horizons) {
    if (h == 0 || h > tf) {
      throw EvalError("horizon " + std::to_string(h) + " outside 1.." + std::to_string(tf));
    }
  }
  const auto starts = data::window_starts(range, windows.history_steps, tf, windows.stride);
  const std::size_t n = city.node_count();
  // ys[k] / preds[k] collect forecast step k+1 across windows and nodes.
  std::vector<std::vector<double>> ys(tf), preds(tf);
  for (std::size_t start : starts) {
    const auto w = data::make_window(city, start, windows.history_steps, tf, stats);
    const TensorF y_hat = predict(w);
    if (y_hat.size() != n * tf) {
      throw EvalError("predictor returned " + numcore::shape_to_string(y_hat.shape()) + ", expected [" +
                      std::to_string(n) + ", " + std::to_string(tf) + ", 1]");
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < tf; ++k) {
        ys[k].push_back(w.future_raw[i * tf + k]);
        preds[k].push_back(y_hat[i * tf + k]);
      }
    }
  }
  MetricReport report;
  report.target_city = city.name;
  report.windows = starts.size();
  for (std::size_t h : horizons) {
    report.horizons.push_back({h, static_cast<int>(h) * city.interval_minutes, mae(ys[h - 1], preds[h - 1]),
                               mape(ys[h - 1], preds[h - 1]), ys[h - 1].size()});
  }
  std::vector<double> all_y, all_p;
  for (std::size_t k = 0; k < tf; ++k) {
    all_y.insert(all_y.end(), ys[k].begin(), ys[k].end());
    all_p.insert(all_p.end(), preds[k].begin(), preds[k].end());
  }
  report.mae_all = mae(all_y, all_p);
  report.mape_all = mape(all_y, all_p);
  report.count_all = all_y.size();
  return report;
}

HistoricalAverage::HistoricalAverage(const data::TrafficCity& city, data::StepRange fit_range)
    : nodes_(city.node_count()), slots_(city.steps_per_day()) {
  if (fit_range.length() < slots_) {
    throw EvalError("historical average needs a full day, got " + std::to_string(fit_range.length()) + " steps");
  }
  std::vector<double> sums(slots_ * nodes_, 0.0);
  std::vector<std::size_t> counts(slots_, 0);
  for (std::size_t t = fit_range.begin; t < fit_range.end; ++t) {
    const std::size_t slot = t % slots_;
    ++counts[slot];
    for (std::size_t i = 0; i < nodes_; ++i) sums[slot * nodes_ + i] += city.reading(t, i);
  }
  table_.resize(sums.size());
  for (std::size_t s = 0; s < slots_; ++s) {
    for (std::size_t i = 0; i < nodes_; ++i) {
      table_[s * nodes_ + i] = static_cast<float>(sums[s * nodes_ + i] / static_cast<double>(counts[s]));
    }
  }
}

TensorF HistoricalAverage::predict(std::size_t window_start, std::size_t history_steps, std::size_t future_steps) const {
  TensorF out({nodes_, future_steps, 1});
  for (std::size_t k = 0; k < future_steps; ++k) {
    const std::size_t slot = (window_start + history_steps + k) % slots_;
    for (std::size_t i = 0; i < nodes_; ++i) out[i * future_steps + k] = slot_mean(i, slot);
  }
  return out;
}

}  // namespace fepcross::eval
