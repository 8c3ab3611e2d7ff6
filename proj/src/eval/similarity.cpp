// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/eval/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fepcross/eval/metrics.hpp"
#include "fepcross/spectral/tri_domain.hpp"

namespace fepcross::eval {

using nlohmann::json;

void to_json(json& j, const SimilarityReport& r) {
  auto matrix = [](const numcore::TensorF& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.dim(0); ++i) {
      std::vector<float> row(m.data().begin() + static_cast<std::ptrdiff_t>(i * m.dim(1)),
                             m.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * m.dim(1)));
      rows.push_back(row);
    }
    return rows;
  };
  j = json{{"mean_time_cos", r.mean_time_cos}, {"mean_freq_cos", r.mean_freq_cos},
           {"pairs", r.pairs},                 {"windows", r.windows},
           {"window_steps", r.window_steps},   {"time_matrix", matrix(r.time_matrix)},
           {"freq_matrix", matrix(r.freq_matrix)}};
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw EvalError("cosine: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

namespace {

struct NodeViews {
  std::vector<double> time;
  std::vector<double> freq;
};

// views[w * nodes + i]
std::vector<NodeViews> window_views(const data::TrafficCity& city, std::size_t windows, std::size_t length) {
  const std::size_t n = city.node_count();
  std::vector<NodeViews> out(windows * n);
  for (std::size_t w = 0; w < windows; ++w) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> x(length);
      for (std::size_t t = 0; t < length; ++t) x[t] = city.reading(w * length + t, i);
      double mean = 0.0;
      for (double v : x) mean += v;
      mean /= static_cast<double>(length);
      double var = 0.0;
      for (double v : x) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / static_cast<double>(length));
      for (double& v : x) v = sd > 1e-12 ? (v - mean) / sd : v - mean;
      auto& view = out[w * n + i];
      view.freq = spectral::to_tri_domain(x).amplitude;
      view.time = std::move(x);
    }
  }
  return out;
}

}  // namespace

SimilarityReport similarity_analysis(const data::TrafficCity& a, const data::TrafficCity& b,
                                     const SimilarityOptions& options) {
  if (a.interval_minutes != b.interval_minutes) {
    throw EvalError("similarity: interval " + std::to_string(a.interval_minutes) + " min vs " +
                    std::to_string(b.interval_minutes) + " min; resampling is not supported");
  }
  if (options.pairing == Pairing::kAligned && a.node_count() != b.node_count()) {
    throw EvalError("similarity: aligned pairing needs equal node counts, got " + std::to_string(a.node_count()) +
                    " and " + std::to_string(b.node_count()));
  }
  if (options.window_days == 0 || options.max_pairs == 0) throw EvalError("similarity: empty window or pair budget");
  const std::size_t length = options.window_days * a.steps_per_day();
  const std::size_t windows = std::min(a.steps(), b.steps()) / length;
  if (windows == 0) {
    throw EvalError("similarity: cities need " + std::to_string(length) + " steps, shortest has " +
                    std::to_string(std::min(a.steps(), b.steps())));
  }
  const std::size_t na = a.node_count(), nb = b.node_count();
  const auto va = window_views(a, windows, length);
  const auto vb = window_views(b, windows, length);

  SimilarityReport r;
  r.windows = windows;
  r.window_steps = length;
  r.time_matrix = numcore::TensorF({na, nb});
  r.freq_matrix = numcore::TensorF({na, nb});
  std::vector<double> time_cos(windows * na * nb), freq_cos(windows * na * nb);
  for (std::size_t w = 0; w < windows; ++w) {
    for (std::size_t i = 0; i < na; ++i) {
      for (std::size_t j = 0; j < nb; ++j) {
        const std::size_t k = (w * na + i) * nb + j;
        time_cos[k] = cosine(va[w * na + i].time, vb[w * nb + j].time);
        freq_cos[k] = cosine(va[w * na + i].freq, vb[w * nb + j].freq);
        r.time_matrix[i * nb + j] += static_cast<float>(time_cos[k] / static_cast<double>(windows));
        r.freq_matrix[i * nb + j] += static_cast<float>(freq_cos[k] / static_cast<double>(windows));
      }
    }
  }

  std::vector<std::size_t> picks;
  for (std::size_t k = 0; k < time_cos.size(); ++k) {
    const std::size_t i = (k / nb) % na, j = k % nb;
    if (options.pairing == Pairing::kAllPairs || i == j) picks.push_back(k);
  }
  if (picks.size() > options.max_pairs) {
    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> sampled;
    std::sample(picks.begin(), picks.end(), std::back_inserter(sampled), static_cast<std::ptrdiff_t>(options.max_pairs),
                rng);
    picks = std::move(sampled);
  }
  for (std::size_t k : picks) {
    r.mean_time_cos += time_cos[k];
    r.mean_freq_cos += freq_cos[k];
  }
  r.pairs = picks.size();
  r.mean_time_cos /= static_cast<double>(r.pairs);
  r.mean_freq_cos /= static_cast<double>(r.pairs);
  return r;
}

}  // namespace fepcross::eval
