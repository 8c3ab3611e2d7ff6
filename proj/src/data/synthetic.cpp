// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace fepcross::data {

using nlohmann::json;

void to_json(json& j, const Harmonic& h) {
  j = json{{"period_hours", h.period_hours}, {"amplitude", h.amplitude}, {"phase", h.phase}};
}

void from_json(const json& j, Harmonic& h) {
  h.period_hours = j.at("period_hours").get<double>();
  h.amplitude = j.at("amplitude").get<double>();
  h.phase = j.value("phase", 0.0);
}

void to_json(json& j, const SyntheticCitySpec& s) {
  j = json{{"name", s.name},
           {"n_nodes", s.n_nodes},
           {"days", s.days},
           {"interval_minutes", s.interval_minutes},
           {"shared_harmonics", s.shared_harmonics},
           {"city_phase_jitter", s.city_phase_jitter},
           {"noise_std", s.noise_std},
           {"ar_coefficient", s.ar_coefficient},
           {"congestion_rate", s.congestion_rate},
           {"base_speed", s.base_speed},
           {"connect_radius", s.connect_radius},
           {"kernel_width", s.kernel_width}};
}

void from_json(const json& j, SyntheticCitySpec& s) {
  s.name = j.value("name", s.name);
  s.n_nodes = j.value("n_nodes", s.n_nodes);
  s.days = j.value("days", s.days);
  s.interval_minutes = j.value("interval_minutes", s.interval_minutes);
  if (j.contains("shared_harmonics")) s.shared_harmonics = j.at("shared_harmonics").get<std::vector<Harmonic>>();
  s.city_phase_jitter = j.value("city_phase_jitter", s.city_phase_jitter);
  s.noise_std = j.value("noise_std", s.noise_std);
  s.ar_coefficient = j.value("ar_coefficient", s.ar_coefficient);
  s.congestion_rate = j.value("congestion_rate", s.congestion_rate);
  s.base_speed = j.value("base_speed", s.base_speed);
  s.connect_radius = j.value("connect_radius", s.connect_radius);
  s.kernel_width = j.value("kernel_width", s.kernel_width);
}

TrafficCity generate_synthetic_city(const SyntheticCitySpec& spec, std::uint64_t seed) {
  if (spec.n_nodes < 4) throw DataError("synthetic city needs at least 4 nodes");
  if (spec.days < 7) throw DataError("synthetic city needs at least 7 days");
  if (spec.interval_minutes <= 0 || 1440 % spec.interval_minutes != 0) {
    throw DataError("interval must divide a day");
  }
  if (!(spec.ar_coefficient >= 0.0 && spec.ar_coefficient < 1.0)) throw DataError("ar_coefficient must be in [0, 1)");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t n = spec.n_nodes;
  const std::size_t per_day = static_cast<std::size_t>(1440 / spec.interval_minutes);
  const std::size_t steps = per_day * spec.days;

  TrafficCity city;
  city.name = spec.name;
  city.interval_minutes = spec.interval_minutes;
  for (std::size_t i = 0; i < n; ++i) city.nodes.push_back("n" + std::to_string(i));

  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = unit(rng);
    ys[i] = unit(rng);
  }
  city.adjacency = TensorF({n, n});
  const double width2 = spec.kernel_width * spec.kernel_width;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d2 = (xs[i] - xs[j]) * (xs[i] - xs[j]) + (ys[i] - ys[j]) * (ys[i] - ys[j]);
      if (d2 <= spec.connect_radius * spec.connect_radius) {
        city.adjacency[i * n + j] = static_cast<float>(std::exp(-d2 / width2));
      }
    }
  }

  const std::size_t h_count = spec.shared_harmonics.size();
  std::vector<double> base(n), scale(n), node_phase(n * h_count);
  for (std::size_t i = 0; i < n; ++i) {
    base[i] = spec.base_speed + 3.0 * gauss(rng);
    scale[i] = 0.8 + 0.4 * unit(rng);
    for (std::size_t h = 0; h < h_count; ++h) {
      node_phase[i * h_count + h] =
          spec.shared_harmonics[h].phase + spec.city_phase_jitter * std::numbers::pi * (2.0 * unit(rng) - 1.0);
    }
  }

  std::vector<double> series(steps * n);
  const double innovation = spec.noise_std * std::sqrt(1.0 - spec.ar_coefficient * spec.ar_coefficient);
  for (std::size_t i = 0; i < n; ++i) {
    double noise = spec.noise_std * gauss(rng);
    for (std::size_t t = 0; t < steps; ++t) {
      double v = base[i];
      const double minutes = static_cast<double>(t * static_cast<std::size_t>(spec.interval_minutes));
      for (std::size_t h = 0; h < h_count; ++h) {
        const auto& hm = spec.shared_harmonics[h];
        v += scale[i] * hm.amplitude *
             std::cos(2.0 * std::numbers::pi * minutes / (hm.period_hours * 60.0) + node_phase[i * h_count + h]);
      }
      if (t > 0) noise = spec.ar_coefficient * noise + innovation * gauss(rng);
      series[t * n + i] = v + noise;
    }
  }

  if (spec.congestion_rate > 0.0) {
    std::poisson_distribution<int> events(spec.congestion_rate * static_cast<double>(spec.days));
    for (std::size_t i = 0; i < n; ++i) {
      const int count = events(rng);
      for (int e = 0; e < count; ++e) {
        const double center = unit(rng) * static_cast<double>(steps);
        const double depth = 5.0 + 10.0 * unit(rng);
        const double half = (15.0 + 45.0 * unit(rng)) / static_cast<double>(spec.interval_minutes) / 2.0;
        const auto lo = static_cast<std::size_t>(std::max(0.0, std::floor(center - half)));
        const auto hi = static_cast<std::size_t>(std::min(static_cast<double>(steps), std::ceil(center + half)));
        for (std::size_t t = lo; t < hi; ++t) {
          const double w = 1.0 - std::abs(static_cast<double>(t) - center) / half;
          if (w > 0.0) series[t * n + i] -= depth * w;
        }
      }
    }
  }

  std::vector<float> readings(series.size());
  for (std::size_t k = 0; k < series.size(); ++k) readings[k] = static_cast<float>(std::max(0.0, series[k]));
  city.readings = TensorF({steps, n}, std::move(readings));
  return city;
}

}  // namespace fepcross::data
