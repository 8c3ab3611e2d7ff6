// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fepcross/data/city.hpp"

namespace fepcross::data {

struct Harmonic {
  double period_hours = 24.0;
  double amplitude = 1.0;
  double phase = 0.0;  // shared reference phase, radians
};

/// Parameters of one synthetic city. Cities built with the same harmonics but
/// different seeds/jitter share spectra while differing in the time domain.
struct SyntheticCitySpec {
  std::string name = "synthetic";
  std::size_t n_nodes = 8;
  std::size_t days = 7;
  int interval_minutes = 5;
  std::vector<Harmonic> shared_harmonics = {{24.0, 8.0, 0.0}, {12.0, 4.0, 0.0}, {168.0, 2.0, 0.0}};
  /// Per-node phase offsets are uniform in +-jitter*pi around the shared phase.
  double city_phase_jitter = 0.3;
  /// Stationary std of the AR(1) noise, speed units.
  double noise_std = 0.5;
  double ar_coefficient = 0.9;
  /// Expected congestion dips per node per day.
  double congestion_rate = 0.0;
  double base_speed = 60.0;
  double connect_radius = 0.5;
  double kernel_width = 0.25;
};

void to_json(nlohmann::json& j, const Harmonic& h);
void from_json(const nlohmann::json& j, Harmonic& h);
void to_json(nlohmann::json& j, const SyntheticCitySpec& s);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, SyntheticCitySpec& s);

/// Random geometric graph over the unit square with Gaussian-kernel weights and
/// harmonic + AR(1) + congestion speed series. Pure function of (spec, seed).
TrafficCity generate_synthetic_city(const SyntheticCitySpec& spec, std::uint64_t seed);

}  // namespace fepcross::data
