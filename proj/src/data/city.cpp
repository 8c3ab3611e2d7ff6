// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/data/city.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fepcross::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t swap_if_big(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

std::ifstream open_input(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("missing file " + path.string());
  return in;
}

}  // namespace

std::size_t TrafficCity::steps_per_day() const {
  if (interval_minutes <= 0 || 1440 % interval_minutes != 0) {
    throw DataError("interval of " + std::to_string(interval_minutes) + " minutes does not divide a day");
  }
  return static_cast<std::size_t>(1440 / interval_minutes);
}

void validate_city(const TrafficCity& city) {
  const auto& a = city.adjacency;
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
    throw DataError(city.name + ": adjacency must be square, got " + numcore::shape_to_string(a.shape()));
  }
  for (float w : a.data()) {
    if (!std::isfinite(w) || w < 0.0f) throw DataError(city.name + ": adjacency entries must be finite and >= 0");
  }
  if (city.readings.rank() != 2 || city.readings.dim(1) != a.dim(0)) {
    throw DataError(city.name + ": readings shape " + numcore::shape_to_string(city.readings.shape()) +
                    " does not match " + std::to_string(a.dim(0)) + " nodes");
  }
  for (float v : city.readings.data()) {
    if (!std::isfinite(v)) throw DataError(city.name + ": non-finite reading");
  }
  if (!city.nodes.empty() && city.nodes.size() != a.dim(0)) throw DataError(city.name + ": node label count mismatch");
}

SeriesStats compute_stats(const TrafficCity& city, StepRange range) {
  const std::size_t n = city.node_count();
  if (range.end > city.steps() || range.length() == 0) throw DataError("compute_stats: invalid step range");
  double sum = 0.0;
  for (std::size_t t = range.begin; t < range.end; ++t) {
    for (std::size_t i = 0; i < n; ++i) sum += city.reading(t, i);
  }
  const double count = static_cast<double>(range.length() * n);
  const double mean = sum / count;
  double sq = 0.0;
  for (std::size_t t = range.begin; t < range.end; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double d = city.reading(t, i) - mean;
      sq += d * d;
    }
  }
  return {mean, std::sqrt(sq / count)};
}

TrafficCity load_city(const fs::path& dir) {
  json meta;
  {
    auto in = open_input(dir / "meta.json");
    try {
      in >> meta;
    } catch (const json::exception& e) {
      throw DataError("malformed meta.json: " + std::string(e.what()));
    }
  }
  TrafficCity city;
  std::size_t n = 0, steps = 0, channels = 1;
  try {
    city.name = meta.value("name", dir.filename().string());
    city.interval_minutes = meta.at("interval_minutes").get<int>();
    n = meta.at("num_nodes").get<std::size_t>();
    steps = meta.at("num_steps").get<std::size_t>();
    channels = meta.value("channels", std::size_t{1});
    if (meta.contains("nodes")) city.nodes = meta.at("nodes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError("meta.json: " + std::string(e.what()));
  }
  if (channels != 1) throw DataError("only single-channel (speed) cities are supported");
  if (city.nodes.empty()) {
    for (std::size_t i = 0; i < n; ++i) city.nodes.push_back(std::to_string(i));
  }

  city.adjacency = TensorF({n, n});
  {
    auto in = open_input(dir / "adjacency.csv");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (line_no == 1 && line.find_first_of("0123456789") != 0) continue;  // header
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream fields(line);
      std::size_t src = 0, dst = 0;
      double w = 0.0;
      if (!(fields >> src >> dst >> w)) throw DataError("adjacency.csv line " + std::to_string(line_no) + " is malformed");
      if (src >= n || dst >= n) throw DataError("adjacency.csv line " + std::to_string(line_no) + " indexes past N");
      city.adjacency[src * n + dst] = static_cast<float>(w);
    }
  }

  {
    auto in = open_input(dir / "readings.f32", std::ios::binary);
    std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t expected = steps * n * channels * sizeof(float);
    if (blob.size() != expected) {
      throw DataError("readings.f32 holds " + std::to_string(blob.size()) + " bytes, meta implies " +
                      std::to_string(expected) + " (T=" + std::to_string(steps) + ", N=" + std::to_string(n) + ")");
    }
    std::vector<float> values(steps * n);
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, blob.data() + i * sizeof(float), sizeof(bits));
      values[i] = std::bit_cast<float>(swap_if_big(bits));
    }
    city.readings = TensorF({steps, n}, std::move(values));
  }
  validate_city(city);
  const auto stats = compute_stats(city, {0, city.steps()});
  spdlog::info("loaded city {}: {} nodes, {} steps, mean {:.4f}, std {:.4f}", city.name, n, steps, stats.mean,
               stats.std);
  return city;
}

void save_city(const fs::path& dir, const TrafficCity& city) {
  validate_city(city);
  fs::create_directories(dir);
  const std::size_t n = city.node_count();
  json meta = {{"name", city.name},
               {"interval_minutes", city.interval_minutes},
               {"num_nodes", n},
               {"num_steps", city.steps()},
               {"channels", 1},
               {"nodes", city.nodes}};
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';

  std::ofstream adj(dir / "adjacency.csv");
  adj << "src,dst,weight\n";
  adj.precision(9);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const float w = city.adjacency[i * n + j];
      if (w != 0.0f) adj << i << ',' << j << ',' << w << '\n';
    }
  }

  std::ofstream out(dir / "readings.f32", std::ios::binary);
  for (float v : city.readings.data()) {
    const std::uint32_t bits = swap_if_big(std::bit_cast<std::uint32_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
  }
  if (!out) throw DataError("failed writing " + (dir / "readings.f32").string());
}

}  // namespace fepcross::data
