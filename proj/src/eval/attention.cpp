// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/eval/attention.hpp"

#include <fstream>
#include <iomanip>
#include <limits>

#include "fepcross/data/windows.hpp"
#include "fepcross/eval/metrics.hpp"

namespace fepcross::eval {

using nlohmann::json;
namespace nc = numcore;

void to_json(json& j, const AttentionAxis& a) {
  j = json{{"domain", a.domain}, {"patch", a.patch}, {"range_begin", a.range_begin}, {"range_end", a.range_end}};
}

AttentionMap export_attention(const encoder::EncoderModel<float>& model, const nc::TensorF& history,
                              const nc::TensorF& adjacency, bool per_node) {
  const auto& cfg = model.config();
  if (!cfg.use_cross_domain) throw EvalError("attention export needs a model with cross-domain aggregators");
  const auto sample = spectral::make_sample(history, cfg.sample_options());
  encoder::EncodeTrace<float> trace;
  encoder::encode(sample, data::normalize_adjacency(adjacency), model, &trace);
  const auto& att = trace.aggregator_attention;  // [N, H, L, L]
  const std::size_t n = att.dim(0), heads = att.dim(1), len = att.dim(2);

  AttentionMap map;
  map.mean = nc::TensorD({len, len});
  if (per_node) map.per_node = nc::TensorD({n, len, len});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t base = (i * heads + h) * len * len;
      for (std::size_t k = 0; k < len * len; ++k) {
        const double v = att[base + k];
        map.mean[k] += v / static_cast<double>(n * heads);
        if (per_node) map.per_node[i * len * len + k] += v / static_cast<double>(heads);
      }
    }
  }

  const auto domains = cfg.domains();
  const std::size_t p = cfg.patches;
  for (auto dom : domains) {
    const std::size_t width = cfg.width_of(dom);
    for (std::size_t q = 0; q < p; ++q) map.axes.push_back({spectral::domain_name(dom), q, q * width, (q + 1) * width});
  }
  const std::size_t dn = domains.size();
  map.domain_mass = nc::TensorD({dn, dn});
  for (std::size_t r = 0; r < len; ++r) {
    for (std::size_t c = 0; c < len; ++c) map.domain_mass[(r / p) * dn + c / p] += map.mean[r * len + c] / static_cast<double>(p);
  }
  return map;
}

namespace {

void write_csv(const std::filesystem::path& path, const nc::TensorD& m, std::size_t offset, std::size_t len) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t r = 0; r < len; ++r) {
    for (std::size_t c = 0; c < len; ++c) out << (c ? "," : "") << m[offset + r * len + c];
    out << '\n';
  }
}

}  // namespace

void write_attention(const std::filesystem::path& dir, const std::string& stem, const AttentionMap& map) {
  std::filesystem::create_directories(dir);
  const std::size_t len = map.mean.dim(0);
  write_csv(dir / (stem + ".csv"), map.mean, 0, len);
  if (!map.per_node.empty()) {
    for (std::size_t i = 0; i < map.per_node.dim(0); ++i) {
      write_csv(dir / (stem + "_node" + std::to_string(i) + ".csv"), map.per_node, i * len * len, len);
    }
  }
  std::vector<std::vector<double>> mass(map.domain_mass.dim(0));
  for (std::size_t r = 0; r < mass.size(); ++r) {
    for (std::size_t c = 0; c < map.domain_mass.dim(1); ++c) mass[r].push_back(map.domain_mass[r * mass.size() + c]);
  }
  std::ofstream(dir / (stem + "_axes.json")) << json{{"axes", map.axes}, {"domain_mass", mass}}.dump(2) << '\n';
}

}  // namespace fepcross::eval
