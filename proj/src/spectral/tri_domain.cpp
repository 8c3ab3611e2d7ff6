// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/spectral/tri_domain.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "fepcross/spectral/fft.hpp"

namespace fepcross::spectral {

const char* domain_name(Domain d) {
  switch (d) {
    case Domain::kTime:
      return "time";
    case Domain::kAmplitude:
      return "amplitude";
    case Domain::kPhase:
      return "phase";
  }
  return "unknown";
}

TriDomainSeries to_tri_domain(std::span<const double> x) {
  if (x.empty() || x.size() % 2 != 0) {
    throw ConfigError("to_tri_domain: window length " + std::to_string(x.size()) + " must be even and non-zero");
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw std::domain_error("to_tri_domain: non-finite input");
  }
  const auto spectrum = fft_real(x);
  const std::size_t bins = x.size() / 2;
  TriDomainSeries out;
  out.time.assign(x.begin(), x.end());
  out.amplitude.resize(bins);
  out.phase.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double amp = std::abs(spectrum[k]);
    out.amplitude[k] = amp;
    double ph = amp < kZeroAmplitude ? 0.0 : std::atan2(spectrum[k].imag(), spectrum[k].real());
    if (ph <= -std::numbers::pi) ph = std::numbers::pi;
    out.phase[k] = ph;
  }
  return out;
}

std::vector<double> from_tri_domain(std::span<const double> amplitude, std::span<const double> phase) {
  if (amplitude.size() != phase.size() || amplitude.empty()) {
    throw std::invalid_argument("from_tri_domain: amplitude has " + std::to_string(amplitude.size()) +
                                " bins, phase has " + std::to_string(phase.size()));
  }
  const std::size_t bins = amplitude.size();
  const std::size_t n = 2 * bins;
  std::vector<std::complex<double>> spectrum(n, {0.0, 0.0});
  for (std::size_t k = 0; k < bins; ++k) spectrum[k] = std::polar(amplitude[k], phase[k]);
  // DC must be real for a real signal; keep only its real part.
  spectrum[0] = {spectrum[0].real(), 0.0};
  for (std::size_t k = 1; k < bins; ++k) spectrum[n - k] = std::conj(spectrum[k]);
  const auto signal = ifft(spectrum);
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) out[t] = signal[t].real();
  return out;
}

void validate_layout(std::size_t history_steps, std::size_t patches) {
  if (patches == 0 || history_steps % (2 * patches) != 0) {
    throw ConfigError("history length " + std::to_string(history_steps) + " is not divisible by 2 * " +
                      std::to_string(patches) + " patches");
  }
}

std::size_t MaskGrid::count(std::size_t node) const {
  return static_cast<std::size_t>(
      std::count_if(bits_.begin() + node * patches_, bits_.begin() + (node + 1) * patches_, [](auto b) { return b != 0; }));
}

std::size_t MaskGrid::total() const {
  return static_cast<std::size_t>(std::count_if(bits_.begin(), bits_.end(), [](auto b) { return b != 0; }));
}

const TensorF& TriDomainSample::patches_of(Domain d) const {
  switch (d) {
    case Domain::kTime:
      return time;
    case Domain::kAmplitude:
      return amplitude;
    case Domain::kPhase:
      return phase;
  }
  throw std::invalid_argument("unknown domain");
}

TensorF& TriDomainSample::patches_of(Domain d) {
  return const_cast<TensorF&>(static_cast<const TriDomainSample&>(*this).patches_of(d));
}

TriDomainSample make_sample(const TensorF& history, const SampleOptions& options) {
  if (history.rank() != 2) {
    throw numcore::ShapeError("make_sample: history must be [N, T_h], got " + numcore::shape_to_string(history.shape()));
  }
  const std::size_t nodes = history.dim(0);
  const std::size_t steps = history.dim(1);
  const std::size_t patches = options.patches;
  validate_layout(steps, patches);
  const std::size_t bins = steps / 2;
  const std::size_t time_width = steps / patches;
  const std::size_t freq_width = bins / patches;

  TriDomainSample s;
  s.time = TensorF({nodes, patches, time_width});
  s.amplitude = TensorF({nodes, patches, freq_width});
  s.phase = TensorF({nodes, patches, freq_width});
  std::vector<double> row(steps);
  for (std::size_t n = 0; n < nodes; ++n) {
    for (std::size_t t = 0; t < steps; ++t) row[t] = history[n * steps + t];
    const auto tri = to_tri_domain(row);
    for (std::size_t t = 0; t < steps; ++t) s.time[n * steps + t] = history[n * steps + t];
    for (std::size_t k = 0; k < bins; ++k) {
      s.amplitude[n * bins + k] = static_cast<float>(tri.amplitude[k] * options.amplitude_scale);
      s.phase[n * bins + k] = static_cast<float>(tri.phase[k]);
    }
  }
  for (auto& m : s.masks) m = MaskGrid(nodes, patches);
  return s;
}

std::size_t masked_patch_count(double mask_ratio, std::size_t patches) {
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) {
    throw std::invalid_argument("mask ratio " + std::to_string(mask_ratio) + " outside [0, 1)");
  }
  // The small slack keeps exact products such as 0.75 * 24 from rounding up.
  return static_cast<std::size_t>(std::ceil(mask_ratio * static_cast<double>(patches) - 1e-9));
}

TriDomainSample apply_mask(TriDomainSample sample, double mask_ratio, std::uint64_t seed) {
  const std::size_t patches = sample.patches();
  const std::size_t k = masked_patch_count(mask_ratio, patches);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(patches);
  for (Domain d : kAllDomains) {
    MaskGrid grid(sample.nodes(), patches);
    for (std::size_t n = 0; n < sample.nodes(); ++n) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      // Partial Fisher-Yates: the first k slots are a uniform k-subset.
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, patches - 1);
        std::swap(order[i], order[pick(rng)]);
        grid.set(n, order[i], true);
      }
    }
    sample.mask(d) = std::move(grid);
  }
  return sample;
}

std::vector<std::size_t> random_derangement(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (n < 2) return perm;
  std::mt19937_64 rng(seed);
  auto has_fixed_point = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      if (perm[i] == i) return true;
    }
    return false;
  };
  do {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
  } while (has_fixed_point());
  return perm;
}

SwapResult amplitude_swap(const std::vector<TriDomainSample>& batch, std::uint64_t seed) {
  if (batch.empty()) throw std::invalid_argument("amplitude_swap: empty batch");
  if (batch.size() == 1) spdlog::warn("amplitude_swap: batch of one sample, augmentation is a no-op");
  SwapResult out;
  out.permutation = random_derangement(batch.size(), seed);
  out.samples = batch;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& donor = batch[out.permutation[i]].amplitude;
    if (donor.shape() != batch[i].amplitude.shape()) {
      throw numcore::ShapeError("amplitude_swap: amplitude shapes differ within batch");
    }
    out.samples[i].amplitude = donor;
  }
  return out;
}

NodeSwapResult swap_node_amplitudes(const TriDomainSample& sample, std::uint64_t seed) {
  const std::size_t nodes = sample.nodes();
  if (nodes == 1) spdlog::warn("amplitude_swap: window with one node, augmentation is a no-op");
  NodeSwapResult out{sample, random_derangement(nodes, seed)};
  const std::size_t row = sample.amplitude.size() / nodes;
  const auto src = sample.amplitude.data();
  auto dst = out.sample.amplitude.data();
  for (std::size_t i = 0; i < nodes; ++i) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(out.permutation[i] * row), row,
                dst.begin() + static_cast<std::ptrdiff_t>(i * row));
  }
  return out;
}

}  // namespace fepcross::spectral
