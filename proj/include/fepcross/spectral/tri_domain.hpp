// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "fepcross/numcore/tensor.hpp"

namespace fepcross::spectral {

using numcore::TensorF;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Domain : std::size_t { kTime = 0, kAmplitude = 1, kPhase = 2 };
inline constexpr std::array<Domain, 3> kAllDomains = {Domain::kTime, Domain::kAmplitude, Domain::kPhase};
const char* domain_name(Domain d);

/// Amplitudes below this are treated as zero and get phase 0.
inline constexpr double kZeroAmplitude = 1e-9;

struct TriDomainSeries {
  std::vector<double> time;
  std::vector<double> amplitude;  // bins 0 .. T/2 - 1
  std::vector<double> phase;      // radians in (-pi, pi]
};

/// Unnormalized forward DFT of one window; keeps bins 0..T/2-1 (Nyquist dropped).
TriDomainSeries to_tri_domain(std::span<const double> x);

/// Inverse of to_tri_domain: mirrors the retained bins into a Hermitian
/// spectrum of length 2F with a zero Nyquist bin, then applies a 1/T inverse.
std::vector<double> from_tri_domain(std::span<const double> amplitude, std::span<const double> phase);

/// Throws ConfigError unless `history_steps` splits into `patches` time patches
/// and history_steps/2 frequency bins split into `patches` frequency patches.
void validate_layout(std::size_t history_steps, std::size_t patches);

/// Splits a series into `patches` contiguous equal-length pieces.
template <typename T>
std::vector<std::vector<T>> patchify(std::span<const T> series, std::size_t patches) {
  if (patches == 0 || series.size() % patches != 0) {
    throw ConfigError("patchify: length " + std::to_string(series.size()) + " not divisible by " +
                      std::to_string(patches));
  }
  const std::size_t width = series.size() / patches;
  std::vector<std::vector<T>> out(patches);
  for (std::size_t p = 0; p < patches; ++p) out[p].assign(series.begin() + p * width, series.begin() + (p + 1) * width);
  return out;
}

/// Per-node, per-patch binary indicators (1 = masked).
class MaskGrid {
 public:
  MaskGrid() = default;
  MaskGrid(std::size_t nodes, std::size_t patches) : nodes_(nodes), patches_(patches), bits_(nodes * patches, 0) {}

  std::size_t nodes() const { return nodes_; }
  std::size_t patches() const { return patches_; }
  bool masked(std::size_t node, std::size_t patch) const { return bits_[node * patches_ + patch] != 0; }
  void set(std::size_t node, std::size_t patch, bool value) { bits_[node * patches_ + patch] = value ? 1 : 0; }
  std::size_t count(std::size_t node) const;
  std::size_t total() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  bool operator==(const MaskGrid&) const = default;

 private:
  std::size_t nodes_ = 0;
  std::size_t patches_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Patched time/amplitude/phase views of one window across N nodes.
struct TriDomainSample {
  TensorF time;       // [N, P, T_h / P]
  TensorF amplitude;  // [N, P, F / P]
  TensorF phase;      // [N, P, F / P]
  std::array<MaskGrid, 3> masks;

  std::size_t nodes() const { return time.dim(0); }
  std::size_t patches() const { return time.dim(1); }
  const TensorF& patches_of(Domain d) const;
  TensorF& patches_of(Domain d);
  const MaskGrid& mask(Domain d) const { return masks[static_cast<std::size_t>(d)]; }
  MaskGrid& mask(Domain d) { return masks[static_cast<std::size_t>(d)]; }
};

struct SampleOptions {
  std::size_t patches = 24;
  /// Multiplies the unnormalized DFT magnitude before patching (2/T_h gives
  /// a sinusoid's amplitude in signal units).
  double amplitude_scale = 1.0;
};

/// Builds an unmasked sample from a [N, T_h] history.
TriDomainSample make_sample(const TensorF& history, const SampleOptions& options);

/// Number of patches masked per node and domain: ceil(ratio * patches).
std::size_t masked_patch_count(double mask_ratio, std::size_t patches);

/// Per node and domain independently, marks ceil(ratio*P) patches drawn
/// uniformly without replacement. Requires 0 <= ratio < 1.
TriDomainSample apply_mask(TriDomainSample sample, double mask_ratio, std::uint64_t seed);

/// Uniform random permutation of 0..n-1 without fixed points (identity for n = 1).
std::vector<std::size_t> random_derangement(std::size_t n, std::uint64_t seed);

struct SwapResult {
  std::vector<TriDomainSample> samples;
  std::vector<std::size_t> permutation;  // augmented i takes amplitude of permutation[i]
};

/// Batch-level amplitude exchange: time and phase stay with their sample.
SwapResult amplitude_swap(const std::vector<TriDomainSample>& batch, std::uint64_t seed);

struct NodeSwapResult {
  TriDomainSample sample;
  std::vector<std::size_t> permutation;
};

/// Same exchange where the batch is the node set of one window.
NodeSwapResult swap_node_amplitudes(const TriDomainSample& sample, std::uint64_t seed);

}  // namespace fepcross::spectral
