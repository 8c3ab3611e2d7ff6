// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "fepcross/spectral/fft.hpp"
#include "fepcross/spectral/tri_domain.hpp"

namespace sp = fepcross::spectral;
namespace nc = fepcross::numcore;
using cplx = std::complex<long double>;

namespace {

/// Direct O(T^2) DFT evaluated in long double.
std::vector<cplx> direct_dft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n);
  const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const long double ang = -two_pi * static_cast<long double>((k * t) % n) / static_cast<long double>(n);
      acc += static_cast<long double>(x[t]) * cplx(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<double> random_series(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = dist(rng);
  return x;
}

/// Random series with zero energy at the Nyquist bin.
std::vector<double> band_limited(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(n, 0.0);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double a = u(rng), b = u(rng);
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = 2 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
      x[t] += a * std::cos(ang) + (k == 0 ? 0.0 : b * std::sin(ang));
    }
  }
  return x;
}

}  // namespace

TEST(Fft, MatchesDirectDftForMixedRadixLengths) {
  for (std::size_t n : {1u, 2u, 7u, 12u, 30u, 97u, 288u, 576u}) {
    const auto x = random_series(n, n);
    const auto fast = sp::fft_real(x);
    const auto slow = direct_dft(x);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(fast[k].real(), static_cast<double>(slow[k].real()), 1e-9) << "n=" << n << " k=" << k;
      EXPECT_NEAR(fast[k].imag(), static_cast<double>(slow[k].imag()), 1e-9) << "n=" << n << " k=" << k;
    }
  }
}

TEST(Fft, InverseUndoesForward) {
  const auto x = random_series(288, 3);
  std::vector<std::complex<double>> cx(x.begin(), x.end());
  const auto back = sp::ifft(sp::fft(cx));
  for (std::size_t t = 0; t < x.size(); ++t) EXPECT_NEAR(back[t].real(), x[t], 1e-12);
}

TEST(TriDomain, ConstantSeriesIsDcOnly) {
  const std::vector<double> x(288, 2.5);
  const auto tri = sp::to_tri_domain(x);
  ASSERT_EQ(tri.amplitude.size(), 144u);
  EXPECT_NEAR(tri.amplitude[0], 288 * 2.5, 1e-9);
  for (std::size_t k = 1; k < 144; ++k) EXPECT_NEAR(tri.amplitude[k], 0.0, 1e-9);
  for (double ph : tri.phase) EXPECT_EQ(ph, 0.0);
}

TEST(TriDomain, SingleCosineConcentratesAtBinOne) {
  std::vector<double> x(288);
  for (std::size_t t = 0; t < 288; ++t) x[t] = std::cos(2 * std::numbers::pi * t / 288.0);
  const auto tri = sp::to_tri_domain(x);
  const auto oracle = direct_dft(x);
  EXPECT_NEAR(tri.amplitude[1], 144.0, 1e-9);
  EXPECT_NEAR(static_cast<double>(std::abs(oracle[1])), 144.0, 1e-9);
  for (std::size_t k = 0; k < 144; ++k) {
    if (k != 1) {
      EXPECT_NEAR(tri.amplitude[k], 0.0, 1e-9);
    }
  }
  EXPECT_NEAR(tri.phase[1], 0.0, 1e-12);
}

TEST(TriDomain, ParsevalWithFullSpectrum) {
  const auto x = random_series(288, 5);
  const auto spec = direct_dft(x);
  long double lhs = 0, rhs = 0;
  for (double v : x) lhs += static_cast<long double>(v) * v;
  for (const auto& c : spec) rhs += std::norm(c);
  rhs /= 288.0L;
  EXPECT_LT(std::abs(static_cast<double>((lhs - rhs) / lhs)), 1e-6);
  const auto fast = sp::fft_real(x);
  long double rhs_fast = 0;
  for (const auto& c : fast) rhs_fast += std::norm(std::complex<long double>(c));
  EXPECT_LT(std::abs(static_cast<double>((lhs - rhs_fast / 288.0L) / lhs)), 1e-6);
}

TEST(TriDomain, AmplitudeAndPhaseAgreeWithOracle) {
  const auto x = random_series(288, 6);
  const auto tri = sp::to_tri_domain(x);
  const auto spec = direct_dft(x);
  for (std::size_t k = 0; k < 144; ++k) {
    EXPECT_NEAR(tri.amplitude[k], static_cast<double>(std::abs(spec[k])), 1e-9);
    EXPECT_GT(tri.phase[k], -std::numbers::pi);
    EXPECT_LE(tri.phase[k], std::numbers::pi);
    if (std::abs(spec[k]) > 1e-6) {
      // Compare on the circle to avoid the branch cut.
      const double diff = std::remainder(tri.phase[k] - static_cast<double>(std::arg(spec[k])), 2 * std::numbers::pi);
      EXPECT_NEAR(diff, 0.0, 1e-9);
    }
  }
}

TEST(TriDomain, RoundTripOnBandLimitedSignals) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto x = band_limited(288, seed);
    const auto tri = sp::to_tri_domain(x);
    const auto back = sp::from_tri_domain(tri.amplitude, tri.phase);
    for (std::size_t t = 0; t < 288; ++t) EXPECT_NEAR(back[t], x[t], 1e-9);
  }
}

TEST(TriDomain, RoundTripInSinglePrecision) {
  const auto x = band_limited(288, 9);
  const auto tri = sp::to_tri_domain(x);
  std::vector<double> amp(tri.amplitude.begin(), tri.amplitude.end());
  std::vector<double> ph(tri.phase.begin(), tri.phase.end());
  for (double& a : amp) a = static_cast<float>(a);
  for (double& p : ph) p = static_cast<float>(p);
  const auto back = sp::from_tri_domain(amp, ph);
  for (std::size_t t = 0; t < 288; ++t) EXPECT_NEAR(static_cast<float>(back[t]), static_cast<float>(x[t]), 1e-4);
}

TEST(TriDomain, InverseOfSingleBin) {
  std::vector<double> amp(144, 0.0), ph(144, 0.0);
  amp[1] = 144.0;
  const auto x = sp::from_tri_domain(amp, ph);
  for (std::size_t t = 0; t < 288; ++t) EXPECT_NEAR(x[t], std::cos(2 * std::numbers::pi * t / 288.0), 1e-12);
  const std::vector<double> zeros(144, 0.0);
  for (double v : sp::from_tri_domain(zeros, zeros)) EXPECT_EQ(v, 0.0);
}

TEST(TriDomain, Errors) {
  std::vector<double> bad(288, 1.0);
  bad[3] = std::nan("");
  EXPECT_THROW(sp::to_tri_domain(bad), std::domain_error);
  EXPECT_THROW(sp::to_tri_domain(std::vector<double>(7, 1.0)), sp::ConfigError);
  EXPECT_THROW(sp::from_tri_domain(std::vector<double>(4), std::vector<double>(5)), std::invalid_argument);
  EXPECT_THROW(sp::validate_layout(288, 25), sp::ConfigError);
  EXPECT_NO_THROW(sp::validate_layout(288, 24));
}

TEST(Patchify, WidthsAndPartition) {
  std::vector<double> x(288);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const auto p = sp::patchify<double>(x, 24);
  ASSERT_EQ(p.size(), 24u);
  EXPECT_EQ(p[0].size(), 12u);
  std::vector<double> joined;
  for (const auto& patch : p) joined.insert(joined.end(), patch.begin(), patch.end());
  EXPECT_EQ(joined, x);
  EXPECT_EQ(sp::patchify<double>(std::span<const double>(x).first(144), 24)[5].size(), 6u);
  EXPECT_THROW(sp::patchify<double>(std::span<const double>(x).first(100), 24), sp::ConfigError);
}

namespace {

sp::TriDomainSample sample_of(std::size_t nodes, std::uint64_t seed) {
  nc::TensorF history({nodes, 288});
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  for (float& v : history.data()) v = d(rng);
  return sp::make_sample(history, {24, 2.0 / 288});
}

}  // namespace

TEST(Sample, LayoutFollowsFullWindowTransform) {
  auto s = sample_of(3, 1);
  EXPECT_EQ(s.time.shape(), (nc::Shape{3, 24, 12}));
  EXPECT_EQ(s.amplitude.shape(), (nc::Shape{3, 24, 6}));
  std::vector<double> row(288);
  for (std::size_t t = 0; t < 288; ++t) row[t] = s.time[288 + t];
  const auto tri = sp::to_tri_domain(row);
  for (std::size_t k = 0; k < 144; ++k) {
    EXPECT_NEAR(s.amplitude[144 + k], tri.amplitude[k] * 2.0 / 288, 1e-5);
    EXPECT_NEAR(s.phase[144 + k], tri.phase[k], 1e-6);
    EXPECT_GE(s.amplitude[144 + k], 0.0f);
  }
}

TEST(Mask, ExactCountsPerNodeAndDomain) {
  auto s = sp::apply_mask(sample_of(8, 2), 0.75, 11);
  for (auto d : sp::kAllDomains) {
    for (std::size_t n = 0; n < 8; ++n) EXPECT_EQ(s.mask(d).count(n), 18u);
  }
  EXPECT_EQ(sp::masked_patch_count(0.25, 24), 6u);
  EXPECT_EQ(sp::masked_patch_count(0.3, 24), 8u);
}

TEST(Mask, ZeroRatioMasksNothing) {
  auto s = sp::apply_mask(sample_of(4, 3), 0.0, 1);
  for (auto d : sp::kAllDomains) EXPECT_EQ(s.mask(d).total(), 0u);
  EXPECT_THROW(sp::apply_mask(sample_of(1, 3), 1.0, 1), std::invalid_argument);
  EXPECT_THROW(sp::apply_mask(sample_of(1, 3), -0.1, 1), std::invalid_argument);
}

TEST(Mask, SeedDeterminism) {
  const auto base = sample_of(8, 4);
  const auto a = sp::apply_mask(base, 0.75, 5);
  const auto b = sp::apply_mask(base, 0.75, 5);
  const auto c = sp::apply_mask(base, 0.75, 6);
  EXPECT_EQ(a.masks, b.masks);
  EXPECT_NE(a.masks, c.masks);
  EXPECT_EQ(a.time, base.time);
}

TEST(Mask, DomainsAreIndependent) {
  // 2x2 contingency of time vs amplitude indicators over many draws.
  const auto base = sample_of(16, 7);
  double table[2][2] = {{0, 0}, {0, 0}};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = sp::apply_mask(base, 0.5, seed);
    for (std::size_t n = 0; n < 16; ++n) {
      for (std::size_t p = 0; p < 24; ++p) {
        table[s.mask(sp::Domain::kTime).masked(n, p)][s.mask(sp::Domain::kAmplitude).masked(n, p)] += 1;
      }
    }
  }
  const double total = table[0][0] + table[0][1] + table[1][0] + table[1][1];
  double chi2 = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double expect = (table[i][0] + table[i][1]) * (table[0][j] + table[1][j]) / total;
      chi2 += (table[i][j] - expect) * (table[i][j] - expect) / expect;
    }
  }
  // 1 degree of freedom, p = 0.001 critical value.
  EXPECT_LT(chi2, 10.83);
}

TEST(Derangement, NoFixedPoints) {
  for (std::size_t n : {2u, 3u, 8u, 50u}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto p = sp::random_derangement(n, seed);
      auto sorted = p;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NE(p[i], i);
        EXPECT_EQ(sorted[i], i);
      }
    }
  }
  EXPECT_EQ(sp::random_derangement(1, 3), std::vector<std::size_t>{0});
}

TEST(AmplitudeSwap, PairExchangesAmplitudeOnly) {
  std::vector<sp::TriDomainSample> batch = {sample_of(2, 10), sample_of(2, 11)};
  const auto out = sp::amplitude_swap(batch, 1);
  EXPECT_EQ(out.permutation, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(out.samples[0].amplitude, batch[1].amplitude);
  EXPECT_EQ(out.samples[1].amplitude, batch[0].amplitude);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(out.samples[i].time, batch[i].time);
    EXPECT_EQ(out.samples[i].phase, batch[i].phase);
  }
}

TEST(AmplitudeSwap, SingleSampleIsNoOp) {
  std::vector<sp::TriDomainSample> batch = {sample_of(2, 12)};
  const auto out = sp::amplitude_swap(batch, 1);
  EXPECT_EQ(out.samples[0].amplitude, batch[0].amplitude);
}

TEST(AmplitudeSwap, BatchOfEightPermutesBlocks) {
  std::vector<sp::TriDomainSample> batch;
  for (std::uint64_t i = 0; i < 8; ++i) batch.push_back(sample_of(2, 20 + i));
  const auto out = sp::amplitude_swap(batch, 9);
  std::vector<std::vector<float>> before, after;
  for (std::size_t i = 0; i < 8; ++i) {
    before.push_back(batch[i].amplitude.vec());
    after.push_back(out.samples[i].amplitude.vec());
    EXPECT_NE(out.permutation[i], i);
    EXPECT_EQ(out.samples[i].time, batch[i].time);
    EXPECT_EQ(out.samples[i].phase, batch[i].phase);
  }
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  EXPECT_EQ(before, after);
}

TEST(AmplitudeSwap, NodeLevelSwapWithinWindow) {
  const auto s = sample_of(6, 30);
  const auto out = sp::swap_node_amplitudes(s, 4);
  EXPECT_EQ(out.sample.time, s.time);
  EXPECT_EQ(out.sample.phase, s.phase);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NE(out.permutation[i], i);
    for (std::size_t j = 0; j < 144; ++j) {
      EXPECT_EQ(out.sample.amplitude[i * 144 + j], s.amplitude[out.permutation[i] * 144 + j]);
    }
  }
}
