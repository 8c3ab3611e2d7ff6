// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <span>
#include <vector>

namespace fepcross::spectral {

/// Mixed-radix Cooley-Tukey DFT for any length; prime factors above the
/// smallest-factor split fall back to direct summation. Forward is
/// unnormalized, inverse carries 1/n.
std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x);
std::vector<std::complex<double>> ifft(std::span<const std::complex<double>> x);

/// Forward transform of a real signal (full spectrum).
std::vector<std::complex<double>> fft_real(std::span<const double> x);

}  // namespace fepcross::spectral
