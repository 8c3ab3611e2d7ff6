// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/spectral/fft.hpp"

#include <cmath>
#include <numbers>

namespace fepcross::spectral {

namespace {

using cd = std::complex<double>;

// Twiddle table w[r] = exp(sign * 2*pi*i * r / n) for the top-level length n.
struct Twiddles {
  std::size_t n;
  std::vector<cd> w;
  Twiddles(std::size_t len, double sign) : n(len), w(len) {
    for (std::size_t r = 0; r < len; ++r) {
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(len);
      w[r] = cd(std::cos(angle), std::sin(angle));
    }
  }
};

std::size_t smallest_factor(std::size_t n) {
  if (n % 2 == 0) return 2;
  for (std::size_t f = 3; f * f <= n; f += 2) {
    if (n % f == 0) return f;
  }
  return n;
}

// Transform of x[offset + stride*j], j < len, written to out[0..len).
// `tw_step` = top_n / len converts local exponents into table indices.
void transform(const cd* x, std::size_t stride, std::size_t len, const Twiddles& tw, cd* out) {
  if (len == 1) {
    out[0] = x[0];
    return;
  }
  const std::size_t tw_step = tw.n / len;
  const std::size_t p = smallest_factor(len);
  if (p == len) {
    for (std::size_t k = 0; k < len; ++k) {
      cd acc(0.0, 0.0);
      for (std::size_t j = 0; j < len; ++j) acc += x[j * stride] * tw.w[((j * k) % len) * tw_step];
      out[k] = acc;
    }
    return;
  }
  const std::size_t m = len / p;
  std::vector<cd> sub(len);
  for (std::size_t j = 0; j < p; ++j) transform(x + j * stride, stride * p, m, tw, sub.data() + j * m);
  for (std::size_t q = 0; q < p; ++q) {
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t kk = k + q * m;
      cd acc(0.0, 0.0);
      for (std::size_t j = 0; j < p; ++j) acc += sub[j * m + k] * tw.w[((j * kk) % len) * tw_step];
      out[kk] = acc;
    }
  }
}

std::vector<cd> run(std::span<const cd> x, double sign) {
  std::vector<cd> out(x.size());
  if (x.empty()) return out;
  Twiddles tw(x.size(), sign);
  transform(x.data(), 1, x.size(), tw, out.data());
  return out;
}

}  // namespace

std::vector<cd> fft(std::span<const cd> x) { return run(x, -1.0); }

std::vector<cd> ifft(std::span<const cd> x) {
  auto out = run(x, +1.0);
  const double scale = 1.0 / static_cast<double>(x.size());
  for (auto& v : out) v *= scale;
  return out;
}

std::vector<cd> fft_real(std::span<const double> x) {
  std::vector<cd> c(x.begin(), x.end());
  return fft(c);
}

}  // namespace fepcross::spectral
