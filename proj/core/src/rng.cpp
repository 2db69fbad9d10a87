// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/rng.hpp"

#include <cmath>

#include "nfula/error.hpp"

namespace nfula {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed),
      stream_(stream),
      key_(mix64(seed ^ mix64(stream * 0xD1B54A32D192ED03ULL + 1))) {}

std::uint64_t Rng::next_u64() {
  std::uint64_t v = mix64(key_ + kGamma * counter_);
  ++counter_;
  return v;
}

double Rng::uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double box_muller(double u1, double u2) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

double Rng::normal() {
  double u1 = uniform_open();
  double u2 = uniform();
  return box_muller(u1, u2);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw DegenerateInputError("uniform_index: n must be positive");
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

std::uint64_t Rng::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean))
    throw DegenerateInputError("poisson: mean must be finite and nonnegative");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    // Knuth product method; draws geometric with the target as stopping time.
    double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform_open();
    } while (p > limit);
    return k - 1;
  }
  // Hormann's PTRS transformed rejection; exact for mean >= 10.
  double slam = std::sqrt(mean);
  double loglam = std::log(mean);
  double b = 0.931 + 2.53 * slam;
  double a = -0.059 + 0.02483 * b;
  double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    double u = uniform() - 0.5;
    double v = uniform_open();
    double us = 0.5 - std::abs(u);
    double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        kf * loglam - mean - std::lgamma(kf + 1.0))
      return static_cast<std::uint64_t>(kf);
  }
}

Tensor gaussian_vector(Rng& rng, std::size_t d) {
  Tensor t({d});
  for (std::size_t i = 0; i < d; ++i) t[i] = rng.normal();
  return t;
}

}  // namespace nfula
