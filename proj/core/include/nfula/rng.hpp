// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "nfula/tensor.hpp"

namespace nfula {

// Counter-based generator: the i-th output is a pure function of
// (seed, stream, i), so distinct streams never overlap, state is a single
// counter, and a chain restored from (seed, stream, counter) reproduces
// the original draw sequence exactly.
class Rng {
public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  // Uniform on (0, 1]; safe under log().
  double uniform_open();

  // One Gaussian draw consumes exactly two uniforms (no pair caching).
  double normal();

  // Unbiased uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  // Exact Poisson draw; product method for small means, transformed
  // rejection for large ones.
  std::uint64_t poisson(double mean);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// The Gaussian transform itself, exposed for direct checks:
// sqrt(-2 ln u1) * cos(2 pi u2) with u1 in (0, 1].
double box_muller(double u1, double u2);

// d independent standard normal entries, drawn in index order.
Tensor gaussian_vector(Rng& rng, std::size_t d);

}  // namespace nfula
