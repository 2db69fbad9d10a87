// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "nfula/operators.hpp"
#include "nfula/rng.hpp"
#include "nfula/tensor.hpp"

namespace nfula {

// Measurement model p(y | x) through a fixed linear operator. Immutable;
// concurrent evaluation is safe.
class Likelihood {
public:
  enum class Kind { Gaussian, Poisson };

  // y = Ax + n, n ~ N(0, sigma^2 I).
  static Likelihood gaussian(OperatorPtr op, Tensor y, double sigma);

  // Beer-Lambert photon counts: y = -(1/mu) log(N1/N0) with
  // N1 ~ Poisson(N0 exp(-mu Ax)) per bin.
  static Likelihood poisson(OperatorPtr op, Tensor y, double n0, double mu);

  Kind kind() const { return kind_; }
  const OperatorPtr& op() const { return op_; }
  const Tensor& observation() const { return y_; }
  double sigma() const { return sigma_; }
  double n0() const { return n0_; }
  double mu() const { return mu_; }

  // Gaussian: A^T (y - Ax) / sigma^2.
  // Poisson: -A^T [ mu N0 (exp(-mu y) - exp(-mu Ax)) ], with Ax clamped to
  // [-50/mu, 50/mu] before exponentiation.
  Tensor grad_log(const Tensor& x) const;

  // Log density up to an x-independent constant (the exact negative
  // potential whose gradient grad_log returns).
  double log_density(const Tensor& x) const;

  // Gaussian: ||A||^2 / sigma^2. Poisson: nullopt, the gradient is not
  // globally Lipschitz.
  std::optional<double> lipschitz_constant() const;

private:
  Likelihood() = default;
  Kind kind_ = Kind::Gaussian;
  OperatorPtr op_;
  Tensor y_;
  double sigma_ = 1.0, n0_ = 0.0, mu_ = 0.0;
};

Tensor simulate_gaussian_observation(const ForwardOperator& op, const Tensor& x_true,
                                     double sigma, Rng& rng);

// Requires x_true in [0,1]^d (physical attenuation range); zero photon
// counts are clamped to 1 before the log.
Tensor simulate_poisson_observation(const ForwardOperator& op, const Tensor& x_true,
                                    double n0, double mu, Rng& rng);

// Smallest eigenvalue of A^T A / sigma^2 for a Gaussian likelihood.
// Assembles the dense Gram matrix column by column and runs inverse power
// iteration on it; a Cholesky failure means the Gram matrix is singular
// (within rounding) and the bound is reported as zero. Intended for
// desk-scale operators where the d x d Gram matrix is affordable.
double contractivity_lower_bound(const Likelihood& lik, std::size_t max_iters = 50000,
                                 double tol = 1e-12);

}  // namespace nfula
