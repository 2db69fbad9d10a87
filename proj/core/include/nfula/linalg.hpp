// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

#include "nfula/rng.hpp"
#include "nfula/tensor.hpp"

namespace nfula {

using LinearMap = std::function<Tensor(const Tensor&)>;

// Largest singular value of the linear map A: R^dim -> R^m given by
// `apply`, with `apply_transpose` its exact adjoint. Power iteration on
// A^T A from a random start; the Rayleigh quotient is monotone, so the
// stop rule is relative change <= tol between sweeps.
// Throws NonConvergenceError when max_iters sweeps do not reach tol.
double power_iteration_spectral_norm(const LinearMap& apply,
                                     const LinearMap& apply_transpose,
                                     std::size_t dim, Rng& rng,
                                     std::size_t max_iters = 500,
                                     double tol = 1e-9);

// Same, seeding the start vector from a fixed internal stream so repeated
// calls give identical results.
double power_iteration_spectral_norm(const LinearMap& apply,
                                     const LinearMap& apply_transpose,
                                     std::size_t dim,
                                     std::size_t max_iters = 500,
                                     double tol = 1e-9);

// Composite Simpson rule over [lo, hi] with n sample points (n is rounded
// up to the next odd count >= 3). Exact for cubics.
double quadrature_integrate_1d(const std::function<double(double)>& f,
                               double lo, double hi, std::size_t n);

// Cholesky factor L (lower triangular, LL^T = a) of an SPD matrix stored
// as a square 2-D tensor. Throws DegenerateInputError if a pivot fails.
Tensor cholesky(const Tensor& a);

// Solve (L L^T) x = b given the factor from cholesky().
Tensor cholesky_solve(const Tensor& l, const Tensor& b);

// log det(L L^T) = 2 sum log L_ii.
double cholesky_logdet(const Tensor& l);

// Dense y = A x for a 2-D tensor A.
Tensor matvec(const Tensor& a, const Tensor& x);

}  // namespace nfula
