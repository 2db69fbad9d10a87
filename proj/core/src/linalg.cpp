// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/linalg.hpp"

#include <cmath>

#include "nfula/error.hpp"

namespace nfula {

double power_iteration_spectral_norm(const LinearMap& apply,
                                     const LinearMap& apply_transpose,
                                     std::size_t dim, Rng& rng,
                                     std::size_t max_iters, double tol) {
  if (dim == 0) throw ShapeError("power iteration: dim must be positive");
  Tensor v = gaussian_vector(rng, dim);
  double nv = norm2(v);
  if (nv == 0.0) v[0] = 1.0; else v *= 1.0 / nv;

  double prev = -1.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    Tensor av = apply(v);
    double s2 = dot(av, av);  // v^T A^T A v with ||v|| = 1
    double sigma = std::sqrt(s2);
    if (s2 == 0.0) return 0.0;
    if (prev >= 0.0 && std::abs(sigma - prev) <= tol * sigma) return sigma;
    prev = sigma;
    Tensor w = apply_transpose(av);
    double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    w *= 1.0 / nw;
    v = std::move(w);
  }
  throw NonConvergenceError("power iteration: no convergence within iteration budget");
}

double power_iteration_spectral_norm(const LinearMap& apply,
                                     const LinearMap& apply_transpose,
                                     std::size_t dim,
                                     std::size_t max_iters, double tol) {
  Rng rng(0, 0);
  return power_iteration_spectral_norm(apply, apply_transpose, dim, rng,
                                       max_iters, tol);
}

double quadrature_integrate_1d(const std::function<double(double)>& f,
                               double lo, double hi, std::size_t n) {
  if (!(lo < hi)) throw DegenerateInputError("quadrature: requires lo < hi");
  if (n < 3) n = 3;
  if (n % 2 == 0) ++n;  // Simpson needs an odd point count
  double h = (hi - lo) / static_cast<double>(n - 1);
  double s = f(lo) + f(hi);
  for (std::size_t i = 1; i + 1 < n; ++i)
    s += f(lo + h * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

Tensor cholesky(const Tensor& a) {
  if (a.ndim() != 2 || a.rows() != a.cols())
    throw ShapeError("cholesky: matrix must be square");
  std::size_t n = a.rows();
  Tensor l({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      if (i == j) {
        if (!(s > 0.0))
          throw DegenerateInputError("cholesky: matrix is not positive definite");
        l.at(i, i) = std::sqrt(s);
      } else {
        l.at(i, j) = s / l.at(j, j);
      }
    }
  }
  return l;
}

Tensor cholesky_solve(const Tensor& l, const Tensor& b) {
  std::size_t n = l.rows();
  if (b.size() != n) throw ShapeError("cholesky_solve: size mismatch");
  Tensor x = b.reshaped({n});
  for (std::size_t i = 0; i < n; ++i) {    // L y = b
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= l.at(i, k) * x[k];
    x[i] = s / l.at(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {    // L^T x = y
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l.at(k, ii) * x[k];
    x[ii] = s / l.at(ii, ii);
  }
  return x;
}

double cholesky_logdet(const Tensor& l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l.at(i, i));
  return 2.0 * s;
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  if (a.ndim() != 2 || x.size() != a.cols())
    throw ShapeError("matvec: shape mismatch");
  Tensor y({a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a.at(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

}  // namespace nfula
