// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/likelihood.hpp"

#include <algorithm>
#include <cmath>

#include "nfula/error.hpp"
#include "nfula/linalg.hpp"

namespace nfula {

Likelihood Likelihood::gaussian(OperatorPtr op, Tensor y, double sigma) {
  if (!op) throw DegenerateInputError("likelihood: operator is null");
  if (!(sigma > 0.0)) throw DegenerateInputError("likelihood: sigma must be positive");
  if (y.size() != op->output_size())
    throw ShapeError("likelihood: observation does not match operator output");
  y.require_finite("observation");
  Likelihood l;
  l.kind_ = Kind::Gaussian;
  l.op_ = std::move(op);
  l.y_ = std::move(y);
  l.sigma_ = sigma;
  return l;
}

Likelihood Likelihood::poisson(OperatorPtr op, Tensor y, double n0, double mu) {
  if (!op) throw DegenerateInputError("likelihood: operator is null");
  if (!(n0 > 0.0) || !(mu > 0.0))
    throw DegenerateInputError("likelihood: N0 and mu must be positive");
  if (y.size() != op->output_size())
    throw ShapeError("likelihood: observation does not match operator output");
  y.require_finite("observation");
  Likelihood l;
  l.kind_ = Kind::Poisson;
  l.op_ = std::move(op);
  l.y_ = std::move(y);
  l.n0_ = n0;
  l.mu_ = mu;
  return l;
}

Tensor Likelihood::grad_log(const Tensor& x) const {
  if (x.size() != op_->input_size())
    throw ShapeError("likelihood gradient: input does not match operator input");
  Tensor ax = op_->apply(x);
  if (kind_ == Kind::Gaussian) {
    Tensor r = y_;
    r -= ax.reshaped(y_.shape());
    Tensor g = op_->apply_adjoint(r);
    g *= 1.0 / (sigma_ * sigma_);
    return g;
  }
  // d/d(Ax)_i of -J = -mu N0 (exp(-mu y_i) - exp(-mu (Ax)_i))
  double clamp = 50.0 / mu_;
  Tensor r({ax.size()});
  for (std::size_t i = 0; i < ax.size(); ++i) {
    double axi = std::min(clamp, std::max(-clamp, ax[i]));
    r[i] = -mu_ * n0_ * (std::exp(-mu_ * y_[i]) - std::exp(-mu_ * axi));
  }
  r.require_finite("poisson likelihood gradient");
  return op_->apply_adjoint(r.reshaped(y_.shape()));
}

double Likelihood::log_density(const Tensor& x) const {
  Tensor ax = op_->apply(x);
  if (kind_ == Kind::Gaussian) {
    double s = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) {
      double d = y_[i] - ax[i];
      s += d * d;
    }
    return -0.5 * s / (sigma_ * sigma_);
  }
  // -J(x, y) up to the y-only normalizer
  double clamp = 50.0 / mu_;
  double j = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    double axi = std::min(clamp, std::max(-clamp, ax[i]));
    j += n0_ * std::exp(-mu_ * axi) +
         n0_ * std::exp(-mu_ * y_[i]) * (mu_ * axi - std::log(n0_));
  }
  if (!std::isfinite(j)) throw NonFiniteError("poisson potential overflowed");
  return -j;
}

std::optional<double> Likelihood::lipschitz_constant() const {
  if (kind_ == Kind::Poisson) return std::nullopt;
  double n = op_->operator_norm();
  return n * n / (sigma_ * sigma_);
}

Tensor simulate_gaussian_observation(const ForwardOperator& op, const Tensor& x_true,
                                     double sigma, Rng& rng) {
  if (sigma < 0.0) throw DegenerateInputError("simulate: sigma must be nonnegative");
  Tensor y = op.apply(x_true);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += sigma * rng.normal();
  return y;
}

Tensor simulate_poisson_observation(const ForwardOperator& op, const Tensor& x_true,
                                    double n0, double mu, Rng& rng) {
  if (!(n0 > 0.0) || !(mu > 0.0))
    throw DegenerateInputError("simulate: N0 and mu must be positive");
  for (std::size_t i = 0; i < x_true.size(); ++i)
    if (x_true[i] < 0.0 || x_true[i] > 1.0)
      throw DegenerateInputError("simulate: attenuation image must lie in [0,1]");
  Tensor ax = op.apply(x_true);
  Tensor y({ax.size()});
  for (std::size_t i = 0; i < ax.size(); ++i) {
    double lam = n0 * std::exp(-mu * ax[i]);
    double n1 = static_cast<double>(rng.poisson(lam));
    n1 = std::max(n1, 1.0);  // the log is undefined at zero counts
    y[i] = -std::log(n1 / n0) / mu;
  }
  return y.reshaped(ax.shape());
}

double contractivity_lower_bound(const Likelihood& lik, std::size_t max_iters,
                                 double tol) {
  if (lik.kind() != Likelihood::Kind::Gaussian)
    throw CapabilityError("contractivity bound requires a Gaussian likelihood");
  const ForwardOperator& op = *lik.op();
  const std::size_t d = op.input_size();

  // dense Gram matrix, resymmetrized exactly
  Tensor gram({d, d});
  Tensor e({d});
  for (std::size_t j = 0; j < d; ++j) {
    e[j] = 1.0;
    Tensor col = op.apply_adjoint(op.apply(e)).reshaped({d});
    for (std::size_t i = 0; i < d; ++i) gram.at(i, j) = col[i];
    e[j] = 0.0;
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      double avg = 0.5 * (gram.at(i, j) + gram.at(j, i));
      gram.at(i, j) = avg;
      gram.at(j, i) = avg;
    }

  Tensor chol;
  try {
    chol = cholesky(gram);
  } catch (const DegenerateInputError&) {
    return 0.0;  // PSD with a zero pivot: the Gram matrix is singular
  }

  // inverse power iteration; with unit v the solve norm tends to 1/lambda_min.
  // Seeded gaussian start avoids exact orthogonality to the target vector.
  Rng rng(0, 0);
  Tensor v = gaussian_vector(rng, d);
  v *= 1.0 / norm2(v);
  double lam = 0.0, prev = -1.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    Tensor w = cholesky_solve(chol, v);
    double nw = norm2(w);
    if (!(nw > 0.0)) return 0.0;
    lam = 1.0 / nw;
    if (prev >= 0.0 && std::abs(lam - prev) <= tol * lam)
      return lam / (lik.sigma() * lik.sigma());
    prev = lam;
    w *= 1.0 / nw;
    v = std::move(w);
  }
  throw NonConvergenceError("contractivity bound: inverse iteration did not converge");
}

}  // namespace nfula
