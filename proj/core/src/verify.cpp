// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include "nfula/error.hpp"
#include "nfula/experiment.hpp"
#include "nfula/likelihood.hpp"
#include "nfula/linalg.hpp"
#include "nfula/operators.hpp"
#include "nfula/prior.hpp"
#include "nfula/sampler.hpp"

namespace nfula {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw DegenerateInputError("normal quantile needs p in (0,1)");
  // Acklam's rational approximation in three regions.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley polish against the exact CDF.
  static const double inv_sqrt2pi = 0.3989422804014326779;
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e / (inv_sqrt2pi * std::exp(-x * x / 2.0));
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

GaussianTarget make_gaussian_target(std::size_t d, std::uint64_t seed, double variance,
                                    double correlation, double sigma) {
  if (d < 2) throw DegenerateInputError("gaussian target needs d >= 2");
  GaussianTarget t;
  t.sigma = sigma;
  Tensor cov({d, d});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      cov.at(i, j) = i == j ? variance : variance * correlation;

  Rng rng(seed, 7);
  // Seeded Givens rotations keep the spectrum while mixing coordinates.
  for (std::size_t sweep = 0; sweep < 3 * d; ++sweep) {
    std::size_t i = rng.uniform_index(d);
    std::size_t j = rng.uniform_index(d - 1);
    if (j >= i) ++j;
    double angle = 2.0 * 3.14159265358979323846 * rng.uniform();
    double cs = std::cos(angle), sn = std::sin(angle);
    for (std::size_t k = 0; k < d; ++k) {  // rows
      double vi = cov.at(i, k), vj = cov.at(j, k);
      cov.at(i, k) = cs * vi - sn * vj;
      cov.at(j, k) = sn * vi + cs * vj;
    }
    for (std::size_t k = 0; k < d; ++k) {  // columns
      double vi = cov.at(k, i), vj = cov.at(k, j);
      cov.at(k, i) = cs * vi - sn * vj;
      cov.at(k, j) = sn * vi + cs * vj;
    }
  }
  // Exact resymmetrization (rounding only).
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      double m = 0.5 * (cov.at(i, j) + cov.at(j, i));
      cov.at(i, j) = cov.at(j, i) = m;
    }
  t.prior_cov = cov;
  t.prior_mean = Tensor({d});
  for (std::size_t i = 0; i < d; ++i) t.prior_mean[i] = 0.5 * rng.normal();
  t.y = Tensor({d});
  for (std::size_t i = 0; i < d; ++i) t.y[i] = t.prior_mean[i] + rng.normal();

  // Posterior: precision P = Sigma^-1 + I/sigma^2.
  Tensor chol_prior = cholesky(cov);
  Tensor precision({d, d});
  Tensor rhs({d});
  for (std::size_t j = 0; j < d; ++j) {
    Tensor e({d});
    e[j] = 1.0;
    Tensor col = cholesky_solve(chol_prior, e);
    for (std::size_t i = 0; i < d; ++i) precision.at(i, j) = col[i];
  }
  Tensor sigma_inv_m = cholesky_solve(chol_prior, t.prior_mean);
  for (std::size_t i = 0; i < d; ++i) {
    precision.at(i, i) += 1.0 / (sigma * sigma);
    rhs[i] = sigma_inv_m[i] + t.y[i] / (sigma * sigma);
  }
  Tensor chol_post = cholesky(precision);
  t.post_mean = cholesky_solve(chol_post, rhs);
  t.post_cov = Tensor({d, d});
  for (std::size_t j = 0; j < d; ++j) {
    Tensor e({d});
    e[j] = 1.0;
    Tensor col = cholesky_solve(chol_post, e);
    for (std::size_t i = 0; i < d; ++i) t.post_cov.at(i, j) = col[i];
  }
  return t;
}

namespace {

VerificationCheck check_le(const std::string& name, double measured, double bound) {
  VerificationCheck c;
  c.name = name;
  c.measured = measured;
  c.expected = bound;
  c.passed = measured <= bound;
  return c;
}

VerificationCheck check_true(const std::string& name, bool ok, double measured,
                             double expected) {
  VerificationCheck c;
  c.name = name;
  c.measured = measured;
  c.expected = expected;
  c.passed = ok;
  return c;
}

SamplerConfig target_sampler_config(double delta, std::uint64_t iterations,
                                    std::uint64_t burn_in, std::uint64_t seed,
                                    std::uint64_t stream) {
  SamplerConfig cfg;
  cfg.kind = KernelKind::NfUla;
  cfg.delta = delta;
  cfg.alpha = 1.0;
  cfg.lambda = 5e-5;
  cfg.box = BoxSet::cube(-100.0, 100.0);
  cfg.iterations = iterations;
  cfg.burn_in = burn_in;
  cfg.seed = seed;
  cfg.stream = stream;
  return cfg;
}

}  // namespace

std::vector<VerificationCheck> verify_conjugate_gaussian(std::uint64_t seed) {
  const std::size_t d = 4;
  GaussianTarget target = make_gaussian_target(d, seed, 1.0, 0.6, 1.0);
  auto op = make_identity({d});
  Likelihood lik = Likelihood::gaussian(op, target.y, target.sigma);
  GaussianAnalyticPrior prior(target.prior_mean, target.prior_cov);

  const std::size_t n_chains = 80;
  const double delta = 1e-3;
  const std::uint64_t iterations = 200000;  // horizon t = 200
  const std::uint64_t burn_in = 10000;

  std::vector<Tensor> chain_means;
  Tensor sum({d});
  Tensor sum_outer({d, d});
  std::uint64_t total = 0;
  for (std::size_t c = 0; c < n_chains; ++c) {
    SamplerConfig cfg = target_sampler_config(delta, iterations, burn_in, seed, 20 + c);
    ChainResult res = run_chain(cfg, lik, &prior, nullptr, target.y);
    chain_means.push_back(res.state.stats.mean);
    res.store.for_each([&](const Tensor& x) {
      sum += x;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) sum_outer.at(i, j) += x[i] * x[j];
    });
    total += res.store.size();
  }

  Tensor mean = sum;
  mean *= 1.0 / static_cast<double>(total);
  // Standard error of the pooled mean from the spread of independent
  // chain means.
  double z_max = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double m = 0.0, s2 = 0.0;
    for (const Tensor& cm : chain_means) m += cm[i];
    m /= static_cast<double>(n_chains);
    for (const Tensor& cm : chain_means) s2 += (cm[i] - m) * (cm[i] - m);
    s2 /= static_cast<double>(n_chains - 1);
    double se = std::sqrt(s2 / static_cast<double>(n_chains));
    z_max = std::max(z_max, std::abs(mean[i] - target.post_mean[i]) / se);
  }

  double rel_max = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double cov = (sum_outer.at(i, j) -
                    static_cast<double>(total) * mean[i] * mean[j]) /
                   static_cast<double>(total - 1);
      double ref = target.post_cov.at(i, j);
      rel_max = std::max(rel_max, std::abs(cov - ref) / std::abs(ref));
    }

  return {check_le("conjugate-gaussian posterior mean max |z|", z_max, 3.0),
          check_le("conjugate-gaussian covariance max relative error", rel_max, 0.10)};
}

std::vector<VerificationCheck> verify_contraction(std::uint64_t seed) {
  const std::size_t d = 4;
  GaussianTarget target = make_gaussian_target(d, seed, 1.0, 0.6, 1.0);
  auto op = make_identity({d});
  Likelihood lik = Likelihood::gaussian(op, target.y, target.sigma);
  GaussianAnalyticPrior prior(target.prior_mean, target.prior_cov);

  SamplerConfig cfg = target_sampler_config(1e-3, 100000, 0, seed, 30);

  ChainState s1, s2;
  s1.x = target.post_mean;
  s1.rng = Rng(cfg.seed, cfg.stream);
  Rng dir(seed, 31);
  Tensor offset = gaussian_vector(dir, d);
  offset *= 10.0 / norm2(offset);
  s2.x = s1.x + offset;  // separation exactly 10
  s2.rng = Rng(cfg.seed, cfg.stream);

  std::vector<double> ks, logs;
  std::uint64_t hit = 0;
  for (std::uint64_t k = 1; k <= cfg.iterations; ++k) {
    kernel_step(s1, lik, &prior, nullptr, cfg);
    kernel_step(s2, lik, &prior, nullptr, cfg);
    double sep = norm2(s1.x - s2.x);
    if (sep <= 1e-6) {
      hit = k;
      break;
    }
    if (k % 50 == 0) {
      ks.push_back(static_cast<double>(k));
      logs.push_back(std::log(sep));
    }
  }

  // Least-squares line through (k, log sep).
  double n = static_cast<double>(ks.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    sx += ks[i];
    sy += logs[i];
    sxx += ks[i] * ks[i];
    sxy += ks[i] * logs[i];
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  double intercept = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0, mean_y = sy / n;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    double fit = intercept + slope * ks[i];
    ss_res += (logs[i] - fit) * (logs[i] - fit);
    ss_tot += (logs[i] - mean_y) * (logs[i] - mean_y);
  }
  double r2 = 1.0 - ss_res / ss_tot;
  double rate = std::exp(slope);

  return {check_true("coupled chains reach 1e-6 separation",
                     hit != 0 && hit <= cfg.iterations, static_cast<double>(hit),
                     static_cast<double>(cfg.iterations)),
          check_true("fitted geometric rate r < 1", rate < 1.0, rate, 1.0),
          check_true("contraction fit R^2 >= 0.9", r2 >= 0.9, r2, 0.9)};
}

std::vector<VerificationCheck> verify_bias_scaling(std::uint64_t seed) {
  const std::size_t d = 4;
  const double horizon = 200.0;
  const double deltas[3] = {4e-3, 2e-3, 1e-3};
  const std::size_t n_chains = 36;
  const std::size_t n_seeds = 5;

  double w1[3] = {0.0, 0.0, 0.0};
  for (std::size_t s = 0; s < n_seeds; ++s) {
    GaussianTarget target = make_gaussian_target(d, seed + s, 0.055, 0.35, 1.0);
    auto op = make_identity({d});
    Likelihood lik = Likelihood::gaussian(op, target.y, target.sigma);
    GaussianAnalyticPrior prior(target.prior_mean, target.prior_cov);
    double m0 = target.post_mean[0];
    double sd0 = std::sqrt(target.post_cov.at(0, 0));

    for (int di = 0; di < 3; ++di) {
      double delta = deltas[di];
      auto iterations = static_cast<std::uint64_t>(horizon / delta + 0.5);
      auto burn = static_cast<std::uint64_t>(5.0 / delta + 0.5);
      std::vector<double> pool;
      pool.reserve(n_chains * (iterations - burn));
      for (std::size_t c = 0; c < n_chains; ++c) {
        SamplerConfig cfg = target_sampler_config(delta, iterations, burn, seed + s,
                                                  100 + 10 * di + c);
        ChainResult res = run_chain(cfg, lik, &prior, nullptr, target.post_mean);
        res.store.for_each([&](const Tensor& x) { pool.push_back(x[0]); });
      }
      std::sort(pool.begin(), pool.end());
      double acc = 0.0;
      auto n = static_cast<double>(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i) {
        double q = (static_cast<double>(i) + 0.5) / n;
        acc += std::abs(pool[i] - (m0 + sd0 * normal_quantile(q)));
      }
      w1[di] += acc / n / static_cast<double>(n_seeds);
    }
  }

  std::vector<VerificationCheck> checks;
  checks.push_back(check_true("bias ordering W1(4e-3) >= W1(2e-3)", w1[0] >= w1[1],
                              w1[0] - w1[1], 0.0));
  checks.push_back(check_true("bias ordering W1(2e-3) >= W1(1e-3)", w1[1] >= w1[2],
                              w1[1] - w1[2], 0.0));
  checks.push_back(check_true("bias W1 at delta 4e-3 (info)", true, w1[0], 0.0));
  checks.push_back(check_true("bias W1 at delta 1e-3 (info)", true, w1[2], 0.0));
  return checks;
}

std::vector<VerificationCheck> verify_moment_suite() {
  const double sqrt_2pi = 2.5066282746310005024;
  std::vector<VerificationCheck> checks;

  MomentReport point = verify_finite_moments(1.0, 0.0, 0.0, 4);
  checks.push_back(check_le("moment k=0 over point set vs sqrt(2 pi)",
                            std::abs(point.moments[0].value - sqrt_2pi), 1e-8));
  MomentReport unit = verify_finite_moments(1.0, 0.0, 1.0, 4);
  checks.push_back(check_le("moment k=0 over [0,1] vs 1 + sqrt(2 pi)",
                            std::abs(unit.moments[0].value - (1.0 + sqrt_2pi)), 1e-6));
  MomentReport wide = verify_finite_moments(0.25, -2.0, 3.0, 4);
  bool all = true;
  for (const MomentReport* r : {&point, &unit, &wide})
    for (const MomentCheck& m : r->moments)
      all = all && m.converged && std::isfinite(m.value) && m.value > 0.0;
  checks.push_back(check_true("moments k <= 4 converge on all settings", all,
                              all ? 1.0 : 0.0, 1.0));
  return checks;
}

std::vector<VerificationCheck> verify_posterior_stability() {
  GaussianAnalyticPrior prior(Tensor::scalar(0.0), Tensor({1, 1}, {1.0}));
  const double sigma = 1.0;
  std::vector<std::pair<double, double>> pairs = {
      {0.5, 0.5}, {0.0, 0.1}, {0.0, 0.01}, {0.0, 0.001}};
  WellPosednessReport rep = verify_well_posedness(prior, sigma, pairs);

  // Two unit-variance factors give posterior N(y/2, 1/2); the TV distance
  // between two such normals is erf(|m1 - m2| / (2 sqrt(2) s)).
  double dm = 0.5 * 0.1;
  double s = std::sqrt(0.5);
  double analytic = std::erf(dm / (2.0 * std::sqrt(2.0) * s));

  std::vector<VerificationCheck> checks;
  checks.push_back(check_le("tv for identical observations", rep.pairs[0].tv, 1e-12));
  checks.push_back(check_le("tv vs closed form at dy=0.1",
                            std::abs(rep.pairs[1].tv - analytic), 1e-6));
  double s1 = rep.pairs[1].slope, s2 = rep.pairs[2].slope, s3 = rep.pairs[3].slope;
  checks.push_back(
      check_le("slope drift dy 0.1 -> 0.01", std::abs(s1 - s2) / s2, 0.05));
  checks.push_back(
      check_le("slope drift dy 0.01 -> 0.001", std::abs(s2 - s3) / s3, 0.05));
  checks.push_back(check_true("slope ratio bounded by 10", rep.slopes_bounded,
                              rep.slope_max / rep.slope_min, 10.0));
  return checks;
}

std::vector<VerificationCheck> verify_acf_units(std::uint64_t seed) {
  const std::size_t n = 100000;
  Rng rng(seed, 40);
  Tensor white({n});
  for (std::size_t i = 0; i < n; ++i) white[i] = rng.normal();
  AcfCurve wc = acf(white, 50);
  double worst = 0.0;
  for (std::size_t l = 1; l < wc.values.size(); ++l)
    worst = std::max(worst, std::abs(wc.values[l]));

  Tensor ar({n});
  double y = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) y = 0.9 * y + rng.normal();  // warm start
  for (std::size_t i = 0; i < n; ++i) {
    y = 0.9 * y + rng.normal();
    ar[i] = y;
  }
  AcfCurve ac = acf(ar, 10);

  return {check_le("white noise |acf| for lags 1..50", worst, 0.02),
          check_le("ar(1) acf lag 5 vs 0.9^5",
                   std::abs(ac.values[5] - 0.59049), 0.03)};
}

std::vector<VerificationCheck> run_verify_suite(const std::string& name,
                                                std::uint64_t seed) {
  if (name == "conjugate-gaussian") return verify_conjugate_gaussian(seed);
  if (name == "contraction") return verify_contraction(seed);
  if (name == "bias-scaling") return verify_bias_scaling(seed);
  if (name == "finite-moments") return verify_moment_suite();
  if (name == "well-posedness") return verify_posterior_stability();
  if (name == "acf-units") return verify_acf_units(seed);
  if (name == "all") {
    std::vector<VerificationCheck> all;
    for (const char* suite : {"conjugate-gaussian", "contraction", "bias-scaling",
                              "finite-moments", "well-posedness", "acf-units"}) {
      auto part = run_verify_suite(suite, seed);
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  throw ParseError("unknown verify suite: " + name);
}

}  // namespace nfula
