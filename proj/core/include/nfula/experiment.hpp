// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0
//
// Command layer shared by the CLI tool and the test suites: problem
// assembly from config files, the six subcommands, and the self-contained
// verification suites. All randomness is derived from the config seed with
// fixed stream assignments (1 = measurement noise, 2 = mask layout,
// 3 = dataset generation, 4 = training, 5 = certification probes,
// 6 = diagnostics subsampling, 10 + c = sampling chain c).

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nfula/config.hpp"
#include "nfula/diagnostics.hpp"
#include "nfula/tensor.hpp"

namespace nfula {

int cmd_degrade(const Config& cfg, std::ostream& log);
int cmd_train_flow(const Config& cfg, std::ostream& log);
int cmd_sample(const Config& cfg, std::ostream& log);
int cmd_certify(const Config& cfg, std::ostream& log);
int cmd_diagnose(const Config& cfg, std::ostream& log);
int cmd_verify(const Config& cfg, std::ostream& log);

// Thread cap: NFL_THREADS when set, hardware concurrency otherwise,
// never below 1.
std::size_t thread_cap();

// Standard normal quantile (Acklam rational approximation, |error| < 2e-9,
// polished with one Halley step of the complementary error function).
double normal_quantile(double p);

// Gaussian prior + identity Gaussian likelihood with the posterior in
// closed form; the shared target of the sampling verification suites.
struct GaussianTarget {
  Tensor prior_mean, prior_cov;
  double sigma = 1.0;
  Tensor y;
  Tensor post_mean, post_cov;  // (Sigma^-1 + I/sigma^2)^-1 and its mean
};

// Equicorrelated SPD prior covariance (variance, correlation) rotated by
// seeded Givens rotations; y is drawn around the prior mean.
GaussianTarget make_gaussian_target(std::size_t d, std::uint64_t seed,
                                    double variance, double correlation,
                                    double sigma);

// Verification suites (pure; every entry carries measured vs expected).
std::vector<VerificationCheck> verify_conjugate_gaussian(std::uint64_t seed);
std::vector<VerificationCheck> verify_contraction(std::uint64_t seed);
std::vector<VerificationCheck> verify_bias_scaling(std::uint64_t seed);
std::vector<VerificationCheck> verify_moment_suite();
std::vector<VerificationCheck> verify_posterior_stability();
std::vector<VerificationCheck> verify_acf_units(std::uint64_t seed);

// Dispatch by suite name; "all" concatenates every suite.
std::vector<VerificationCheck> run_verify_suite(const std::string& name,
                                                std::uint64_t seed);

}  // namespace nfula
