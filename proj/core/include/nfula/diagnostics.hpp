// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0
//
// Chain evaluation: PSNR, sample autocorrelation over Haar wavelet bands,
// 1-D Wasserstein-1 distance, and quadrature-based verification probes for
// moment finiteness and posterior stability under data perturbations.

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nfula/prior.hpp"
#include "nfula/rng.hpp"
#include "nfula/sampler.hpp"
#include "nfula/tensor.hpp"

namespace nfula {

// 10 log10(max_val^2 / MSE), capped at 200 dB (also the MSE == 0 sentinel).
double psnr(const Tensor& x, const Tensor& ref, double max_val = 1.0);

// One autocorrelation curve. values[l] is the lag-l coefficient; values[0] == 1.
struct AcfCurve {
  std::string band;
  std::size_t dim = 0;
  std::vector<double> values;
};

// Sample autocorrelation with the single global mean:
//   omega(l) = sum_{t=1}^{n-l} (Y_{t+l} - Ybar)(Y_t - Ybar) / sum_t (Y_t - Ybar)^2.
// Requires n > max_lag >= 1; a zero-variance series is degenerate.
AcfCurve acf(const Tensor& series, std::size_t max_lag);

// Orthonormal 2-D Haar pyramid. yh holds three detail subbands per level,
// finest level first, in (horizontal, vertical, diagonal) order; yl is the
// coarsest low-pass. Both sides must be divisible by 2^levels.
struct HaarPyramid {
  std::size_t levels = 0;
  Tensor yl;
  std::vector<Tensor> yh;
};

HaarPyramid haar_dwt2(const Tensor& image, std::size_t levels);
Tensor haar_idwt2(const HaarPyramid& pyramid);

// Per-coordinate ACF curves over wavelet bands of a stored chain, plus the
// pointwise min/median/max envelope per band. Coordinates with zero variance
// are skipped and counted.
struct ChainAcfResult {
  std::vector<AcfCurve> curves;
  std::vector<AcfCurve> envelopes;
  std::size_t degenerate_skipped = 0;
};

// One-level transform per sample: the three finest detail subbands form the
// "yh" pool and the low-pass forms "yl"; n_dims_per_band random coordinates
// are drawn from each pool without replacement.
ChainAcfResult chain_acf_bands(const SampleStore& store, std::size_t n_dims_per_band,
                               std::size_t max_lag, Rng& rng);

// W1 distance between empirical 1-D distributions: sorted samples are
// resampled to a common length by quantile interpolation, then compared
// pairwise. Exact for equal-length inputs.
double wasserstein1_1d(const Tensor& a, const Tensor& b);

// Moment probe for a box-projected Gaussian factor exp(-d(x, C)^2 / (2 lambda))
// with C = [lo, hi] (lo == hi gives a point set). Integrates |x|^k against the
// factor over a widening domain until the tail increment drops below 1e-12.
struct MomentCheck {
  std::size_t k = 0;
  double value = 0.0;
  double tail = 0.0;
  bool converged = false;
};

struct MomentReport {
  double lambda = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<MomentCheck> moments;
};

MomentReport verify_finite_moments(double lambda, double lo, double hi,
                                   std::size_t k_max);

// Posterior stability probe in one dimension with a Gaussian likelihood
// y = x + noise. For each (y1, y2) pair the two posteriors are normalized by
// quadrature and compared in total variation; slope = TV / |y1 - y2|.
struct WellPosednessPair {
  double y1 = 0.0;
  double y2 = 0.0;
  double tv = 0.0;
  double slope = 0.0;
};

struct WellPosednessReport {
  std::vector<WellPosednessPair> pairs;
  double slope_min = 0.0;
  double slope_max = 0.0;
  bool slopes_bounded = false;  // max/min slope ratio <= 10 over distinct pairs
};

WellPosednessReport verify_well_posedness(const Prior& prior, double sigma,
                                          const std::vector<std::pair<double, double>>& y_pairs);

// Verification entry for report serialization.
struct VerificationCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double expected = 0.0;
};

// Flat container for everything the diagnose command emits. Round-trips
// through CSV (columns: metric,band,dim,lag,value) without numeric loss.
struct DiagnosticsReport {
  std::vector<std::pair<std::string, double>> psnr_values;
  std::vector<AcfCurve> acf_curves;
  std::vector<std::pair<std::string, double>> w1_values;
  std::vector<VerificationCheck> checks;
};

void write_report_csv(const std::string& path, const DiagnosticsReport& report);
DiagnosticsReport read_report_csv(const std::string& path);

}  // namespace nfula
