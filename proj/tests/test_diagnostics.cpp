// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <vector>

#include <doctest.h>

#include "nfula/diagnostics.hpp"
#include "nfula/error.hpp"
#include "nfula/prior.hpp"
#include "nfula/rng.hpp"
#include "oracles.hpp"

using namespace nfula;

namespace {

constexpr double kSqrt2Pi = 2.5066282746310002;

Tensor series_of(std::initializer_list<double> v) { return Tensor({v.size()}, v); }

}  // namespace

TEST_SUITE_BEGIN("diagnostics");

TEST_CASE("psnr examples and cap") {
  Tensor ref({4, 4});
  Tensor same = ref;
  CHECK(psnr(same, ref) == 200.0);

  Tensor off({4, 4});
  for (std::size_t i = 0; i < off.size(); ++i) off[i] = 0.1;
  CHECK(psnr(off, ref) == doctest::Approx(20.0).epsilon(1e-12));
  // doubling the peak adds 20 log10(2)
  CHECK(psnr(off, ref, 2.0) ==
        doctest::Approx(20.0 + 20.0 * std::log10(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(psnr(Tensor({3}), ref), ShapeError);
  CHECK_THROWS_AS(psnr(ref, ref, 0.0), DegenerateInputError);
}

TEST_CASE("autocorrelation hand example") {
  AcfCurve c = acf(series_of({1.0, 2.0, 3.0, 4.0, 5.0}), 2);
  REQUIRE(c.values.size() == 3);
  CHECK(c.values[0] == 1.0);
  CHECK(c.values[1] == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(c.values[2] == doctest::Approx(-0.1).epsilon(1e-14));
  CHECK(c.band == "series");
}

TEST_CASE("autocorrelation matches the direct reference on random series") {
  Rng rng(701, 0);
  std::vector<double> raw(200);
  Tensor t({200});
  for (std::size_t i = 0; i < 200; ++i) {
    raw[i] = rng.normal() + 0.3 * std::sin(0.05 * static_cast<double>(i));
    t[i] = raw[i];
  }
  AcfCurve c = acf(t, 50);
  auto want = test::acf_reference(raw, 50);
  REQUIRE(c.values.size() == want.size());
  for (std::size_t l = 0; l < want.size(); ++l)
    CHECK(c.values[l] == doctest::Approx(want[l]).epsilon(1e-12));
  for (double v : c.values) CHECK(std::abs(v) <= 1.0 + 1e-12);
}

TEST_CASE("autocorrelation of white noise is near zero") {
  Rng rng(702, 0);
  Tensor t({50000});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  AcfCurve c = acf(t, 5);
  for (std::size_t l = 1; l <= 5; ++l) CHECK(std::abs(c.values[l]) <= 0.02);
}

TEST_CASE("autocorrelation of an ar1 chain decays geometrically") {
  Rng rng(703, 0);
  double phi = 0.9, y = 0.0;
  for (int i = 0; i < 1000; ++i) y = phi * y + rng.normal();
  Tensor t({100000});
  for (std::size_t i = 0; i < t.size(); ++i) {
    y = phi * y + rng.normal();
    t[i] = y;
  }
  AcfCurve c = acf(t, 5);
  CHECK(c.values[5] == doctest::Approx(std::pow(phi, 5.0)).epsilon(0.05));
  CHECK(std::abs(c.values[5] - 0.59049) <= 0.03);
}

TEST_CASE("autocorrelation input validation") {
  CHECK_THROWS_AS(acf(series_of({1.0, 2.0, 3.0}), 0), DegenerateInputError);
  CHECK_THROWS_AS(acf(series_of({1.0, 2.0, 3.0}), 3), DegenerateInputError);
  CHECK_THROWS_AS(acf(series_of({2.0, 2.0, 2.0, 2.0}), 1), DegenerateInputError);
}

TEST_CASE("haar transform of a constant image has empty detail bands") {
  Tensor img = Tensor::full({8, 8}, 0.7);
  HaarPyramid p = haar_dwt2(img, 3);
  CHECK(p.levels == 3);
  REQUIRE(p.yh.size() == 9);
  for (const Tensor& band : p.yh) CHECK(norm_inf(band) == 0.0);
  // low-pass gains a factor 2 per level
  REQUIRE(p.yl.size() == 1);
  CHECK(p.yl[0] == doctest::Approx(0.7 * 8.0).epsilon(1e-14));
}

TEST_CASE("haar impulse response by hand") {
  Tensor img({4, 4});
  img.at(0, 0) = 1.0;
  HaarPyramid p = haar_dwt2(img, 1);
  REQUIRE(p.yh.size() == 3);
  CHECK(p.yl.at(0, 0) == 0.5);
  for (const Tensor& band : p.yh) {
    CHECK(band.at(0, 0) == 0.5);
    CHECK(band.at(0, 1) == 0.0);
    CHECK(band.at(1, 1) == 0.0);
  }
}

TEST_CASE("haar is orthonormal: parseval and exact inversion") {
  Rng rng(704, 0);
  Tensor img({16, 16});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = rng.normal();
  for (std::size_t levels : {1u, 2u, 4u}) {
    HaarPyramid p = haar_dwt2(img, levels);
    double energy = dot(p.yl.reshaped({p.yl.size()}), p.yl.reshaped({p.yl.size()}));
    for (const Tensor& band : p.yh)
      energy += dot(band.reshaped({band.size()}), band.reshaped({band.size()}));
    CHECK(energy == doctest::Approx(dot(img.reshaped({256}), img.reshaped({256})))
                        .epsilon(1e-10));
    CHECK(norm_inf(haar_idwt2(p) - img) < 1e-12);
  }
}

TEST_CASE("haar shape validation") {
  CHECK_THROWS_AS(haar_dwt2(Tensor({6, 6}), 2), ShapeError);
  CHECK_THROWS_AS(haar_dwt2(Tensor({8, 8}), 0), ShapeError);
  CHECK_THROWS_AS(haar_dwt2(Tensor({8}), 1), ShapeError);
  HaarPyramid broken = haar_dwt2(Tensor({8, 8}), 2);
  broken.yh.pop_back();
  CHECK_THROWS_AS(haar_idwt2(broken), ShapeError);
}

TEST_CASE("band acf samples wavelet coordinates and skips degenerate ones") {
  // every pixel constant across samples except (0,0): only the four level-1
  // coefficients of the top-left block carry variance
  SampleStore store({8, 8}, 16 << 20, "");
  Rng rng(705, 0);
  double y = 0.0;
  for (int t = 0; t < 40; ++t) {
    Tensor img = Tensor::full({8, 8}, 0.25);
    y = 0.8 * y + rng.normal();
    img.at(0, 0) = y;
    store.push(img);
  }
  Rng pick(706, 0);
  ChainAcfResult res = chain_acf_bands(store, 5, 10, pick);
  CHECK(res.curves.size() + res.degenerate_skipped == 10);
  CHECK(res.degenerate_skipped >= 6);
  for (const AcfCurve& c : res.curves) {
    CHECK((c.band == "yh" || c.band == "yl"));
    REQUIRE(c.values.size() == 11);
    CHECK(c.values[0] == 1.0);
  }
  // envelopes exist per band that produced at least one curve, three each
  CHECK(res.envelopes.size() % 3 == 0);
  for (const AcfCurve& e : res.envelopes)
    CHECK((e.band.find("/min") != std::string::npos ||
           e.band.find("/median") != std::string::npos ||
           e.band.find("/max") != std::string::npos));

  // envelope ordering: min <= median <= max pointwise
  for (std::size_t i = 0; i + 2 < res.envelopes.size(); i += 3)
    for (std::size_t l = 0; l < res.envelopes[i].values.size(); ++l) {
      CHECK(res.envelopes[i].values[l] <= res.envelopes[i + 1].values[l] + 1e-12);
      CHECK(res.envelopes[i + 1].values[l] <= res.envelopes[i + 2].values[l] + 1e-12);
    }
}

TEST_CASE("band acf validation") {
  SampleStore store({8, 8}, 1 << 20, "");
  Rng rng(707, 0);
  for (int t = 0; t < 5; ++t) {
    Tensor img({8, 8});
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = rng.normal();
    store.push(img);
  }
  Rng pick(708, 0);
  CHECK_THROWS_AS(chain_acf_bands(store, 0, 2, pick), DegenerateInputError);
  CHECK_THROWS_AS(chain_acf_bands(store, 3, 10, pick), DegenerateInputError);

  SampleStore odd({7, 7}, 1 << 20, "");
  for (int t = 0; t < 10; ++t) odd.push(Tensor::full({7, 7}, static_cast<double>(t)));
  CHECK_THROWS_AS(chain_acf_bands(odd, 3, 2, pick), ShapeError);
}

TEST_CASE("wasserstein distance on hand-built samples") {
  Tensor a = series_of({0.0, 0.0, 0.0});
  CHECK(wasserstein1_1d(a, a) == 0.0);
  CHECK(wasserstein1_1d(a, series_of({2.0, 2.0, 2.0})) == 2.0);

  // translation invariance: W1(x, x + c) == |c|
  Rng rng(709, 0);
  Tensor x({500}), shifted({500});
  for (std::size_t i = 0; i < 500; ++i) {
    x[i] = rng.normal();
    shifted[i] = x[i] - 0.75;
  }
  CHECK(wasserstein1_1d(x, shifted) == doctest::Approx(0.75).epsilon(1e-12));

  // symmetry
  Tensor b({500});
  for (std::size_t i = 0; i < 500; ++i) b[i] = 2.0 * rng.normal() + 1.0;
  CHECK(wasserstein1_1d(x, b) == wasserstein1_1d(b, x));

  CHECK_THROWS_AS(wasserstein1_1d(Tensor(), x), DegenerateInputError);
}

TEST_CASE("wasserstein distance between gaussian clouds") {
  Rng rng(710, 0);
  std::size_t n = 100000;
  Tensor a({n}), b({n});
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal() + 1.0;
  }
  CHECK(wasserstein1_1d(a, b) == doctest::Approx(1.0).epsilon(0.02));

  // matches the sorted-sample oracle exactly for equal lengths
  std::vector<double> va(a.size()), vb(b.size());
  for (std::size_t i = 0; i < n; ++i) {
    va[i] = a[i];
    vb[i] = b[i];
  }
  CHECK(wasserstein1_1d(a, b) ==
        doctest::Approx(test::w1_sorted_reference(va, vb)).epsilon(1e-12));
}

TEST_CASE("wasserstein triangle inequality and unequal lengths") {
  Rng rng(711, 0);
  Tensor a({1000}), b({1000}), c({1000});
  for (std::size_t i = 0; i < 1000; ++i) {
    a[i] = rng.normal();
    b[i] = 0.5 * rng.normal() + 0.3;
    c[i] = 2.0 * rng.normal() - 1.0;
  }
  CHECK(wasserstein1_1d(a, c) <=
        wasserstein1_1d(a, b) + wasserstein1_1d(b, c) + 1e-6);

  // quantile resampling keeps same-law clouds close
  Tensor big({20000}), small({5000});
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = rng.normal();
  for (std::size_t i = 0; i < small.size(); ++i) small[i] = rng.normal();
  CHECK(wasserstein1_1d(big, small) < 0.05);
}

TEST_CASE("moment probe on a point set reproduces gaussian moments") {
  MomentReport rep = verify_finite_moments(1.0, 0.0, 0.0, 4);
  REQUIRE(rep.moments.size() == 5);
  for (const MomentCheck& m : rep.moments) {
    CHECK(m.converged);
    CHECK(m.tail <= 1e-12);
  }
  CHECK(std::abs(rep.moments[0].value - kSqrt2Pi) <= 1e-8);
  CHECK(rep.moments[1].value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(rep.moments[2].value == doctest::Approx(kSqrt2Pi).epsilon(1e-9));
  CHECK(rep.moments[3].value == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(rep.moments[4].value == doctest::Approx(3.0 * kSqrt2Pi).epsilon(1e-9));
}

TEST_CASE("moment probe on an interval and a wide smoothing scale") {
  MomentReport rep = verify_finite_moments(1.0, 0.0, 1.0, 4);
  CHECK(std::abs(rep.moments[0].value - (1.0 + kSqrt2Pi)) <= 1e-6);
  for (const MomentCheck& m : rep.moments) CHECK(m.converged);

  MomentReport wide = verify_finite_moments(5.0, -0.5, 0.5, 4);
  for (const MomentCheck& m : wide.moments) {
    CHECK(m.converged);
    CHECK(m.value > 0.0);
  }

  CHECK_THROWS_AS(verify_finite_moments(0.0, 0.0, 1.0, 2), DegenerateInputError);
  CHECK_THROWS_AS(verify_finite_moments(1.0, 2.0, 1.0, 2), DegenerateInputError);
}

TEST_CASE("posterior stability probe matches the conjugate closed form") {
  // prior N(0, 1), likelihood sigma: posterior N(y s^2 / sigma^2, s^2),
  // s^2 = (1 + 1/sigma^2)^{-1}; TV = erf(|m1 - m2| / (2 sqrt2 s))
  Tensor mean({1});
  Tensor cov({1, 1});
  cov.at(0, 0) = 1.0;
  GaussianAnalyticPrior prior(mean, cov);
  double sigma = 0.25;
  double s2 = 1.0 / (1.0 + 1.0 / (sigma * sigma));

  std::vector<std::pair<double, double>> pairs{
      {0.0, 0.0}, {0.0, 0.1}, {0.3, 0.5}, {1.0, 1.2}};
  WellPosednessReport rep = verify_well_posedness(prior, sigma, pairs);
  REQUIRE(rep.pairs.size() == 4);
  CHECK(rep.pairs[0].tv <= 1e-10);
  CHECK(rep.pairs[0].slope == 0.0);
  for (std::size_t i = 1; i < 4; ++i) {
    double m1 = pairs[i].first * s2 / (sigma * sigma);
    double m2 = pairs[i].second * s2 / (sigma * sigma);
    double want = test::gaussian_tv(m1, m2, std::sqrt(s2));
    CHECK(std::abs(rep.pairs[i].tv - want) <= 1e-6);
  }
  CHECK(rep.slopes_bounded);
  CHECK(rep.slope_min > 0.0);
  CHECK(rep.slope_max >= rep.slope_min);

  CHECK_THROWS_AS(verify_well_posedness(prior, 0.0, pairs), DegenerateInputError);
  CHECK_THROWS_AS(verify_well_posedness(prior, 1.0, {}), DegenerateInputError);
  L1Prior nodensity(1.0);
  CHECK_THROWS_AS(verify_well_posedness(nodensity, 1.0, pairs), CapabilityError);
}

TEST_CASE("report csv round trips losslessly") {
  test::TempDir tmp("report");
  DiagnosticsReport rep;
  rep.psnr_values = {{"mean", 23.456789012345678}, {"sample", 19.1}};
  AcfCurve c1;
  c1.band = "yh";
  c1.dim = 7;
  c1.values = {1.0, 0.123456789012345678, -0.25};
  AcfCurve c2;
  c2.band = "yl/median";
  c2.dim = 0;
  c2.values = {1.0, 1.0 / 3.0};
  rep.acf_curves = {c1, c2};
  rep.w1_values = {{"coord0", 0.0123456789}, {"coord1", 2e-300}};
  VerificationCheck chk;
  chk.name = "moment_k4";
  chk.passed = true;
  chk.measured = 3.0 * kSqrt2Pi;
  chk.expected = 3.0 * kSqrt2Pi + 1e-12;
  rep.checks = {chk};

  std::string path = tmp.file("report.csv");
  write_report_csv(path, rep);
  DiagnosticsReport back = read_report_csv(path);

  REQUIRE(back.psnr_values.size() == 2);
  CHECK(back.psnr_values[0].first == "mean");
  CHECK(back.psnr_values[0].second == rep.psnr_values[0].second);
  REQUIRE(back.acf_curves.size() == 2);
  CHECK(back.acf_curves[0].band == "yh");
  CHECK(back.acf_curves[0].dim == 7);
  REQUIRE(back.acf_curves[0].values.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(back.acf_curves[0].values[i] == c1.values[i]);
  CHECK(back.acf_curves[1].values[1] == c2.values[1]);
  REQUIRE(back.w1_values.size() == 2);
  CHECK(back.w1_values[1].second == 2e-300);
  REQUIRE(back.checks.size() == 1);
  CHECK(back.checks[0].name == "moment_k4");
  CHECK(back.checks[0].passed);
  CHECK(back.checks[0].measured == chk.measured);
  CHECK(back.checks[0].expected == chk.expected);
}

TEST_CASE("report csv rejects malformed input") {
  test::TempDir tmp("badreport");
  CHECK_THROWS_AS(read_report_csv(tmp.file("absent.csv")), IoError);

  {
    std::ofstream out(tmp.file("badheader.csv"));
    out << "wrong,header\n";
  }
  CHECK_THROWS_AS(read_report_csv(tmp.file("badheader.csv")), ParseError);

  {
    std::ofstream out(tmp.file("badvalue.csv"));
    out << "metric,band,dim,lag,value\n";
    out << "acf,yh,0,0,notanumber\n";
  }
  CHECK_THROWS_AS(read_report_csv(tmp.file("badvalue.csv")), ParseError);

  {
    std::ofstream out(tmp.file("shortrow.csv"));
    out << "metric,band,dim,lag,value\n";
    out << "acf,yh,0\n";
  }
  CHECK_THROWS_AS(read_report_csv(tmp.file("shortrow.csv")), ParseError);
}

TEST_SUITE_END();
