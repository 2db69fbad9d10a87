// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <memory>

#include <doctest.h>

#include "nfula/error.hpp"
#include "nfula/flow.hpp"
#include "nfula/linalg.hpp"
#include "nfula/prior.hpp"
#include "nfula/rng.hpp"
#include "oracles.hpp"

using namespace nfula;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

Tensor random_vec(std::size_t d, Rng& rng) {
  Tensor t(std::vector<std::size_t>{d});
  for (std::size_t i = 0; i < d; ++i) t[i] = rng.normal();
  return t;
}

Tensor eye(std::size_t d) {
  Tensor t({d, d});
  for (std::size_t i = 0; i < d; ++i) t.at(i, i) = 1.0;
  return t;
}

double soft_objective(double u, double x, double thresh) {
  return 0.5 * (u - x) * (u - x) + thresh * std::abs(u);
}

}  // namespace

TEST_SUITE_BEGIN("prior");

TEST_CASE("standard gaussian prior score and density") {
  GaussianAnalyticPrior p(Tensor({2}), eye(2));
  CHECK(p.has_grad());
  CHECK(p.has_density());
  CHECK_FALSE(p.has_prox());

  Tensor x({2});
  x[0] = 3.0;
  x[1] = 4.0;
  Tensor g = p.grad_log(x);
  CHECK(g[0] == -3.0);
  CHECK(g[1] == -4.0);
  CHECK(p.log_density(Tensor({2})) == doctest::Approx(-std::log(kTwoPi)).epsilon(1e-14));
  CHECK_THROWS_AS(p.prox(x, 0.1), CapabilityError);
}

TEST_CASE("correlated gaussian prior matches dense solve and finite differences") {
  Rng rng(501, 0);
  std::size_t d = 5;
  Tensor cov = test::random_spd(d, rng, 0.5);
  Tensor mean = random_vec(d, rng);
  GaussianAnalyticPrior p(mean, cov);
  Tensor l = cholesky(cov);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = random_vec(d, rng);
    Tensor want = -1.0 * cholesky_solve(l, x - mean);
    CHECK(norm_inf(p.grad_log(x) - want) < 1e-10);
    Tensor fd = test::fd_gradient(
        [&](const Tensor& q) { return p.log_density(q); }, x, 1e-5);
    CHECK(test::max_rel_err(p.grad_log(x), fd) <= 1e-6);
  }
}

TEST_CASE("diagonal construction agrees with the dense covariance") {
  Tensor mean({2});
  Tensor vars({2});
  vars[0] = 1.0;
  vars[1] = 4.0;
  auto p = GaussianAnalyticPrior::from_diagonal(mean, vars);
  Tensor x({2});
  x[0] = 2.0;
  x[1] = 2.0;
  Tensor g = p.grad_log(x);
  CHECK(g[0] == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(-0.5).epsilon(1e-14));

  Tensor cov({2, 2});
  cov.at(0, 0) = 1.0;
  cov.at(1, 1) = 4.0;
  GaussianAnalyticPrior dense(mean, cov);
  CHECK(p.log_density(x) == doctest::Approx(dense.log_density(x)).epsilon(1e-14));
}

TEST_CASE("gaussian prior rejects bad inputs") {
  Tensor notspd({2, 2});
  notspd.at(0, 0) = 1.0;
  notspd.at(0, 1) = 2.0;
  notspd.at(1, 0) = 2.0;
  notspd.at(1, 1) = 1.0;
  CHECK_THROWS_AS(GaussianAnalyticPrior(Tensor({2}), notspd), DegenerateInputError);
  CHECK_THROWS_AS(GaussianAnalyticPrior(Tensor({3}), eye(2)), ShapeError);
  GaussianAnalyticPrior p(Tensor({2}), eye(2));
  CHECK_THROWS_AS(p.grad_log(Tensor({3})), ShapeError);
}

TEST_CASE("soft thresholding prox") {
  L1Prior p(1.0);
  CHECK(p.has_prox());
  CHECK_FALSE(p.has_grad());
  CHECK_FALSE(p.has_density());

  Tensor x({5});
  x[0] = 0.5;
  x[1] = -0.3;
  x[2] = 0.1;
  x[3] = 0.0;
  x[4] = -2.0;
  Tensor out = p.prox(x, 0.2);
  CHECK(out[0] == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(-0.1).epsilon(1e-14));
  CHECK(out[2] == 0.0);
  CHECK(out[3] == 0.0);
  CHECK(out[4] == doctest::Approx(-1.8).epsilon(1e-14));

  // weight scales the threshold
  L1Prior heavy(2.0);
  Tensor out2 = heavy.prox(x, 0.2);
  CHECK(out2[0] == doctest::Approx(0.1).epsilon(1e-13));
  CHECK(out2[1] == 0.0);

  CHECK_THROWS_AS(p.grad_log(x), CapabilityError);
  CHECK_THROWS_AS(p.log_density(x), CapabilityError);
  CHECK_THROWS_AS(p.prox(x, 0.0), DegenerateInputError);
  CHECK_THROWS_AS(L1Prior(0.0), DegenerateInputError);
}

TEST_CASE("prox minimizes the implicit objective") {
  // brute-force grid oracle over [-5, 5]
  for (double weight : {0.7, 1.3}) {
    L1Prior p(weight);
    for (double lam : {0.05, 0.4}) {
      for (double xv : {-2.0, -0.31, 0.002, 1.459}) {
        Tensor x({1});
        x[0] = xv;
        double got = p.prox(x, lam)[0];
        double best_u = -5.0, best_f = soft_objective(-5.0, xv, lam * weight);
        for (long i = 1; i <= 100000; ++i) {
          double u = -5.0 + static_cast<double>(i) * 1e-4;
          double f = soft_objective(u, xv, lam * weight);
          if (f < best_f) {
            best_f = f;
            best_u = u;
          }
        }
        CHECK(std::abs(got - best_u) <= 1e-3);
      }
    }
  }
}

TEST_CASE("patch grid origins cover exactly the full patches") {
  auto g = PatchGrid::make(16, 16, 4, 4);
  CHECK(g.origins.size() == 16);
  CHECK(g.origins.front() == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK(g.origins.back() == std::pair<std::size_t, std::size_t>{12, 12});

  // stride not dividing (side - patch): last full origin still included
  auto g2 = PatchGrid::make(10, 10, 4, 3);
  CHECK(g2.origins.size() == 9);
  for (auto [r, c] : g2.origins) {
    CHECK(r + 4 <= 10);
    CHECK(c + 4 <= 10);
  }

  CHECK_THROWS_AS(PatchGrid::make(8, 8, 0, 1), DegenerateInputError);
  CHECK_THROWS_AS(PatchGrid::make(8, 8, 4, 0), DegenerateInputError);
  CHECK_THROWS_AS(PatchGrid::make(3, 3, 4, 1), ShapeError);
}

TEST_CASE("patch extraction and scatter are adjoint") {
  Rng rng(502, 0);
  Tensor img({12, 10});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = rng.normal();
  for (auto [r0, c0] : {std::pair<std::size_t, std::size_t>{0, 0}, {5, 3}, {8, 6}}) {
    Tensor patch_dir(std::vector<std::size_t>{16});
    for (std::size_t i = 0; i < 16; ++i) patch_dir[i] = rng.normal();
    Tensor extracted = extract_patch(img, 10, r0, c0, 4);
    Tensor scattered({12, 10});
    scatter_add_patch(scattered, 10, r0, c0, 4, patch_dir);
    double lhs = dot(extracted, patch_dir);
    double rhs = dot(img.reshaped({120}), scattered.reshaped({120}));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (std::abs(lhs) + 1.0));
  }
}

TEST_CASE("single-patch prior degenerates to the flow prior") {
  Rng rng(503, 0);
  auto model = std::make_shared<FlowModel>(build_coupling_flow(16, 2, {16}, false, true, rng));
  PatchPrior pp(model, 4, 4, 4, 1);
  FlowPrior fp(model);
  CHECK(pp.grid().origins.size() == 1);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x({4, 4});
    for (std::size_t i = 0; i < 16; ++i) x[i] = rng.normal();
    Tensor a = pp.grad_log(x);
    Tensor b = fp.grad_log(x);
    CHECK(norm_inf(a - b.reshaped({4, 4})) == 0.0);
    CHECK(pp.patch_sum_log_density(x) == fp.log_density(x));
  }
}

TEST_CASE("patch prior gradient matches finite differences") {
  Rng rng(504, 0);
  auto model = std::make_shared<FlowModel>(build_coupling_flow(16, 2, {16}, false, true, rng));
  PatchPrior pp(model, 16, 16, 4, 4);
  Tensor x({16, 16});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.5 + 0.1 * rng.normal();
  Tensor fd = test::fd_gradient(
      [&](const Tensor& q) { return pp.patch_sum_log_density(q); }, x, 1e-5);
  CHECK(test::max_rel_err(pp.grad_log(x).reshaped({256}), fd.reshaped({256})) <= 1e-4);
}

TEST_CASE("patch prior validates shapes") {
  Rng rng(505, 0);
  auto model = std::make_shared<FlowModel>(build_coupling_flow(16, 1, {8}, false, false, rng));
  CHECK_THROWS_AS(PatchPrior(model, 16, 16, 3, 2), ShapeError);  // 9 != 16
  PatchPrior pp(model, 16, 16, 4, 4);
  CHECK_THROWS_AS(pp.grad_log(Tensor({8, 8})), ShapeError);
}

TEST_CASE("gaussian mmse denoiser closed form") {
  GaussianMmseDenoiser den(Tensor({3}), eye(3), 1.0);
  Tensor x({3});
  x[0] = 2.0;
  x[1] = -1.0;
  x[2] = 0.5;
  Tensor d = den.denoise(x);
  CHECK(d[0] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(d[1] == doctest::Approx(-0.5).epsilon(1e-13));
  CHECK(d[2] == doctest::Approx(0.25).epsilon(1e-13));
  Tensor s = den.score(x);
  CHECK(s[0] == doctest::Approx(-1.0).epsilon(1e-13));

  // vanishing noise returns the input
  GaussianMmseDenoiser sharp(Tensor({3}), eye(3), 1e-10);
  CHECK(norm_inf(sharp.denoise(x) - x) < 1e-8);

  CHECK_THROWS_AS(GaussianMmseDenoiser(Tensor({3}), eye(3), 0.0), DegenerateInputError);
}

TEST_CASE("tweedie identity ties score to the denoising residual") {
  Rng rng(506, 0);
  std::size_t d = 4;
  Tensor cov = test::random_spd(d, rng, 0.3);
  Tensor mean = random_vec(d, rng);
  double eps = 0.37;
  GaussianMmseDenoiser den(mean, cov, eps);

  Tensor smoothed = cov;
  for (std::size_t i = 0; i < d; ++i) smoothed.at(i, i) += eps;
  Tensor l = cholesky(smoothed);

  for (int trial = 0; trial < 100; ++trial) {
    Tensor x = random_vec(d, rng);
    Tensor quotient = (1.0 / eps) * (den.denoise(x) - x);
    Tensor score = den.score(x);
    CHECK(norm_inf(quotient - score) <= 1e-10);
    Tensor analytic = -1.0 * cholesky_solve(l, x - mean);
    CHECK(norm_inf(score - analytic) <= 1e-10);
  }
}

TEST_CASE("analytic prior and mmse denoiser share the mvn score path bitwise") {
  Rng rng(507, 0);
  std::size_t d = 4;
  Tensor cov = test::random_spd(d, rng, 0.3);
  Tensor mean = random_vec(d, rng);
  double eps = 0.2;
  Tensor smoothed = cov;
  for (std::size_t i = 0; i < d; ++i) smoothed.at(i, i) += eps;

  GaussianMmseDenoiser den(mean, cov, eps);
  GaussianAnalyticPrior prior(mean, smoothed);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_vec(d, rng);
    CHECK(norm_inf(den.score(x) - prior.grad_log(x)) == 0.0);
  }

  // the kernel itself against a dense solve
  Tensor l = cholesky(smoothed);
  Tensor x = random_vec(d, rng);
  CHECK(norm_inf(mvn_score(l, mean, x) + cholesky_solve(l, x - mean)) < 1e-12);
}

TEST_CASE("flow prior wraps the model density") {
  FlowModel id;
  id.dim = 3;
  FlowPrior p(std::make_shared<FlowModel>(id));
  Tensor x({3});
  x[0] = 1.0;
  x[1] = -2.0;
  x[2] = 0.5;
  Tensor g = p.grad_log(x);
  CHECK(g[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(p.log_density(x) ==
        doctest::Approx(-1.5 * std::log(kTwoPi) - 0.5 * (1.0 + 4.0 + 0.25))
            .epsilon(1e-13));
}

TEST_CASE("score function prior and external denoiser wrappers") {
  ScoreFunctionPrior sp([](const Tensor& x) { return -2.0 * x; }, "linear drift");
  CHECK(sp.has_grad());
  CHECK_FALSE(sp.has_density());
  Tensor x({2});
  x[0] = 1.5;
  CHECK(sp.grad_log(x)[0] == -3.0);
  CHECK(sp.describe() == "linear drift");
  CHECK_THROWS_AS(sp.log_density(x), CapabilityError);
  CHECK_THROWS_AS(sp.prox(x, 0.1), CapabilityError);

  // default score is the tweedie quotient of the wrapped denoiser
  ExternalDenoiser ext([](const Tensor& v) { return 0.8 * v; }, 0.25, "shrink");
  Tensor s = ext.score(x);
  CHECK(s[0] == doctest::Approx(-0.2 * 1.5 / 0.25).epsilon(1e-14));
  CHECK(ext.eps() == 0.25);
  CHECK(ext.describe() == "shrink");
}

TEST_SUITE_END();
