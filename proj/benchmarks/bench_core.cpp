// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>

#include "nfula/flow.hpp"
#include "nfula/likelihood.hpp"
#include "nfula/operators.hpp"
#include "nfula/phantom.hpp"
#include "nfula/prior.hpp"
#include "nfula/rng.hpp"
#include "nfula/sampler.hpp"

using namespace nfula;

namespace {

Tensor unit_diag(std::size_t d) {
  Tensor cov({d, d});
  for (std::size_t i = 0; i < d; ++i) cov.at(i, i) = 1.0;
  return cov;
}

void bench_kernel_step(benchmark::State& state) {
  const std::size_t d = static_cast<std::size_t>(state.range(0));
  auto op = make_identity({d});
  Rng rng(1, 0);
  Tensor y = gaussian_vector(rng, d);
  Likelihood lik = Likelihood::gaussian(op, y, 1.0);
  GaussianAnalyticPrior prior(Tensor({d}), unit_diag(d));
  SamplerConfig cfg;
  cfg.kind = KernelKind::NfUla;
  cfg.delta = 1e-4;
  ChainState st;
  st.x = y;
  st.rng = Rng(1, 1);
  for (auto _ : state) {
    kernel_step(st, lik, &prior, nullptr, cfg);
    benchmark::DoNotOptimize(st.x.data());
  }
}

void bench_flow_grad(benchmark::State& state) {
  const std::size_t d = static_cast<std::size_t>(state.range(0));
  Rng rng(2, 0);
  FlowModel model = build_coupling_flow(d, 4, {32, 32}, false, true, rng);
  Tensor x = gaussian_vector(rng, d);
  for (auto _ : state) {
    Tensor g = grad_log_density(model, x);
    benchmark::DoNotOptimize(g.data());
  }
}

void bench_radon_apply(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  const double pi = 3.14159265358979323846;
  const auto n_det = static_cast<std::size_t>(
      std::ceil(static_cast<double>(side) * std::sqrt(2.0)));
  auto op = make_radon(side, 60, 0.1 * pi, 0.9 * pi, n_det);
  Tensor img = disk_phantom(side);
  for (auto _ : state) {
    Tensor s = op->apply(img);
    benchmark::DoNotOptimize(s.data());
  }
}

}  // namespace

BENCHMARK(bench_kernel_step)->Arg(64)->Arg(1024);
BENCHMARK(bench_flow_grad)->Arg(4)->Arg(16);
BENCHMARK(bench_radon_apply)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
