// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nfula/likelihood.hpp"
#include "nfula/prior.hpp"
#include "nfula/rng.hpp"
#include "nfula/tensor.hpp"

namespace nfula {

// Axis-aligned box, lo < hi componentwise; scalars broadcast over any
// dimension. Projection is the componentwise clamp.
struct BoxSet {
  Tensor lo, hi;  // size 1 (broadcast) or size d

  static BoxSet cube(double lo, double hi);
  static BoxSet bounds(Tensor lo, Tensor hi);

  Tensor project(const Tensor& x) const;
  bool contains(const Tensor& x) const;
};

enum class KernelKind { Ula, NfUla, PnpUla, MyUla };

std::string kernel_name(KernelKind k);
KernelKind kernel_from_name(const std::string& name);

struct SamplerConfig {
  KernelKind kind = KernelKind::NfUla;
  double delta = 1e-5;                    // step size
  double alpha = 1.0;                     // prior weight
  double lambda = 5e-5;                   // projection weight
  BoxSet box = BoxSet::cube(-100.0, 100.0);
  std::uint64_t iterations = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t thinning = 1;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double prox_lambda = 0.0;               // MYULA; 0 defaults to delta
  double noise_scale = 1.0;               // 0 silences the diffusion (test hook)
  double divergence_guard = 1e6;          // sup-norm abort threshold
  std::size_t store_budget_bytes = 512ull << 20;
  std::string spill_dir;                  // chain chunks go here when set
  std::uint64_t trace_stride = 1;
};

// Step-size guard from the drift Lipschitz budget:
// (1/6) / (L_y + alpha L + 1/lambda). All arguments must be positive.
double step_bound(double l_y, double alpha, double l_prior, double lambda);

// Advisory only: explains when delta is not covered by the theory
// (missing constants or delta above the bound). nullopt = within bounds.
std::optional<std::string> step_size_warning(const SamplerConfig& cfg,
                                             std::optional<double> l_y,
                                             std::optional<double> l_prior);

class ChainDivergedError : public Error {
public:
  ChainDivergedError(const std::string& msg, std::uint64_t iteration)
      : Error(msg), iteration(iteration) {}
  std::uint64_t iteration;
};

// Streaming per-coordinate mean/variance (Welford update).
struct RunningMoments {
  Tensor mean, m2;
  std::uint64_t n = 0;

  void update(const Tensor& x);
  Tensor variance() const;  // n-1 denominator; zeros when n < 2
};

// Retained samples, kept in memory up to a byte budget, then flushed to
// numbered tensor chunk files (shape {count, d...}) in spill_dir.
class SampleStore {
public:
  SampleStore() = default;
  SampleStore(std::vector<std::size_t> sample_shape, std::size_t budget_bytes,
              std::string spill_dir, std::string chunk_prefix = "chunk");

  void push(const Tensor& x);
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  const std::vector<std::size_t>& sample_shape() const { return shape_; }

  // Visit samples in retention order (spilled chunks first, then memory).
  void for_each(const std::function<void(const Tensor&)>& fn) const;
  // Values of one flattened coordinate across all samples.
  Tensor component_series(std::size_t index) const;
  // Flush everything to disk; afterwards the store is file-backed only.
  void flush();
  const std::vector<std::string>& chunk_files() const { return chunks_; }

private:
  void spill();
  std::vector<std::size_t> shape_;
  std::size_t sample_size_ = 0;
  std::size_t budget_bytes_ = 512ull << 20;
  std::string spill_dir_, prefix_;
  std::vector<Tensor> mem_;
  std::vector<std::string> chunks_;
  std::vector<std::size_t> chunk_counts_;
  std::size_t count_ = 0;
};

// The monitor box is a fixed diagnostic range; leaving it sets the sticky
// escape flag but does not constrain the chain.
constexpr double kMonitorLo = -0.2;
constexpr double kMonitorHi = 1.2;

struct ChainState {
  Tensor x;
  std::uint64_t k = 0;
  Rng rng{0, 0};
  RunningMoments stats;
  bool escaped = false;
  std::uint64_t projection_activations = 0;
};

struct TraceRow {
  std::uint64_t iteration = 0;
  double psnr = 0.0;      // NaN when no reference is given
  double log_lik = 0.0;
  bool projection_active = false;
};

struct ChainResult {
  ChainState state;
  SampleStore store;
  std::vector<TraceRow> trace;
};

// One Euler-Maruyama update of the selected kernel:
//   ULA:    x += delta grad_lik + delta alpha grad_prior
//   NFULA:  ULA drift + (delta/lambda)(proj(x) - x)
//   PNPULA: x += delta grad_lik + delta alpha denoiser_score
//           + (delta/lambda)(proj(x) - x)
//   MYULA:  x += delta grad_lik + (delta/lambda')(prox(x, lambda') - x)
// then x += sqrt(2 delta) Z. Updates iteration count, projection counter,
// and the monitor escape flag. Throws NonFiniteError or
// ChainDivergedError with the iteration index.
void kernel_step(ChainState& state, const Likelihood& lik, const Prior* prior,
                 const Denoiser* denoiser, const SamplerConfig& cfg);

// Runs cfg.iterations steps from x0, discarding cfg.burn_in and retaining
// every thinning-th sample afterwards. `ref` (optional) adds PSNR to the
// trace. On abort the exception propagates after flushing partial chunks.
ChainResult run_chain(const SamplerConfig& cfg, const Likelihood& lik,
                      const Prior* prior, const Denoiser* denoiser, const Tensor& x0,
                      const Tensor* ref = nullptr);

// Mean and per-coordinate sample standard deviation (n-1 denominator;
// zero for a single sample). Throws DegenerateInputError on empty stores.
std::pair<Tensor, Tensor> posterior_summaries(const SampleStore& store);

// Advisory burn-in heuristic only: true when the least-squares slope of
// the last `window` finite PSNR trace values is below `slope_threshold`
// in magnitude (dB per iteration). Never used to stop a chain.
bool psnr_plateaued(const std::vector<TraceRow>& trace, std::size_t window,
                    double slope_threshold);

}  // namespace nfula
