// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/sampler.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>

#include "nfula/error.hpp"
#include "nfula/nft.hpp"

namespace nfula {

// BoxSet ---------------------------------------------------------------------

BoxSet BoxSet::cube(double lo, double hi) {
  if (!(lo < hi)) throw DegenerateInputError("box: requires lo < hi");
  BoxSet b;
  b.lo = Tensor::scalar(lo);
  b.hi = Tensor::scalar(hi);
  return b;
}

BoxSet BoxSet::bounds(Tensor lo, Tensor hi) {
  require_same_shape(lo, hi, "box bounds");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i])) throw DegenerateInputError("box: requires lo < hi componentwise");
  BoxSet b;
  b.lo = std::move(lo);
  b.hi = std::move(hi);
  return b;
}

Tensor BoxSet::project(const Tensor& x) const {
  bool broadcast = lo.size() == 1;
  if (!broadcast && lo.size() != x.size())
    throw ShapeError("box projection: bound size mismatch");
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double l = broadcast ? lo[0] : lo[i];
    double h = broadcast ? hi[0] : hi[i];
    y[i] = std::min(h, std::max(l, y[i]));
  }
  return y;
}

bool BoxSet::contains(const Tensor& x) const {
  bool broadcast = lo.size() == 1;
  if (!broadcast && lo.size() != x.size())
    throw ShapeError("box containment: bound size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) {
    double l = broadcast ? lo[0] : lo[i];
    double h = broadcast ? hi[0] : hi[i];
    if (x[i] < l || x[i] > h) return false;
  }
  return true;
}

std::string kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::Ula: return "ula";
    case KernelKind::NfUla: return "nfula";
    case KernelKind::PnpUla: return "pnpula";
    case KernelKind::MyUla: return "myula";
  }
  return "unknown";
}

KernelKind kernel_from_name(const std::string& name) {
  if (name == "ula") return KernelKind::Ula;
  if (name == "nfula") return KernelKind::NfUla;
  if (name == "pnpula") return KernelKind::PnpUla;
  if (name == "myula") return KernelKind::MyUla;
  throw ParseError("unknown sampler kernel: " + name);
}

double step_bound(double l_y, double alpha, double l_prior, double lambda) {
  if (!(l_y > 0.0) || !(alpha > 0.0) || !(l_prior > 0.0) || !(lambda > 0.0))
    throw DegenerateInputError("step bound: all arguments must be positive");
  return (1.0 / 6.0) / (l_y + alpha * l_prior + 1.0 / lambda);
}

std::optional<std::string> step_size_warning(const SamplerConfig& cfg,
                                             std::optional<double> l_y,
                                             std::optional<double> l_prior) {
  if (cfg.kind != KernelKind::NfUla) return std::nullopt;
  if (!l_y)
    return std::string("likelihood Lipschitz constant unavailable; the step bound "
                       "cannot be checked");
  if (!l_prior)
    return std::string("prior Lipschitz constant unavailable; the step bound "
                       "cannot be checked");
  double bound = step_bound(*l_y, cfg.alpha, *l_prior, cfg.lambda);
  if (cfg.delta >= bound) {
    std::ostringstream s;
    s.precision(17);
    s << "delta " << cfg.delta << " is at or above the step bound " << bound
      << "; the bound is not strict, but convergence is no longer covered by it";
    return s.str();
  }
  return std::nullopt;
}

// RunningMoments ----------------------------------------------------------------

void RunningMoments::update(const Tensor& x) {
  if (n == 0) {
    mean = Tensor(x.shape());
    m2 = Tensor(x.shape());
  }
  require_same_shape(mean, x, "running moments");
  n += 1;
  double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double delta = x[i] - mean[i];
    mean[i] += delta * inv_n;
    m2[i] += delta * (x[i] - mean[i]);
  }
}

Tensor RunningMoments::variance() const {
  if (n < 2) return Tensor(mean.empty() ? std::vector<std::size_t>{1} : mean.shape());
  Tensor v = m2;
  v *= 1.0 / static_cast<double>(n - 1);
  return v;
}

// SampleStore ----------------------------------------------------------------------

SampleStore::SampleStore(std::vector<std::size_t> sample_shape, std::size_t budget_bytes,
                         std::string spill_dir, std::string chunk_prefix)
    : shape_(std::move(sample_shape)),
      budget_bytes_(budget_bytes),
      spill_dir_(std::move(spill_dir)),
      prefix_(std::move(chunk_prefix)) {
  if (shape_.empty()) throw ShapeError("sample store: empty sample shape");
  sample_size_ = 1;
  for (std::size_t e : shape_) sample_size_ *= e;
  if (sample_size_ == 0) throw ShapeError("sample store: empty sample shape");
}

void SampleStore::push(const Tensor& x) {
  if (x.size() != sample_size_) throw ShapeError("sample store: sample size mismatch");
  mem_.push_back(x);
  ++count_;
  if (mem_.size() * sample_size_ * sizeof(double) > budget_bytes_) spill();
}

void SampleStore::spill() {
  if (mem_.empty()) return;
  if (spill_dir_.empty())
    throw CapabilityError("sample store exceeded its memory budget and no spill "
                          "directory is configured");
  std::vector<std::size_t> shape;
  shape.push_back(mem_.size());
  shape.insert(shape.end(), shape_.begin(), shape_.end());
  Tensor block(shape);
  for (std::size_t i = 0; i < mem_.size(); ++i)
    for (std::size_t j = 0; j < sample_size_; ++j)
      block[i * sample_size_ + j] = mem_[i][j];
  char name[32];
  std::snprintf(name, sizeof(name), "%s_%04zu.nft", prefix_.c_str(), chunks_.size());
  std::filesystem::create_directories(spill_dir_);
  std::string path = (std::filesystem::path(spill_dir_) / name).string();
  write_nft(path, block);
  chunks_.push_back(path);
  chunk_counts_.push_back(mem_.size());
  mem_.clear();
}

void SampleStore::flush() { spill(); }

void SampleStore::for_each(const std::function<void(const Tensor&)>& fn) const {
  for (const std::string& path : chunks_) {
    Tensor block = read_nft(path);
    std::size_t n = block.shape()[0];
    for (std::size_t i = 0; i < n; ++i) {
      Tensor s(shape_);
      for (std::size_t j = 0; j < sample_size_; ++j) s[j] = block[i * sample_size_ + j];
      fn(s);
    }
  }
  for (const Tensor& s : mem_) fn(s);
}

Tensor SampleStore::component_series(std::size_t index) const {
  if (index >= sample_size_) throw ShapeError("sample store: component out of range");
  if (count_ == 0) throw DegenerateInputError("sample store is empty");
  Tensor series({count_});
  std::size_t at = 0;
  for_each([&](const Tensor& s) { series[at++] = s[index]; });
  return series;
}

// Kernels ---------------------------------------------------------------------------

namespace {

bool outside_monitor(const Tensor& x) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] < kMonitorLo || x[i] > kMonitorHi) return true;
  return false;
}

}  // namespace

void kernel_step(ChainState& state, const Likelihood& lik, const Prior* prior,
                 const Denoiser* denoiser, const SamplerConfig& cfg) {
  if (!(cfg.delta > 0.0)) throw DegenerateInputError("kernel: delta must be positive");
  const Tensor& x = state.x;
  Tensor next = x;

  axpy(cfg.delta, lik.grad_log(x), next);

  switch (cfg.kind) {
    case KernelKind::Ula:
    case KernelKind::NfUla: {
      if (!prior || !prior->has_grad())
        throw CapabilityError("this kernel needs a prior with a gradient");
      axpy(cfg.delta * cfg.alpha, prior->grad_log(x), next);
      break;
    }
    case KernelKind::PnpUla: {
      if (!denoiser) throw CapabilityError("pnp kernel needs a denoiser");
      // (delta alpha / eps)(D(x) - x) == delta alpha * score(x)
      axpy(cfg.delta * cfg.alpha, denoiser->score(x), next);
      break;
    }
    case KernelKind::MyUla: {
      if (!prior || !prior->has_prox())
        throw CapabilityError("proximal kernel needs a prior with a proximal map");
      double lp = cfg.prox_lambda > 0.0 ? cfg.prox_lambda : cfg.delta;
      Tensor p = prior->prox(x, lp);
      p -= x;
      axpy(cfg.delta / lp, p, next);
      break;
    }
  }

  if (cfg.kind == KernelKind::NfUla || cfg.kind == KernelKind::PnpUla) {
    Tensor proj = cfg.box.project(x);
    bool active = false;
    for (std::size_t i = 0; i < proj.size(); ++i)
      if (proj[i] != x[i]) { active = true; break; }
    if (active) ++state.projection_activations;
    proj -= x;
    axpy(cfg.delta / cfg.lambda, proj, next);
  }

  if (cfg.noise_scale != 0.0) {
    double scale = cfg.noise_scale * std::sqrt(2.0 * cfg.delta);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += scale * state.rng.normal();
  }

  state.k += 1;
  if (!next.all_finite())
    throw NonFiniteError("chain state became non-finite at iteration " +
                         std::to_string(state.k));
  if (norm_inf(next) > cfg.divergence_guard)
    throw ChainDivergedError("chain exceeded the divergence guard at iteration " +
                                 std::to_string(state.k),
                             state.k);
  if (!state.escaped && outside_monitor(next)) state.escaped = true;
  state.x = std::move(next);
}

ChainResult run_chain(const SamplerConfig& cfg, const Likelihood& lik,
                      const Prior* prior, const Denoiser* denoiser, const Tensor& x0,
                      const Tensor* ref) {
  if (cfg.iterations == 0) throw DegenerateInputError("run_chain: zero iterations");
  if (cfg.burn_in >= cfg.iterations)
    throw DegenerateInputError("run_chain: burn-in must be smaller than the iteration count");
  if (cfg.thinning == 0) throw DegenerateInputError("run_chain: thinning must be >= 1");
  if (x0.size() != lik.op()->input_size())
    throw ShapeError("run_chain: x0 does not match the operator input");
  x0.require_finite("initial state");
  if (ref && ref->size() != x0.size()) throw ShapeError("run_chain: reference size mismatch");

  ChainResult res;
  res.state.x = x0;
  res.state.rng = Rng(cfg.seed, cfg.stream);
  res.store = SampleStore(x0.shape(), cfg.store_budget_bytes, cfg.spill_dir);

  auto record_trace = [&](bool proj_active) {
    TraceRow row;
    row.iteration = res.state.k;
    row.log_lik = lik.log_density(res.state.x);
    row.projection_active = proj_active;
    if (ref) {
      double mse = 0.0;
      for (std::size_t i = 0; i < x0.size(); ++i) {
        double d = res.state.x[i] - (*ref)[i];
        mse += d * d;
      }
      mse /= static_cast<double>(x0.size());
      row.psnr = mse == 0.0 ? 200.0 : std::min(200.0, 10.0 * std::log10(1.0 / mse));
    } else {
      row.psnr = std::numeric_limits<double>::quiet_NaN();
    }
    res.trace.push_back(row);
  };

  std::uint64_t stride = cfg.trace_stride == 0 ? 1 : cfg.trace_stride;
  try {
    for (std::uint64_t k = 1; k <= cfg.iterations; ++k) {
      std::uint64_t proj_before = res.state.projection_activations;
      kernel_step(res.state, lik, prior, denoiser, cfg);
      if (k > cfg.burn_in && (k - cfg.burn_in - 1) % cfg.thinning == 0) {
        res.store.push(res.state.x);
        res.state.stats.update(res.state.x);
      }
      if (k % stride == 0 || k == cfg.iterations)
        record_trace(res.state.projection_activations != proj_before);
    }
  } catch (...) {
    if (!cfg.spill_dir.empty()) res.store.flush();  // keep partial results
    throw;
  }
  if (!cfg.spill_dir.empty()) res.store.flush();
  return res;
}

std::pair<Tensor, Tensor> posterior_summaries(const SampleStore& store) {
  if (store.empty()) throw DegenerateInputError("posterior summaries: store is empty");
  RunningMoments m;
  store.for_each([&](const Tensor& s) { m.update(s); });
  Tensor sd = m.variance();
  for (std::size_t i = 0; i < sd.size(); ++i) sd[i] = std::sqrt(sd[i]);
  if (store.size() < 2) sd = Tensor(m.mean.shape());
  return {m.mean, sd};
}

bool psnr_plateaued(const std::vector<TraceRow>& trace, std::size_t window,
                    double slope_threshold) {
  if (window < 2 || !(slope_threshold > 0.0)) return false;
  std::vector<std::pair<double, double>> pts;
  for (auto it = trace.rbegin(); it != trace.rend() && pts.size() < window; ++it)
    if (std::isfinite(it->psnr))
      pts.emplace_back(static_cast<double>(it->iteration), it->psnr);
  if (pts.size() < window) return false;
  double mx = 0.0, my = 0.0;
  for (auto [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0.0, sxy = 0.0;
  for (auto [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0) return false;
  return std::abs(sxy / sxx) < slope_threshold;
}

}  // namespace nfula
