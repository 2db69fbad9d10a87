// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <thread>

#include "nfula/checkpoint.hpp"
#include "nfula/error.hpp"
#include "nfula/image_io.hpp"
#include "nfula/likelihood.hpp"
#include "nfula/nft.hpp"
#include "nfula/operators.hpp"
#include "nfula/phantom.hpp"
#include "nfula/prior.hpp"
#include "nfula/sampler.hpp"

namespace nfula {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

constexpr double kPi = 3.14159265358979323846;

std::string require_problem(const Config& cfg) {
  std::string problem = cfg.get_string("problem", "deblur");
  if (problem != "deblur" && problem != "inpaint" && problem != "ct" &&
      problem != "toy2d")
    throw ParseError("unknown problem: " + problem +
                     " (expected deblur, inpaint, ct, or toy2d)");
  return problem;
}

Tensor load_tensor_file(const std::string& path) {
  if (ends_with(path, ".pgm")) return read_pgm(path);
  return read_nft(path);
}

// Operator assembly shared by degrade and sample. Mask layout depends only
// on (mask.seed, stream 2), so re-running with the seed used at degrade
// time reproduces the identical operator.
OperatorPtr build_operator(const Config& cfg, const std::string& problem,
                           const std::vector<std::size_t>& image_shape,
                           std::uint64_t seed, Config& resolved) {
  if (problem == "deblur") {
    std::uint64_t size = cfg.get_u64("blur.size", 9);
    resolved.set_u64("blur.size", size);
    return make_blur(image_shape, horizontal_blur_kernel(size));
  }
  if (problem == "inpaint") {
    double keep = cfg.get_double("mask.keep", 0.2);
    std::uint64_t mask_seed = cfg.get_u64("mask.seed", seed);
    resolved.set_double("mask.keep", keep);
    resolved.set_u64("mask.seed", mask_seed);
    Rng rng(mask_seed, 2);
    return make_mask(image_shape, keep, rng);
  }
  if (problem == "ct") {
    if (image_shape.size() != 2 || image_shape[0] != image_shape[1])
      throw ShapeError("ct needs a square 2-D image");
    std::size_t side = image_shape[0];
    std::uint64_t n_angles = cfg.get_u64("ct.angles", 60);
    auto default_det =
        static_cast<std::uint64_t>(std::ceil(static_cast<double>(side) * M_SQRT2));
    std::uint64_t n_det = cfg.get_u64("ct.detectors", default_det);
    double lo = cfg.get_double("ct.angle_lo", 0.1 * kPi);
    double hi = cfg.get_double("ct.angle_hi", 0.9 * kPi);
    resolved.set_u64("ct.angles", n_angles);
    resolved.set_u64("ct.detectors", n_det);
    resolved.set_double("ct.angle_lo", lo);
    resolved.set_double("ct.angle_hi", hi);
    return make_radon(side, n_angles, lo, hi, n_det);
  }
  return make_identity(image_shape);  // toy2d
}

void echo_config(const Config& resolved, const std::string& dir,
                 const std::string& command) {
  resolved.write_file(join(dir, command + ".config.txt"));
}

double tensor_psnr(const Tensor& a, const Tensor& b) {
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  return mse == 0.0 ? 200.0 : std::min(200.0, 10.0 * std::log10(1.0 / mse));
}

std::vector<std::string> list_files(const std::string& dir,
                                    const std::vector<std::string>& extensions) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string p = entry.path().string();
    for (const auto& ext : extensions)
      if (ends_with(p, ext)) {
        files.push_back(p);
        break;
      }
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::size_t thread_cap() {
  if (const char* env = std::getenv("NFL_THREADS")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
    return 1;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? hc : 1;
}

// degrade ---------------------------------------------------------------------

int cmd_degrade(const Config& cfg, std::ostream& log) {
  Config resolved;
  std::string problem = require_problem(cfg);
  std::string out = cfg.get_string("out", "out");
  std::uint64_t seed = cfg.get_u64("seed", 0);
  resolved.set("problem", problem);
  resolved.set("out", out);
  resolved.set_u64("seed", seed);

  std::string source = cfg.get_string("image.source", "disk");
  std::uint64_t side = cfg.get_u64("image.side", 32);
  resolved.set("image.source", source);
  resolved.set_u64("image.side", side);
  Tensor x_true;
  if (ends_with(source, ".nft") || ends_with(source, ".pgm"))
    x_true = load_tensor_file(source);
  else if (problem == "toy2d")
    x_true = Tensor::vector({0.5, 0.5});
  else
    x_true = make_phantom(source, side);

  OperatorPtr op = build_operator(cfg, problem, x_true.shape(), seed, resolved);

  std::string noise = cfg.get_string("noise.model", "gaussian");
  resolved.set("noise.model", noise);
  Rng noise_rng(seed, 1);
  Tensor y;
  if (noise == "gaussian") {
    double sigma = cfg.get_double("noise.sigma", problem == "ct" ? 1.0 : 0.02);
    resolved.set_double("noise.sigma", sigma);
    y = simulate_gaussian_observation(*op, x_true, sigma, noise_rng);
  } else if (noise == "poisson") {
    double n0 = cfg.get_double("poisson.n0", 4096.0);
    double mu = cfg.get_double("poisson.mu", 0.05);
    resolved.set_double("poisson.n0", n0);
    resolved.set_double("poisson.mu", mu);
    y = simulate_poisson_observation(*op, x_true, n0, mu, noise_rng);
  } else {
    throw ParseError("unknown noise model: " + noise + " (expected gaussian or poisson)");
  }
  cfg.reject_unknown();

  ensure_dir(out);
  write_nft(join(out, "x_true.nft"), x_true);
  write_nft(join(out, "y.nft"), y);
  std::ofstream desc(join(out, "operator.txt"));
  desc << op->describe() << "\n";
  echo_config(resolved, out, "degrade");

  log << "wrote " << join(out, "x_true.nft") << " and " << join(out, "y.nft") << "\n";
  if (x_true.same_shape(y))
    log << "observation psnr = " << fmt(tensor_psnr(y, x_true)) << "\n";
  return 0;
}

// train-flow -------------------------------------------------------------------

int cmd_train_flow(const Config& cfg, std::ostream& log) {
  Config resolved;
  std::string out = cfg.get_string("out", "out");
  std::uint64_t seed = cfg.get_u64("seed", 0);
  resolved.set("out", out);
  resolved.set_u64("seed", seed);

  std::string data_dir = cfg.get_string("data.dir", "");
  std::string generator =
      cfg.get_string("data.generator", data_dir.empty() ? "mixture2d" : "none");
  std::uint64_t count = cfg.get_u64("data.count", 10000);
  std::uint64_t side = cfg.get_u64("image.side", 32);
  std::uint64_t patch = cfg.get_u64("patch.size", 0);
  std::uint64_t stride = cfg.get_u64("patch.stride", 2);
  if (!data_dir.empty()) resolved.set("data.dir", data_dir);
  resolved.set("data.generator", generator);
  resolved.set_u64("data.count", count);
  resolved.set_u64("image.side", side);
  resolved.set_u64("patch.size", patch);
  resolved.set_u64("patch.stride", stride);

  Rng data_rng(seed, 3);
  std::vector<Tensor> images;
  std::vector<Tensor> data;
  if (!data_dir.empty()) {
    for (const std::string& f : list_files(data_dir, {".nft", ".pgm"}))
      images.push_back(load_tensor_file(f));
    if (images.empty()) throw IoError("no .nft or .pgm files in " + data_dir);
  } else if (generator == "gauss2d") {
    for (std::uint64_t i = 0; i < count; ++i) {
      double z0 = data_rng.normal(), z1 = data_rng.normal();
      data.push_back(Tensor::vector({0.5 + 0.25 * z0, 0.5 + 0.12 * z0 + 0.2 * z1}));
    }
  } else if (generator == "mixture2d") {
    for (std::uint64_t i = 0; i < count; ++i) {
      double m = data_rng.uniform_index(2) == 0 ? 0.3 : 0.7;
      data.push_back(Tensor::vector(
          {m + 0.1 * data_rng.normal(), m + 0.1 * data_rng.normal()}));
    }
  } else if (generator == "disks") {
    for (std::uint64_t i = 0; i < count; ++i)
      images.push_back(random_disks_phantom(side, data_rng));
  } else {
    throw ParseError("unknown data generator: " + generator +
                     " (expected gauss2d, mixture2d, or disks)");
  }
  for (const Tensor& img : images) {
    if (patch > 0) {
      PatchGrid grid = PatchGrid::make(img.rows(), img.cols(), patch, stride);
      for (auto [r0, c0] : grid.origins)
        data.push_back(extract_patch(img, img.cols(), r0, c0, patch));
    } else {
      data.push_back(img.reshaped({img.size()}));
    }
  }
  std::size_t d = data.at(0).size();

  std::uint64_t couplings = cfg.get_u64("flow.couplings", 4);
  std::uint64_t hidden = cfg.get_u64("flow.hidden", 0);
  bool affine = cfg.get_bool("flow.affine", false);
  bool actnorm = cfg.get_bool("flow.actnorm", true);
  resolved.set_u64("flow.couplings", couplings);
  resolved.set_u64("flow.hidden", hidden);
  resolved.set("flow.affine", affine ? "true" : "false");
  resolved.set("flow.actnorm", actnorm ? "true" : "false");
  std::vector<std::size_t> hidden_widths;
  if (hidden > 0) hidden_widths = {hidden, hidden};

  TrainConfig tc;
  tc.epochs = cfg.get_u64("train.epochs", 100);
  tc.batch_size = cfg.get_u64("train.batch", 128);
  tc.lr = cfg.get_double("train.lr", 1e-3);
  tc.jitter_sigma = cfg.get_double("train.jitter", 1.0 / 255.0);
  bool resume = cfg.get_bool("train.resume", false);
  std::string ckpt = cfg.get_string("checkpoint.path", join(out, "flow.nfck"));
  resolved.set_u64("train.epochs", tc.epochs);
  resolved.set_u64("train.batch", tc.batch_size);
  resolved.set_double("train.lr", tc.lr);
  resolved.set_double("train.jitter", tc.jitter_sigma);
  resolved.set("train.resume", resume ? "true" : "false");
  resolved.set("checkpoint.path", ckpt);
  cfg.reject_unknown();

  ensure_dir(out);
  FlowModel model;
  TrainState state;
  Rng train_rng(seed, 4);
  if (resume && fs::exists(ckpt)) {
    FlowCheckpoint loaded = load_checkpoint(ckpt);
    if (!loaded.has_train_state)
      throw ParseError("checkpoint has no optimizer state to resume from: " + ckpt);
    model = std::move(loaded.model);
    state = std::move(loaded.train);
    train_rng = Rng(loaded.rng_seed, loaded.rng_stream);
    train_rng.set_counter(loaded.rng_counter);
    log << "resuming from epoch " << state.epochs_done << "\n";
  } else {
    model = build_coupling_flow(d, couplings, hidden_widths, affine, actnorm, train_rng);
  }

  TrainingTrace trace = train_flow(model, data, tc, train_rng, &state);
  save_checkpoint(ckpt, model, &state, &train_rng);

  std::ofstream loss(join(out, "loss.csv"));
  loss << "epoch,loss\n";
  std::uint64_t first = state.epochs_done - trace.epoch_loss.size() + 1;
  for (std::size_t i = 0; i < trace.epoch_loss.size(); ++i)
    loss << first + i << "," << fmt(trace.epoch_loss[i]) << "\n";
  echo_config(resolved, out, "train-flow");

  log << "checkpoint " << ckpt << " after " << state.epochs_done << " epochs\n";
  if (!trace.epoch_loss.empty())
    log << "final loss = " << fmt(trace.epoch_loss.back()) << "\n";
  return 0;
}

// sample ------------------------------------------------------------------------

namespace {

struct ChainOutcome {
  std::optional<ChainResult> result;
  std::string error;
};

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  out << "iteration,psnr,log_lik,projection_active\n";
  for (const TraceRow& row : trace)
    out << row.iteration << "," << fmt(row.psnr) << "," << fmt(row.log_lik) << ","
        << (row.projection_active ? 1 : 0) << "\n";
}

}  // namespace

int cmd_sample(const Config& cfg, std::ostream& log) {
  Config resolved;
  std::string problem = require_problem(cfg);
  std::string out = cfg.get_string("out", "out");
  std::uint64_t seed = cfg.get_u64("seed", 0);
  resolved.set("problem", problem);
  resolved.set("out", out);
  resolved.set_u64("seed", seed);

  std::string y_path = cfg.get_string("y.path", join(out, "y.nft"));
  std::string x_true_path = cfg.get_string("x_true.path", join(out, "x_true.nft"));
  resolved.set("y.path", y_path);
  Tensor y = read_nft(y_path);
  std::optional<Tensor> x_true;
  if (fs::exists(x_true_path)) {
    x_true = read_nft(x_true_path);
    resolved.set("x_true.path", x_true_path);
  }

  std::vector<std::size_t> image_shape;
  if (problem == "ct") {
    std::uint64_t side =
        cfg.get_u64("ct.side", x_true ? x_true->shape().at(0) : 32);
    resolved.set_u64("ct.side", side);
    image_shape = {side, side};
  } else {
    image_shape = y.shape();
  }
  OperatorPtr op = build_operator(cfg, problem, image_shape, seed, resolved);

  std::string noise = cfg.get_string("noise.model", "gaussian");
  resolved.set("noise.model", noise);
  std::optional<Likelihood> lik;
  if (noise == "gaussian") {
    double sigma = cfg.get_double("noise.sigma", problem == "ct" ? 1.0 : 0.02);
    resolved.set_double("noise.sigma", sigma);
    lik = Likelihood::gaussian(op, y, sigma);
  } else if (noise == "poisson") {
    double n0 = cfg.get_double("poisson.n0", 4096.0);
    double mu = cfg.get_double("poisson.mu", 0.05);
    resolved.set_double("poisson.n0", n0);
    resolved.set_double("poisson.mu", mu);
    lik = Likelihood::poisson(op, y, n0, mu);
  } else {
    throw ParseError("unknown noise model: " + noise);
  }

  std::string prior_kind = cfg.get_string("prior.kind", "flow");
  resolved.set("prior.kind", prior_kind);
  PriorPtr prior;
  if (prior_kind == "flow" || prior_kind == "patch") {
    std::string ckpt = cfg.get_string("checkpoint.path", join(out, "flow.nfck"));
    resolved.set("checkpoint.path", ckpt);
    auto model = std::make_shared<FlowModel>(load_checkpoint(ckpt).model);
    if (prior_kind == "flow") {
      prior = std::make_shared<FlowPrior>(model);
    } else {
      auto patch = static_cast<std::size_t>(
          std::llround(std::sqrt(static_cast<double>(model->dim))));
      if (patch * patch != model->dim)
        throw ShapeError("patch prior needs a square patch dimension, checkpoint has " +
                         std::to_string(model->dim));
      std::uint64_t stride = cfg.get_u64("patch.stride", 2);
      resolved.set_u64("patch.stride", stride);
      prior = std::make_shared<PatchPrior>(model, image_shape.at(0), image_shape.at(1),
                                           patch, stride);
    }
  } else if (prior_kind == "l1") {
    double weight = cfg.get_double("l1.weight", 1.0);
    resolved.set_double("l1.weight", weight);
    prior = std::make_shared<L1Prior>(weight);
  } else if (prior_kind != "none") {
    throw ParseError("unknown prior kind: " + prior_kind +
                     " (expected flow, patch, l1, or none)");
  }

  SamplerConfig base;
  base.kind = kernel_from_name(cfg.get_string("sampler.kernel", "nfula"));
  double default_delta = problem == "ct" ? 1e-6 : 5e-5;
  double default_alpha = problem == "inpaint" ? 2.0 : (problem == "deblur" ? 1.5 : 1.0);
  base.delta = cfg.get_double("sampler.delta", default_delta);
  base.alpha = cfg.get_double("sampler.alpha", default_alpha);
  base.lambda = cfg.get_double("sampler.lambda", 5e-5);
  double box_lo = cfg.get_double("sampler.box_lo", -100.0);
  double box_hi = cfg.get_double("sampler.box_hi", 100.0);
  base.box = BoxSet::cube(box_lo, box_hi);
  base.iterations = cfg.get_u64("sampler.iterations", 15000);
  base.burn_in = cfg.get_u64("sampler.burn_in", 5000);
  base.thinning = cfg.get_u64("sampler.thinning", 1);
  base.prox_lambda = cfg.get_double("sampler.prox_lambda", 0.0);
  base.trace_stride = cfg.get_u64("sampler.trace_stride", 10);
  base.store_budget_bytes =
      static_cast<std::size_t>(cfg.get_u64("store.budget_mb", 512)) << 20;
  base.seed = seed;
  resolved.set("sampler.kernel", kernel_name(base.kind));
  resolved.set_double("sampler.delta", base.delta);
  resolved.set_double("sampler.alpha", base.alpha);
  resolved.set_double("sampler.lambda", base.lambda);
  resolved.set_double("sampler.box_lo", box_lo);
  resolved.set_double("sampler.box_hi", box_hi);
  resolved.set_u64("sampler.iterations", base.iterations);
  resolved.set_u64("sampler.burn_in", base.burn_in);
  resolved.set_u64("sampler.thinning", base.thinning);
  resolved.set_double("sampler.prox_lambda", base.prox_lambda);
  resolved.set_u64("sampler.trace_stride", base.trace_stride);
  resolved.set_u64("store.budget_mb", cfg.get_u64("store.budget_mb", 512));

  std::string x0_mode = cfg.get_string("x0", problem == "ct" ? "fbp" : "y");
  resolved.set("x0", x0_mode);
  Tensor x0;
  if (x0_mode == "y")
    x0 = y.reshaped(image_shape);
  else if (x0_mode == "fbp")
    x0 = fbp_reconstruct(*op, y);
  else if (x0_mode == "zero")
    x0 = Tensor(image_shape);
  else
    x0 = read_nft(x0_mode).reshaped(image_shape);

  std::uint64_t chains = cfg.get_u64("chains", 1);
  resolved.set_u64("chains", chains);
  cfg.reject_unknown();
  if (chains == 0) throw DegenerateInputError("chains must be >= 1");
  ensure_dir(out);

  if (auto warning = step_size_warning(base, lik->lipschitz_constant(), std::nullopt))
    log << "note: " << *warning << "\n";

  // Per-chain streams make results independent of the thread schedule.
  std::vector<ChainOutcome> outcomes(chains);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::uint64_t c = next.fetch_add(1);
      if (c >= chains) return;
      char sub[16];
      std::snprintf(sub, sizeof(sub), "chain%02llu",
                    static_cast<unsigned long long>(c));
      SamplerConfig scfg = base;
      scfg.stream = 10 + c;
      scfg.spill_dir = join(out, sub);
      ensure_dir(scfg.spill_dir);
      try {
        outcomes[c].result = run_chain(scfg, *lik, prior.get(), nullptr, x0,
                                       x_true ? &*x_true : nullptr);
      } catch (const Error& e) {
        outcomes[c].error = e.what();
      }
    }
  };
  std::size_t n_threads = std::min<std::size_t>(thread_cap(), chains);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  bool any_failed = false;
  RunningMoments pooled;
  for (std::uint64_t c = 0; c < chains; ++c) {
    char sub[16];
    std::snprintf(sub, sizeof(sub), "chain%02llu", static_cast<unsigned long long>(c));
    std::string dir = join(out, sub);
    if (!outcomes[c].result) {
      any_failed = true;
      log << sub << " aborted: " << outcomes[c].error << "\n";
      continue;
    }
    ChainResult& res = *outcomes[c].result;
    auto [mean, sd] = posterior_summaries(res.store);
    write_nft(join(dir, "mean.nft"), mean.reshaped(image_shape));
    write_nft(join(dir, "std.nft"), sd.reshaped(image_shape));
    write_trace_csv(join(dir, "trace.csv"), res.trace);
    res.store.for_each([&](const Tensor& s) { pooled.update(s); });
    if (res.state.escaped)
      log << sub << " left the [-0.2, 1.2] monitor range at least once\n";
    log << sub << ": " << res.store.size() << " samples, projection active on "
        << res.state.projection_activations << " steps\n";
  }

  if (pooled.n > 0) {
    Tensor mean = pooled.mean.reshaped(image_shape);
    Tensor sd = pooled.variance();
    for (std::size_t i = 0; i < sd.size(); ++i) sd[i] = std::sqrt(sd[i]);
    write_nft(join(out, "mean.nft"), mean);
    write_nft(join(out, "std.nft"), sd.reshaped(image_shape));
    if (x_true) {
      log << "posterior mean psnr = " << fmt(tensor_psnr(mean, *x_true)) << "\n";
      if (x_true->same_shape(y))
        log << "observation psnr = " << fmt(tensor_psnr(y, *x_true)) << "\n";
    }
  }
  echo_config(resolved, out, "sample");
  return any_failed ? 1 : 0;
}

// certify ----------------------------------------------------------------------

int cmd_certify(const Config& cfg, std::ostream& log) {
  std::string ckpt = cfg.require_string("checkpoint.path");
  std::uint64_t probes = cfg.get_u64("certify.probes", 3);
  double radius = cfg.get_double("certify.radius", 10.0);
  double fd_step = cfg.get_double("certify.fd_step", 1e-4);
  std::uint64_t cseed = cfg.get_u64("certify.seed", 0);
  double ly = cfg.get_double("ly", 1.0);
  double alpha = cfg.get_double("alpha", 1.0);
  double lambda = cfg.get_double("lambda", 5e-5);
  cfg.reject_unknown();

  FlowCheckpoint loaded = load_checkpoint(ckpt);
  CertificationReport report = certify_lipschitz(loaded.model);
  for (const std::string& reason : report.reasons) log << reason << "\n";
  log << "certified = " << (report.certified ? "true" : "false") << "\n";

  Rng rng(cseed, 5);
  std::vector<Tensor> points;
  for (std::uint64_t p = 0; p < probes; ++p) {
    Tensor z = gaussian_vector(rng, loaded.model.dim);
    z *= radius / norm2(z);
    points.push_back(std::move(z));
  }
  double bound = empirical_hessian_bound(loaded.model, points, fd_step, rng);
  log << "empirical hessian bound L = " << fmt(bound) << " (probe radius "
      << fmt(radius) << ")\n";
  log << "step bound (L_y = " << fmt(ly) << ", alpha = " << fmt(alpha)
      << ", lambda = " << fmt(lambda)
      << "): delta < " << fmt(step_bound(ly, alpha, bound, lambda)) << "\n";
  return 0;
}

// diagnose ---------------------------------------------------------------------

namespace {

SampleStore load_chain_store(const std::string& dir) {
  std::vector<std::string> chunks;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("chunk_", 0) == 0 && ends_with(name, ".nft"))
      chunks.push_back(entry.path().string());
  }
  if (chunks.empty()) throw IoError("no chunk_*.nft sample files in " + dir);
  std::sort(chunks.begin(), chunks.end());
  std::optional<SampleStore> store;
  for (const std::string& path : chunks) {
    Tensor block = read_nft(path);
    if (block.ndim() < 2)
      throw ParseError("chunk file is not a sample block: " + path);
    std::vector<std::size_t> shape(block.shape().begin() + 1, block.shape().end());
    if (!store)
      store.emplace(shape, std::size_t(-1), std::string());
    std::size_t sample_size = block.size() / block.shape()[0];
    Tensor sample(shape);
    for (std::size_t i = 0; i < block.shape()[0]; ++i) {
      for (std::size_t j = 0; j < sample_size; ++j) sample[j] = block[i * sample_size + j];
      store->push(sample);
    }
  }
  return std::move(*store);
}

}  // namespace

int cmd_diagnose(const Config& cfg, std::ostream& log) {
  std::string chain_dir = cfg.require_string("chain.dir");
  std::string chain_dir2 = cfg.get_string("chain.dir2", "");
  std::string ref_path = cfg.get_string("ref.path", "");
  std::string out = cfg.get_string("out", chain_dir);
  std::uint64_t n_dims = cfg.get_u64("acf.dims", 100);
  std::uint64_t max_lag = cfg.get_u64("acf.max_lag", 100);
  std::uint64_t aseed = cfg.get_u64("acf.seed", 0);
  cfg.reject_unknown();

  SampleStore store = load_chain_store(chain_dir);
  if (store.size() < 3) throw DegenerateInputError("chain too short to diagnose");
  max_lag = std::min<std::uint64_t>(max_lag, store.size() - 2);

  DiagnosticsReport report;
  if (!ref_path.empty()) {
    Tensor ref = read_nft(ref_path);
    std::string mean_path = join(chain_dir, "mean.nft");
    if (fs::exists(mean_path)) {
      double v = psnr(read_nft(mean_path), ref);
      report.psnr_values.emplace_back("posterior_mean", v);
      log << "posterior mean psnr = " << fmt(v) << "\n";
    }
  }

  Rng rng(aseed, 6);
  const auto& shape = store.sample_shape();
  bool can_band = shape.size() == 2 && shape[0] % 2 == 0 && shape[1] % 2 == 0;
  if (can_band) {
    ChainAcfResult bands = chain_acf_bands(store, n_dims, max_lag, rng);
    report.acf_curves = std::move(bands.curves);
    for (AcfCurve& env : bands.envelopes) report.acf_curves.push_back(std::move(env));
    if (bands.degenerate_skipped > 0)
      log << "skipped " << bands.degenerate_skipped << " constant coordinates\n";
  } else {
    std::size_t d = 1;
    for (std::size_t e : shape) d *= e;
    std::size_t n = std::min<std::size_t>(n_dims, d);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t coord = d <= n_dims ? i : rng.uniform_index(d);
      try {
        AcfCurve curve = acf(store.component_series(coord), max_lag);
        curve.band = "coord";
        curve.dim = coord;
        report.acf_curves.push_back(std::move(curve));
      } catch (const DegenerateInputError&) {
        log << "skipped constant coordinate " << coord << "\n";
      }
    }
  }

  if (!chain_dir2.empty()) {
    SampleStore other = load_chain_store(chain_dir2);
    std::size_t d = 1;
    for (std::size_t e : shape) d *= e;
    std::size_t n = std::min<std::size_t>(8, d);
    for (std::size_t i = 0; i < n; ++i) {
      double w = wasserstein1_1d(store.component_series(i), other.component_series(i));
      report.w1_values.emplace_back("coord" + std::to_string(i), w);
      log << "w1 coord " << i << " = " << fmt(w) << "\n";
    }
  }

  ensure_dir(out);
  std::string report_path = join(out, "report.csv");
  write_report_csv(report_path, report);
  log << "report written to " << report_path << "\n";
  return 0;
}

// verify ------------------------------------------------------------------------

int cmd_verify(const Config& cfg, std::ostream& log) {
  std::string suite = cfg.get_string("suite", "all");
  std::uint64_t seed = cfg.get_u64("seed", 0);
  std::string out = cfg.get_string("out", "");
  cfg.reject_unknown();

  std::vector<VerificationCheck> checks = run_verify_suite(suite, seed);
  bool all_passed = true;
  for (const VerificationCheck& c : checks) {
    all_passed = all_passed && c.passed;
    log << (c.passed ? "[PASS] " : "[FAIL] ") << c.name
        << ": measured = " << fmt(c.measured) << ", expected = " << fmt(c.expected)
        << "\n";
  }
  if (!out.empty()) {
    ensure_dir(out);
    DiagnosticsReport report;
    report.checks = checks;
    write_report_csv(join(out, "verify.csv"), report);
  }
  log << (all_passed ? "all checks passed" : "some checks FAILED") << "\n";
  return all_passed ? 0 : 1;
}

}  // namespace nfula
