// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/prior.hpp"

#include <cmath>
#include <sstream>

#include "nfula/error.hpp"
#include "nfula/linalg.hpp"

namespace nfula {

Tensor Prior::grad_log(const Tensor&) const {
  throw CapabilityError(describe() + ": no log-density gradient");
}

Tensor Prior::prox(const Tensor&, double) const {
  throw CapabilityError(describe() + ": no proximal map");
}

double Prior::log_density(const Tensor&) const {
  throw CapabilityError(describe() + ": no tractable log density");
}

// FlowPrior -------------------------------------------------------------------

FlowPrior::FlowPrior(std::shared_ptr<const FlowModel> model) : model_(std::move(model)) {
  if (!model_) throw DegenerateInputError("flow prior: model is null");
}

Tensor FlowPrior::grad_log(const Tensor& x) const { return grad_log_density(*model_, x); }

double FlowPrior::log_density(const Tensor& x) const {
  return nfula::log_density(*model_, x);
}

std::string FlowPrior::describe() const {
  std::ostringstream s;
  s << "flow prior (dim " << model_->dim << ", " << model_->layers.size() << " layers)";
  return s.str();
}

// Patches ---------------------------------------------------------------------

PatchGrid PatchGrid::make(std::size_t rows, std::size_t cols, std::size_t patch,
                          std::size_t stride) {
  if (patch == 0 || stride == 0)
    throw DegenerateInputError("patch grid: patch and stride must be positive");
  if (patch > rows || patch > cols)
    throw ShapeError("patch grid: patch larger than image");
  PatchGrid g;
  g.rows = rows;
  g.cols = cols;
  g.patch = patch;
  g.stride = stride;
  for (std::size_t r = 0; r + patch <= rows; r += stride)
    for (std::size_t c = 0; c + patch <= cols; c += stride)
      g.origins.emplace_back(r, c);
  return g;
}

Tensor extract_patch(const Tensor& image, std::size_t cols, std::size_t r0,
                     std::size_t c0, std::size_t patch) {
  Tensor p({patch * patch});
  for (std::size_t r = 0; r < patch; ++r)
    for (std::size_t c = 0; c < patch; ++c)
      p[r * patch + c] = image[(r0 + r) * cols + (c0 + c)];
  return p;
}

void scatter_add_patch(Tensor& image, std::size_t cols, std::size_t r0, std::size_t c0,
                       std::size_t patch, const Tensor& values) {
  for (std::size_t r = 0; r < patch; ++r)
    for (std::size_t c = 0; c < patch; ++c)
      image[(r0 + r) * cols + (c0 + c)] += values[r * patch + c];
}

PatchPrior::PatchPrior(std::shared_ptr<const FlowModel> patch_model,
                       std::size_t image_rows, std::size_t image_cols, std::size_t patch,
                       std::size_t stride)
    : model_(std::move(patch_model)),
      grid_(PatchGrid::make(image_rows, image_cols, patch, stride)) {
  if (!model_) throw DegenerateInputError("patch prior: model is null");
  if (model_->dim != patch * patch)
    throw ShapeError("patch prior: flow dimension must equal patch*patch");
}

Tensor PatchPrior::grad_log(const Tensor& x) const {
  if (x.size() != grid_.rows * grid_.cols)
    throw ShapeError("patch prior: image size mismatch");
  Tensor g({grid_.rows, grid_.cols});
  for (const auto& [r0, c0] : grid_.origins) {
    Tensor p = extract_patch(x, grid_.cols, r0, c0, grid_.patch);
    Tensor pg = grad_log_density(*model_, p);
    scatter_add_patch(g, grid_.cols, r0, c0, grid_.patch, pg);
  }
  return g.reshaped(x.shape());
}

double PatchPrior::patch_sum_log_density(const Tensor& x) const {
  double s = 0.0;
  for (const auto& [r0, c0] : grid_.origins)
    s += nfula::log_density(*model_, extract_patch(x, grid_.cols, r0, c0, grid_.patch));
  return s;
}

std::string PatchPrior::describe() const {
  std::ostringstream s;
  s << "patch prior (" << grid_.patch << "x" << grid_.patch << ", stride " << grid_.stride
    << ", " << grid_.origins.size() << " patches)";
  return s.str();
}

// Gaussian analytic prior -------------------------------------------------------

Tensor mvn_score(const Tensor& chol_l, const Tensor& mean, const Tensor& x) {
  Tensor r = x;
  r -= mean.reshaped(x.shape());
  Tensor s = cholesky_solve(chol_l, r);
  s *= -1.0;
  return s.reshaped(x.shape());
}

GaussianAnalyticPrior::GaussianAnalyticPrior(Tensor mean, Tensor covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
  if (cov_.ndim() != 2 || cov_.rows() != cov_.cols() || cov_.rows() != mean_.size())
    throw ShapeError("gaussian prior: covariance must be square and match the mean");
  chol_ = cholesky(cov_);
  logdet_ = cholesky_logdet(chol_);
}

GaussianAnalyticPrior GaussianAnalyticPrior::from_diagonal(Tensor mean,
                                                           const Tensor& variances) {
  std::size_t d = mean.size();
  if (variances.size() != d) throw ShapeError("gaussian prior: variance size mismatch");
  Tensor cov({d, d});
  for (std::size_t i = 0; i < d; ++i) cov.at(i, i) = variances[i];
  return GaussianAnalyticPrior(std::move(mean), std::move(cov));
}

Tensor GaussianAnalyticPrior::grad_log(const Tensor& x) const {
  if (x.size() != mean_.size()) throw ShapeError("gaussian prior: input size mismatch");
  return mvn_score(chol_, mean_, x);
}

double GaussianAnalyticPrior::log_density(const Tensor& x) const {
  if (x.size() != mean_.size()) throw ShapeError("gaussian prior: input size mismatch");
  Tensor r = x;
  r -= mean_.reshaped(x.shape());
  Tensor s = cholesky_solve(chol_, r);
  double quad = dot(r.reshaped({r.size()}), s);
  constexpr double log2pi = 1.8378770664093454836;
  return -0.5 * quad - 0.5 * logdet_ -
         0.5 * static_cast<double>(mean_.size()) * log2pi;
}

std::string GaussianAnalyticPrior::describe() const {
  return "gaussian prior (dim " + std::to_string(mean_.size()) + ")";
}

// L1 -----------------------------------------------------------------------------

L1Prior::L1Prior(double weight) : weight_(weight) {
  if (!(weight > 0.0)) throw DegenerateInputError("l1 prior: weight must be positive");
}

Tensor L1Prior::prox(const Tensor& x, double lam) const {
  if (!(lam > 0.0)) throw DegenerateInputError("prox: lambda must be positive");
  double t = lam * weight_;
  Tensor z = x;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double v = z[i];
    z[i] = v > t ? v - t : (v < -t ? v + t : 0.0);
  }
  return z;
}

std::string L1Prior::describe() const {
  return "l1 prior (weight " + std::to_string(weight_) + ")";
}

ScoreFunctionPrior::ScoreFunctionPrior(std::function<Tensor(const Tensor&)> score,
                                       std::string name)
    : score_(std::move(score)), name_(std::move(name)) {
  if (!score_) throw DegenerateInputError("score prior: callable is empty");
}

// Denoisers -----------------------------------------------------------------------

Tensor Denoiser::score(const Tensor& x) const {
  Tensor s = denoise(x);
  s -= x;
  s *= 1.0 / eps();
  return s;
}

GaussianMmseDenoiser::GaussianMmseDenoiser(Tensor mean, Tensor covariance, double eps)
    : mean_(std::move(mean)), cov_(std::move(covariance)), eps_(eps) {
  if (!(eps > 0.0)) throw DegenerateInputError("denoiser: eps must be positive");
  if (cov_.ndim() != 2 || cov_.rows() != cov_.cols() || cov_.rows() != mean_.size())
    throw ShapeError("denoiser: covariance must be square and match the mean");
  Tensor smoothed = cov_;
  for (std::size_t i = 0; i < cov_.rows(); ++i) smoothed.at(i, i) += eps_;
  chol_smoothed_ = cholesky(smoothed);
}

Tensor GaussianMmseDenoiser::denoise(const Tensor& x) const {
  if (x.size() != mean_.size()) throw ShapeError("denoiser: input size mismatch");
  Tensor r = x;
  r -= mean_.reshaped(x.shape());
  Tensor s = cholesky_solve(chol_smoothed_, r);
  Tensor out = matvec(cov_, s);
  out += mean_.reshaped(out.shape());
  return out.reshaped(x.shape());
}

Tensor GaussianMmseDenoiser::score(const Tensor& x) const {
  return mvn_score(chol_smoothed_, mean_, x);
}

std::string GaussianMmseDenoiser::describe() const {
  return "gaussian mmse denoiser (eps " + std::to_string(eps_) + ")";
}

ExternalDenoiser::ExternalDenoiser(std::function<Tensor(const Tensor&)> fn, double eps,
                                   std::string name)
    : fn_(std::move(fn)), eps_(eps), name_(std::move(name)) {
  if (!fn_) throw DegenerateInputError("denoiser: callable is empty");
  if (!(eps > 0.0)) throw DegenerateInputError("denoiser: eps must be positive");
}

}  // namespace nfula
