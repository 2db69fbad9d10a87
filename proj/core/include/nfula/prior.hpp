// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nfula/flow.hpp"
#include "nfula/tensor.hpp"

namespace nfula {

// Prior/score provider. Capabilities vary by kind; calling an unsupported
// operation throws CapabilityError. Immutable during sampling.
class Prior {
public:
  virtual ~Prior() = default;

  virtual bool has_grad() const { return false; }
  virtual bool has_prox() const { return false; }
  virtual bool has_density() const { return false; }

  virtual Tensor grad_log(const Tensor& x) const;
  virtual Tensor prox(const Tensor& x, double lam) const;
  virtual double log_density(const Tensor& x) const;
  virtual std::string describe() const = 0;
};

using PriorPtr = std::shared_ptr<const Prior>;

class FlowPrior final : public Prior {
public:
  explicit FlowPrior(std::shared_ptr<const FlowModel> model);

  bool has_grad() const override { return true; }
  bool has_density() const override { return true; }
  Tensor grad_log(const Tensor& x) const override;
  double log_density(const Tensor& x) const override;
  std::string describe() const override;

  const FlowModel& model() const { return *model_; }

private:
  std::shared_ptr<const FlowModel> model_;
};

// Regularly strided patch origins over an image; patches are full (no
// partial border patches), so (side - patch) need not divide stride.
struct PatchGrid {
  std::size_t rows = 0, cols = 0, patch = 0, stride = 0;
  std::vector<std::pair<std::size_t, std::size_t>> origins;

  static PatchGrid make(std::size_t rows, std::size_t cols, std::size_t patch,
                        std::size_t stride);
};

Tensor extract_patch(const Tensor& image, std::size_t cols, std::size_t r0,
                     std::size_t c0, std::size_t patch);
void scatter_add_patch(Tensor& image, std::size_t cols, std::size_t r0, std::size_t c0,
                       std::size_t patch, const Tensor& values);

// Ambient score is the overlap-added sum of per-patch flow scores; the
// regularizer reading is the sum of patch log densities, with the sampler
// weight absorbing any scale.
class PatchPrior final : public Prior {
public:
  PatchPrior(std::shared_ptr<const FlowModel> patch_model, std::size_t image_rows,
             std::size_t image_cols, std::size_t patch, std::size_t stride);

  bool has_grad() const override { return true; }
  Tensor grad_log(const Tensor& x) const override;
  std::string describe() const override;

  const PatchGrid& grid() const { return grid_; }
  const FlowModel& model() const { return *model_; }
  // Sum of per-patch log densities (the potential grad_log differentiates).
  double patch_sum_log_density(const Tensor& x) const;

private:
  std::shared_ptr<const FlowModel> model_;
  PatchGrid grid_;
};

class GaussianAnalyticPrior final : public Prior {
public:
  GaussianAnalyticPrior(Tensor mean, Tensor covariance);
  static GaussianAnalyticPrior from_diagonal(Tensor mean, const Tensor& variances);

  bool has_grad() const override { return true; }
  bool has_density() const override { return true; }
  Tensor grad_log(const Tensor& x) const override;  // -Sigma^{-1}(x - m)
  double log_density(const Tensor& x) const override;
  std::string describe() const override;

  const Tensor& mean() const { return mean_; }
  const Tensor& covariance() const { return cov_; }

private:
  Tensor mean_, cov_, chol_;
  double logdet_ = 0.0;
};

class L1Prior final : public Prior {
public:
  explicit L1Prior(double weight);

  bool has_prox() const override { return true; }
  Tensor prox(const Tensor& x, double lam) const override;  // soft threshold
  std::string describe() const override;

  double weight() const { return weight_; }

private:
  double weight_;
};

// Wraps a black-box score callable; lets a sampler run against arbitrary
// (including adversarial) drift fields.
class ScoreFunctionPrior final : public Prior {
public:
  ScoreFunctionPrior(std::function<Tensor(const Tensor&)> score, std::string name);

  bool has_grad() const override { return true; }
  Tensor grad_log(const Tensor& x) const override { return score_(x); }
  std::string describe() const override { return name_; }

private:
  std::function<Tensor(const Tensor&)> score_;
  std::string name_;
};

// Shared multivariate-normal score kernel: -(Sigma)^{-1}(x - m) given the
// Cholesky factor of Sigma. Both the analytic Gaussian prior and the
// Gaussian MMSE denoiser route through this, which makes their drifts
// bitwise identical when the covariances match.
Tensor mvn_score(const Tensor& chol_l, const Tensor& mean, const Tensor& x);

// Denoiser with noise variance eps; score(x) = (denoise(x) - x)/eps is the
// smoothed-prior score by Tweedie's identity.
class Denoiser {
public:
  virtual ~Denoiser() = default;
  virtual double eps() const = 0;
  virtual Tensor denoise(const Tensor& x) const = 0;
  virtual Tensor score(const Tensor& x) const;
  virtual std::string describe() const = 0;
};

using DenoiserPtr = std::shared_ptr<const Denoiser>;

// Exact posterior mean under a Gaussian prior N(m, Sigma):
// denoise(x) = m + Sigma (Sigma + eps I)^{-1} (x - m); score is computed
// analytically as -(Sigma + eps I)^{-1}(x - m), not via the quotient.
class GaussianMmseDenoiser final : public Denoiser {
public:
  GaussianMmseDenoiser(Tensor mean, Tensor covariance, double eps);

  double eps() const override { return eps_; }
  Tensor denoise(const Tensor& x) const override;
  Tensor score(const Tensor& x) const override;
  std::string describe() const override;

private:
  Tensor mean_, cov_, chol_smoothed_;
  double eps_;
};

class ExternalDenoiser final : public Denoiser {
public:
  ExternalDenoiser(std::function<Tensor(const Tensor&)> fn, double eps, std::string name);

  double eps() const override { return eps_; }
  Tensor denoise(const Tensor& x) const override { return fn_(x); }
  std::string describe() const override { return name_; }

private:
  std::function<Tensor(const Tensor&)> fn_;
  double eps_;
  std::string name_;
};

}  // namespace nfula
