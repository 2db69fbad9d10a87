// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "nfula/rng.hpp"
#include "nfula/sparse.hpp"
#include "nfula/tensor.hpp"

namespace nfula {

// Linear measurement operator with an exact adjoint:
// dot(apply(x), y) == dot(x, apply_adjoint(y)) to rounding error.
// Immutable after construction; concurrent application is safe.
class ForwardOperator {
public:
  virtual ~ForwardOperator() = default;

  virtual const std::vector<std::size_t>& input_shape() const = 0;
  virtual const std::vector<std::size_t>& output_shape() const = 0;
  std::size_t input_size() const;
  std::size_t output_size() const;

  virtual Tensor apply(const Tensor& x) const = 0;
  virtual Tensor apply_adjoint(const Tensor& y) const = 0;
  virtual std::string describe() const = 0;

  // Power-iteration estimate of the spectral norm, computed once from a
  // fixed internal stream and cached.
  double operator_norm() const;

protected:
  ForwardOperator() = default;

private:
  mutable std::mutex norm_mutex_;
  mutable double norm_ = -1.0;
};

using OperatorPtr = std::shared_ptr<const ForwardOperator>;

// Circular (periodic) 2-D convolution with an odd-sized kernel; the
// adjoint is circular correlation with the same kernel.
class BlurOperator final : public ForwardOperator {
public:
  BlurOperator(std::vector<std::size_t> image_shape, Tensor kernel);

  const std::vector<std::size_t>& input_shape() const override { return shape_; }
  const std::vector<std::size_t>& output_shape() const override { return shape_; }
  Tensor apply(const Tensor& x) const override;
  Tensor apply_adjoint(const Tensor& y) const override;
  std::string describe() const override;

  const Tensor& kernel() const { return kernel_; }

private:
  Tensor convolve(const Tensor& x, bool adjoint) const;
  std::vector<std::size_t> shape_;
  Tensor kernel_;
};

// Diagonal 0/1 projector keeping round(keep_fraction * d) pixels, chosen
// without replacement. Self-adjoint and idempotent.
class MaskOperator final : public ForwardOperator {
public:
  MaskOperator(std::vector<std::size_t> image_shape, double keep_fraction, Rng& rng);

  const std::vector<std::size_t>& input_shape() const override { return shape_; }
  const std::vector<std::size_t>& output_shape() const override { return shape_; }
  Tensor apply(const Tensor& x) const override;
  Tensor apply_adjoint(const Tensor& y) const override;
  std::string describe() const override;

  const Tensor& mask() const { return mask_; }
  std::size_t kept() const { return kept_; }

private:
  std::vector<std::size_t> shape_;
  Tensor mask_;
  std::size_t kept_ = 0;
};

// Parallel-beam line-integral system over a limited angular range,
// assembled once as a sparse matrix (ray-driven, bilinear interpolation
// weights sampled along each ray), so the adjoint is the exact transpose.
class RadonOperator final : public ForwardOperator {
public:
  RadonOperator(std::size_t image_side, std::size_t n_angles, double angle_lo,
                double angle_hi, std::size_t n_detectors);

  const std::vector<std::size_t>& input_shape() const override { return in_shape_; }
  const std::vector<std::size_t>& output_shape() const override { return out_shape_; }
  Tensor apply(const Tensor& x) const override;
  Tensor apply_adjoint(const Tensor& y) const override;
  std::string describe() const override;

  std::size_t image_side() const { return side_; }
  std::size_t n_angles() const { return n_angles_; }
  std::size_t n_detectors() const { return n_det_; }
  double angle_lo() const { return lo_; }
  double angle_hi() const { return hi_; }
  double detector_spacing() const { return spacing_; }
  const SparseMatrix& system() const { return system_; }

private:
  std::size_t side_, n_angles_, n_det_;
  double lo_, hi_, spacing_;
  std::vector<std::size_t> in_shape_, out_shape_;
  SparseMatrix system_;
};

class IdentityOperator final : public ForwardOperator {
public:
  explicit IdentityOperator(std::vector<std::size_t> shape);

  const std::vector<std::size_t>& input_shape() const override { return shape_; }
  const std::vector<std::size_t>& output_shape() const override { return shape_; }
  Tensor apply(const Tensor& x) const override;
  Tensor apply_adjoint(const Tensor& y) const override;
  std::string describe() const override;

private:
  std::vector<std::size_t> shape_;
};

std::shared_ptr<const BlurOperator> make_blur(std::vector<std::size_t> image_shape,
                                              Tensor kernel);
std::shared_ptr<const MaskOperator> make_mask(std::vector<std::size_t> image_shape,
                                              double keep_fraction, Rng& rng);
std::shared_ptr<const RadonOperator> make_radon(std::size_t image_side,
                                                std::size_t n_angles, double angle_lo,
                                                double angle_hi,
                                                std::size_t n_detectors);
std::shared_ptr<const IdentityOperator> make_identity(std::vector<std::size_t> shape);

// size x size kernel whose middle row is constant 1/size: horizontal
// motion blur.
Tensor horizontal_blur_kernel(std::size_t size = 9);

// Ram-Lak filtered backprojection of a sinogram from the given Radon
// geometry, clamped to [0,1]. Initialization-grade reconstruction only.
Tensor fbp_reconstruct(const ForwardOperator& op, const Tensor& sinogram);

}  // namespace nfula
