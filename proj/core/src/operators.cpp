// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/operators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>

#include "nfula/error.hpp"
#include "nfula/linalg.hpp"

namespace nfula {

namespace {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

void check_image_shape(const std::vector<std::size_t>& shape) {
  if (shape.size() != 2 || shape[0] == 0 || shape[1] == 0)
    throw ShapeError("operator: image shape must be 2-D with positive extents");
}

// Iterative radix-2 FFT, in place; n must be a power of two.
void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
  std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

}  // namespace

std::size_t ForwardOperator::input_size() const { return shape_size(input_shape()); }
std::size_t ForwardOperator::output_size() const { return shape_size(output_shape()); }

double ForwardOperator::operator_norm() const {
  std::lock_guard<std::mutex> lock(norm_mutex_);
  if (norm_ >= 0.0) return norm_;
  LinearMap fwd = [this](const Tensor& x) { return apply(x); };
  LinearMap adj = [this](const Tensor& y) { return apply_adjoint(y); };
  norm_ = power_iteration_spectral_norm(fwd, adj, input_size(), 2000, 1e-10);
  return norm_;
}

// Blur ----------------------------------------------------------------------

BlurOperator::BlurOperator(std::vector<std::size_t> image_shape, Tensor kernel)
    : shape_(std::move(image_shape)), kernel_(std::move(kernel)) {
  check_image_shape(shape_);
  if (kernel_.ndim() != 2 || kernel_.rows() % 2 == 0 || kernel_.cols() % 2 == 0)
    throw ShapeError("blur: kernel must be 2-D and odd-sized in both dims");
  kernel_.require_finite("blur kernel");
}

Tensor BlurOperator::convolve(const Tensor& x, bool adjoint) const {
  std::size_t h = shape_[0], w = shape_[1];
  std::size_t kh = kernel_.rows(), kw = kernel_.cols();
  long ch = static_cast<long>(kh / 2), cw = static_cast<long>(kw / 2);
  Tensor y({h, w});
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double s = 0.0;
      for (std::size_t u = 0; u < kh; ++u) {
        for (std::size_t v = 0; v < kw; ++v) {
          long a = static_cast<long>(u) - ch, b = static_cast<long>(v) - cw;
          // adjoint flips the kernel offset sign (correlation)
          long rr = static_cast<long>(r) + (adjoint ? a : -a);
          long cc = static_cast<long>(c) + (adjoint ? b : -b);
          rr = ((rr % static_cast<long>(h)) + static_cast<long>(h)) % static_cast<long>(h);
          cc = ((cc % static_cast<long>(w)) + static_cast<long>(w)) % static_cast<long>(w);
          s += kernel_.at(u, v) *
               x[static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)];
        }
      }
      y.at(r, c) = s;
    }
  }
  return y;
}

Tensor BlurOperator::apply(const Tensor& x) const {
  if (x.size() != input_size()) throw ShapeError("blur apply: size mismatch");
  return convolve(x, false);
}

Tensor BlurOperator::apply_adjoint(const Tensor& y) const {
  if (y.size() != output_size()) throw ShapeError("blur adjoint: size mismatch");
  return convolve(y, true);
}

std::string BlurOperator::describe() const {
  std::ostringstream s;
  s << "blur " << shape_[0] << "x" << shape_[1] << " kernel " << kernel_.rows() << "x"
    << kernel_.cols() << " circular";
  return s.str();
}

std::shared_ptr<const BlurOperator> make_blur(std::vector<std::size_t> image_shape,
                                              Tensor kernel) {
  return std::make_shared<BlurOperator>(std::move(image_shape), std::move(kernel));
}

Tensor horizontal_blur_kernel(std::size_t size) {
  if (size % 2 == 0) throw ShapeError("blur kernel size must be odd");
  Tensor k({size, size});
  std::size_t mid = size / 2;
  for (std::size_t c = 0; c < size; ++c)
    k.at(mid, c) = 1.0 / static_cast<double>(size);
  return k;
}

// Mask ----------------------------------------------------------------------

MaskOperator::MaskOperator(std::vector<std::size_t> image_shape, double keep_fraction,
                           Rng& rng)
    : shape_(std::move(image_shape)) {
  check_image_shape(shape_);
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
    throw DegenerateInputError("mask: keep fraction must be in (0, 1]");
  std::size_t d = shape_size(shape_);
  kept_ = static_cast<std::size_t>(
      std::llround(keep_fraction * static_cast<double>(d)));
  kept_ = std::min(kept_, d);
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  // partial Fisher-Yates: first kept_ entries are a uniform subset
  for (std::size_t i = 0; i < kept_ && i + 1 < d; ++i) {
    std::size_t j = i + rng.uniform_index(d - i);
    std::swap(idx[i], idx[j]);
  }
  mask_ = Tensor(shape_);
  for (std::size_t i = 0; i < kept_; ++i) mask_[idx[i]] = 1.0;
}

Tensor MaskOperator::apply(const Tensor& x) const {
  if (x.size() != input_size()) throw ShapeError("mask apply: size mismatch");
  Tensor y = x.reshaped(shape_);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask_[i];
  return y;
}

Tensor MaskOperator::apply_adjoint(const Tensor& y) const { return apply(y); }

std::string MaskOperator::describe() const {
  std::ostringstream s;
  s << "mask " << shape_[0] << "x" << shape_[1] << " keeping " << kept_ << " of "
    << input_size() << " pixels";
  return s.str();
}

std::shared_ptr<const MaskOperator> make_mask(std::vector<std::size_t> image_shape,
                                              double keep_fraction, Rng& rng) {
  return std::make_shared<MaskOperator>(std::move(image_shape), keep_fraction, rng);
}

// Radon ---------------------------------------------------------------------

namespace {

SparseMatrix assemble_radon(std::size_t side, std::size_t n_angles, double lo,
                            double hi, std::size_t n_det, double spacing) {
  if (side < 8) throw DegenerateInputError("radon: image side must be >= 8");
  if (side > 96)
    throw CapabilityError("radon: explicit system matrix is limited to side <= 96");
  if (n_angles < 2) throw DegenerateInputError("radon: need at least 2 angles");
  if (n_det < 2) throw DegenerateInputError("radon: need at least 2 detectors");
  if (!(lo < hi)) throw DegenerateInputError("radon: need angle_lo < angle_hi");
  double n = static_cast<double>(side);
  double half = (n - 1.0) / 2.0;
  double ray_len = n * 1.4142135623730951 + 2.0;
  constexpr double step = 0.5;  // sample spacing along the ray, in pixels
  auto n_samples = static_cast<std::size_t>(std::ceil(ray_len / step));
  double dtheta = (hi - lo) / static_cast<double>(n_angles);

  std::vector<Triplet> trip;
  trip.reserve(n_angles * n_det * side * 3);
  for (std::size_t t = 0; t < n_angles; ++t) {
    double theta = lo + (static_cast<double>(t) + 0.5) * dtheta;
    double ux = std::cos(theta), uy = std::sin(theta);    // detector axis
    double vx = -std::sin(theta), vy = std::cos(theta);   // ray direction
    for (std::size_t j = 0; j < n_det; ++j) {
      double s = (static_cast<double>(j) - (static_cast<double>(n_det) - 1.0) / 2.0) *
                 spacing;
      std::size_t row = t * n_det + j;
      double ox = s * ux - 0.5 * ray_len * vx;
      double oy = s * uy - 0.5 * ray_len * vy;
      for (std::size_t k = 0; k < n_samples; ++k) {
        double tau = (static_cast<double>(k) + 0.5) * step;
        double px = ox + tau * vx, py = oy + tau * vy;
        double fc = px + half, fr = py + half;  // continuous pixel coords
        double flc = std::floor(fc), flr = std::floor(fr);
        long c0 = static_cast<long>(flc), r0 = static_cast<long>(flr);
        double wc = fc - flc, wr = fr - flr;
        for (int dr = 0; dr < 2; ++dr) {
          for (int dc = 0; dc < 2; ++dc) {
            long r = r0 + dr, c = c0 + dc;
            if (r < 0 || c < 0 || r >= static_cast<long>(side) ||
                c >= static_cast<long>(side))
              continue;
            double w = (dr ? wr : 1.0 - wr) * (dc ? wc : 1.0 - wc) * step;
            if (w > 0.0)
              trip.push_back({row,
                              static_cast<std::size_t>(r) * side +
                                  static_cast<std::size_t>(c),
                              w});
          }
        }
      }
    }
  }
  return SparseMatrix(n_angles * n_det, side * side, std::move(trip));
}

}  // namespace

RadonOperator::RadonOperator(std::size_t image_side, std::size_t n_angles,
                             double angle_lo, double angle_hi, std::size_t n_detectors)
    : side_(image_side),
      n_angles_(n_angles),
      n_det_(n_detectors),
      lo_(angle_lo),
      hi_(angle_hi),
      spacing_(static_cast<double>(image_side) * 1.4142135623730951 /
               static_cast<double>(n_detectors)),
      in_shape_{image_side, image_side},
      out_shape_{n_angles, n_detectors},
      system_(assemble_radon(image_side, n_angles, angle_lo, angle_hi, n_detectors,
                             spacing_)) {}

Tensor RadonOperator::apply(const Tensor& x) const {
  if (x.size() != input_size()) throw ShapeError("radon apply: size mismatch");
  return system_.apply(x).reshaped(out_shape_);
}

Tensor RadonOperator::apply_adjoint(const Tensor& y) const {
  if (y.size() != output_size()) throw ShapeError("radon adjoint: size mismatch");
  return system_.apply_transpose(y).reshaped(in_shape_);
}

std::string RadonOperator::describe() const {
  std::ostringstream s;
  s << "radon side " << side_ << " angles " << n_angles_ << " in [" << lo_ << ", " << hi_
    << "] detectors " << n_det_;
  return s.str();
}

std::shared_ptr<const RadonOperator> make_radon(std::size_t image_side,
                                                std::size_t n_angles, double angle_lo,
                                                double angle_hi,
                                                std::size_t n_detectors) {
  return std::make_shared<RadonOperator>(image_side, n_angles, angle_lo, angle_hi,
                                         n_detectors);
}

// Identity --------------------------------------------------------------------

IdentityOperator::IdentityOperator(std::vector<std::size_t> shape)
    : shape_(std::move(shape)) {
  if (shape_.empty()) throw ShapeError("identity operator: empty shape");
}

Tensor IdentityOperator::apply(const Tensor& x) const {
  if (x.size() != input_size()) throw ShapeError("identity apply: size mismatch");
  return x.reshaped(shape_);
}

Tensor IdentityOperator::apply_adjoint(const Tensor& y) const { return apply(y); }

std::string IdentityOperator::describe() const { return "identity"; }

std::shared_ptr<const IdentityOperator> make_identity(std::vector<std::size_t> shape) {
  return std::make_shared<IdentityOperator>(std::move(shape));
}

// Filtered backprojection -----------------------------------------------------

Tensor fbp_reconstruct(const ForwardOperator& op, const Tensor& sinogram) {
  const auto* radon = dynamic_cast<const RadonOperator*>(&op);
  if (!radon)
    throw CapabilityError("filtered backprojection requires a radon operator");
  if (sinogram.size() != radon->output_size())
    throw ShapeError("fbp: sinogram size mismatch");

  std::size_t n_angles = radon->n_angles(), n_det = radon->n_detectors();
  double h_t = radon->detector_spacing();
  std::size_t m = 1;
  while (m < 2 * n_det) m <<= 1;  // zero padding dampens circular wrap

  Tensor filtered({n_angles, n_det});
  std::vector<std::complex<double>> buf(m);
  for (std::size_t t = 0; t < n_angles; ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0));
    for (std::size_t j = 0; j < n_det; ++j) buf[j] = sinogram[t * n_det + j];
    fft_pow2(buf, false);
    for (std::size_t k = 0; k < m; ++k) {
      std::size_t kk = std::min(k, m - k);  // symmetric frequency index
      double nu = static_cast<double>(kk) / (static_cast<double>(m) * h_t);
      buf[k] *= nu;  // Ram-Lak ramp |nu|
    }
    fft_pow2(buf, true);
    for (std::size_t j = 0; j < n_det; ++j) filtered[t * n_det + j] = buf[j].real();
  }

  double dtheta = (radon->angle_hi() - radon->angle_lo()) /
                  static_cast<double>(n_angles);
  Tensor image = radon->apply_adjoint(filtered);
  image *= dtheta * h_t;
  for (std::size_t i = 0; i < image.size(); ++i)
    image[i] = std::min(1.0, std::max(0.0, image[i]));
  return image;
}

}  // namespace nfula
