// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/tensor.hpp"

#include <cmath>
#include <string>

namespace nfula {

namespace {

std::size_t checked_size(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive");
    n *= e;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), values_(checked_size(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (checked_size(shape_) != values_.size())
    throw ShapeError("tensor value count does not match shape");
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  for (double& v : t.values_) v = value;
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (ndim() != 2) throw ShapeError("rows() requires a 2-D tensor");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (ndim() != 2) throw ShapeError("cols() requires a 2-D tensor");
  return shape_[1];
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  Tensor t;
  t.shape_ = std::move(shape);
  if (checked_size(t.shape_) != values_.size())
    throw ShapeError("reshape changes total size");
  t.values_ = values_;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::require_finite(const char* what) const {
  if (!all_finite())
    throw NonFiniteError(std::string(what) + " contains a non-finite value");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(where) + ": operand shapes differ");
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "tensor +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_shape(*this, other, "tensor -=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Tensor& Tensor::operator*=(double a) {
  for (double& v : values_) v *= a;
  return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(double a, Tensor t) { return t *= a; }

void axpy(double a, const Tensor& x, Tensor& y) {
  require_same_shape(x, y, "axpy");
  const double* xp = x.data();
  double* yp = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) yp[i] += a * xp[i];
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const Tensor& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor out = a;
  for (std::size_t i = 0; i < a.size(); ++i) out[i] *= b[i];
  return out;
}

}  // namespace nfula
