// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "nfula/error.hpp"

namespace nfula {

// Dense row-major tensor of doubles. Value semantics: copies are deep and
// operations never alias their inputs unless written in-place on purpose.
class Tensor {
public:
  Tensor() = default;

  // Zero-filled tensor of the given shape. Every extent must be positive.
  explicit Tensor(std::vector<std::size_t> shape);

  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor vector(std::vector<double> values);
  static Tensor scalar(double value) { return vector({value}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // 2-D access, row major. Only valid when ndim() == 2.
  double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

  std::size_t rows() const;
  std::size_t cols() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Same data, new shape; total size must match.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  bool all_finite() const;
  // Throws NonFiniteError naming `what` if any entry is NaN or infinite.
  void require_finite(const char* what) const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double a);

private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(double a, Tensor t);

// y += a * x
void axpy(double a, const Tensor& x, Tensor& y);

double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);
double norm_inf(const Tensor& a);

Tensor hadamard(const Tensor& a, const Tensor& b);

void require_same_shape(const Tensor& a, const Tensor& b, const char* where);

}  // namespace nfula
