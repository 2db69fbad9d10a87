// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/sparse.hpp"

#include <algorithm>
#include <cmath>

#include "nfula/error.hpp"

namespace nfula {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols,
                           std::vector<Triplet> triplets)
    : rows_(rows), cols_(cols) {
  if (rows == 0 || cols == 0)
    throw ShapeError("sparse matrix dimensions must be positive");
  for (const Triplet& t : triplets) {
    if (t.row >= rows || t.col >= cols)
      throw ShapeError("sparse triplet coordinate out of range");
    if (!std::isfinite(t.value))
      throw NonFiniteError("sparse triplet value is non-finite");
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  row_ptr_.assign(rows + 1, 0);
  col_idx_.reserve(triplets.size());
  values_.reserve(triplets.size());
  std::size_t i = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    row_ptr_[r] = values_.size();
    while (i < triplets.size() && triplets[i].row == r) {
      std::size_t c = triplets[i].col;
      double v = 0.0;
      while (i < triplets.size() && triplets[i].row == r && triplets[i].col == c)
        v += triplets[i++].value;
      if (v != 0.0) {
        col_idx_.push_back(c);
        values_.push_back(v);
      }
    }
  }
  row_ptr_[rows] = values_.size();
}

Tensor SparseMatrix::apply(const Tensor& x) const {
  if (x.size() != cols_) throw ShapeError("sparse apply: input size mismatch");
  Tensor y({rows_});
  const double* xp = x.data();
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      s += values_[k] * xp[col_idx_[k]];
    y[r] = s;
  }
  return y;
}

Tensor SparseMatrix::apply_transpose(const Tensor& y) const {
  if (y.size() != rows_) throw ShapeError("sparse apply_transpose: input size mismatch");
  Tensor x({cols_});
  double* xp = x.data();
  for (std::size_t r = 0; r < rows_; ++r) {
    double yr = y[r];
    if (yr == 0.0) continue;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      xp[col_idx_[k]] += values_[k] * yr;
  }
  return x;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      t.push_back({col_idx_[k], r, values_[k]});
  return SparseMatrix(cols_, rows_, std::move(t));
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      t.push_back({r, col_idx_[k], values_[k]});
  return t;
}

Tensor SparseMatrix::to_dense() const {
  Tensor d({rows_, cols_});
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      d.at(r, col_idx_[k]) = values_[k];
  return d;
}

}  // namespace nfula
