// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "nfula/tensor.hpp"

namespace nfula {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

// Immutable CSR matrix assembled from triplets. Duplicate (row, col)
// entries are summed during assembly; entries that cancel to zero are
// dropped, so the stored pattern has unique coordinates and nonzero values.
class SparseMatrix {
public:
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  // y = A x; x is read flattened and must have size cols().
  Tensor apply(const Tensor& x) const;
  // x = A^T y; y must have size rows(). Exact transpose of apply:
  // dot(apply(x), y) == dot(x, apply_transpose(y)) to rounding.
  Tensor apply_transpose(const Tensor& y) const;

  SparseMatrix transpose() const;

  std::vector<Triplet> triplets() const;
  Tensor to_dense() const;

private:
  SparseMatrix() = default;
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace nfula
