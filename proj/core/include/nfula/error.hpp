// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace nfula {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or dimension disagreement between operands.
class ShapeError : public Error {
public:
  using Error::Error;
};

// Non-finite value seen where a finite one is required.
class NonFiniteError : public Error {
public:
  using Error::Error;
};

// Iterative routine exhausted its budget without meeting tolerance.
class NonConvergenceError : public Error {
public:
  using Error::Error;
};

// An object was asked for an operation it does not support
// (e.g. gradient of a non-smooth prior, Lipschitz constant of a
// Poisson likelihood, filtered backprojection of a blur operator).
class CapabilityError : public Error {
public:
  using Error::Error;
};

// Degenerate numeric input: zero scale, constant series, empty set, ...
class DegenerateInputError : public Error {
public:
  using Error::Error;
};

// Malformed file, config, or checkpoint content.
class ParseError : public Error {
public:
  using Error::Error;
};

// Filesystem level failure (open/read/write).
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace nfula
