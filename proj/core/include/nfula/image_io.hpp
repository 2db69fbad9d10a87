// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "nfula/tensor.hpp"

namespace nfula {

// Binary PGM (P5) reader: 8-bit for maxval <= 255, 16-bit big-endian
// otherwise, values scaled by maxval into [0, 1]. ASCII P2 files are
// rejected. Malformed headers raise ParseError with the byte offset.
Tensor read_pgm(const std::string& path);

// Writes a 2-D tensor as binary PGM after clamping to [0, 1]; bit_depth 8
// uses maxval 255, anything larger uses 16-bit maxval 65535.
void write_pgm(const std::string& path, const Tensor& image, int bit_depth = 16);

}  // namespace nfula
