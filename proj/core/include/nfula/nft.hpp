// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>

#include "nfula/tensor.hpp"

namespace nfula {

// Raw tensor container, format tag "NFT1": the 4 magic bytes, a u32
// little-endian rank, rank u64 little-endian extents, then the payload as
// row-major little-endian binary64. Write-then-read is bit exact.

void write_nft(std::ostream& out, const Tensor& t);
void write_nft(const std::string& path, const Tensor& t);

// Throws ParseError (malformed content, with byte offset) or
// NonFiniteError (payload holds NaN/Inf) or IoError (unreadable file).
Tensor read_nft(std::istream& in);
Tensor read_nft(const std::string& path);

}  // namespace nfula
