// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/nft.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nfula/error.hpp"

namespace nfula {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

[[noreturn]] void malformed(std::istream& in, const std::string& what) {
  std::ostringstream msg;
  msg << "malformed tensor stream at byte " << in.tellg() << ": " << what;
  throw ParseError(msg.str());
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) malformed(in, std::string("truncated ") + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) malformed(in, std::string("truncated ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_nft(std::ostream& out, const Tensor& t) {
  out.write("NFT1", 4);
  put_u32(out, static_cast<std::uint32_t>(t.ndim()));
  for (std::size_t e : t.shape()) put_u64(out, e);
  for (std::size_t i = 0; i < t.size(); ++i) put_f64(out, t[i]);
  if (!out) throw IoError("tensor write failed");
}

void write_nft(const std::string& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  write_nft(f, t);
}

Tensor read_nft(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) malformed(in, "truncated magic");
  if (std::memcmp(magic, "NFT1", 4) != 0) malformed(in, "bad magic, expected NFT1");
  std::uint32_t ndim = get_u32(in, "rank");
  if (ndim == 0 || ndim > 8) malformed(in, "rank out of range [1, 8]");
  std::vector<std::size_t> shape(ndim);
  std::size_t total = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    std::uint64_t e = get_u64(in, "extent");
    if (e == 0) malformed(in, "zero extent");
    if (total > (1ull << 40) / e) malformed(in, "tensor size implausibly large");
    shape[i] = static_cast<std::size_t>(e);
    total *= shape[i];
  }
  std::vector<double> values(total);
  for (std::size_t i = 0; i < total; ++i)
    values[i] = std::bit_cast<double>(get_u64(in, "payload"));
  Tensor t(std::move(shape), std::move(values));
  t.require_finite("tensor payload");
  return t;
}

Tensor read_nft(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  return read_nft(f);
}

}  // namespace nfula
