// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <fstream>
#include <sstream>
#include <vector>

#include "nfula/error.hpp"

namespace nfula {

namespace {

[[noreturn]] void malformed(std::size_t offset, const std::string& what) {
  throw ParseError("malformed image header at byte " + std::to_string(offset) + ": " +
                   what);
}

// Whitespace/comment-aware token scanner over the raw bytes.
struct HeaderScanner {
  const std::vector<unsigned char>& bytes;
  std::size_t pos = 0;

  void skip_separators() {
    while (pos < bytes.size()) {
      unsigned char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(c)) {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::size_t next_uint(const char* what) {
    skip_separators();
    if (pos >= bytes.size()) malformed(pos, std::string("missing ") + what);
    if (!std::isdigit(bytes[pos]))
      malformed(pos, std::string("expected digits for ") + what);
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (std::size_t{1} << 32)) malformed(pos, std::string(what) + " overflows");
      ++pos;
    }
    return v;
  }
};

}  // namespace

Tensor read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 2) malformed(0, "file shorter than a magic number");
  if (bytes[0] == 'P' && bytes[1] == '2')
    malformed(0, "ASCII PGM (P2) is not supported, use binary P5");
  if (bytes[0] != 'P' || bytes[1] != '5') malformed(0, "expected P5 magic");

  HeaderScanner scan{bytes, 2};
  std::size_t width = scan.next_uint("width");
  std::size_t height = scan.next_uint("height");
  std::size_t maxval = scan.next_uint("maxval");
  if (width == 0 || height == 0) malformed(scan.pos, "zero image dimension");
  if (maxval == 0 || maxval > 65535) malformed(scan.pos, "maxval out of range");
  if (scan.pos >= bytes.size() || !std::isspace(bytes[scan.pos]))
    malformed(scan.pos, "expected single whitespace before pixel data");
  std::size_t data_at = scan.pos + 1;

  std::size_t bpp = maxval <= 255 ? 1 : 2;
  std::size_t need = width * height * bpp;
  if (bytes.size() - data_at < need)
    malformed(data_at, "pixel payload truncated: need " + std::to_string(need) +
                           " bytes, have " + std::to_string(bytes.size() - data_at));

  Tensor image({height, width});
  double inv = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < width * height; ++i) {
    std::size_t v;
    if (bpp == 1) {
      v = bytes[data_at + i];
    } else {
      v = (static_cast<std::size_t>(bytes[data_at + 2 * i]) << 8) |
          bytes[data_at + 2 * i + 1];
    }
    if (v > maxval)
      throw ParseError("malformed image payload at byte " +
                       std::to_string(data_at + i * bpp) + ": sample exceeds maxval");
    image[i] = static_cast<double>(v) * inv;
  }
  return image;
}

void write_pgm(const std::string& path, const Tensor& image, int bit_depth) {
  if (image.ndim() != 2) throw ShapeError("pgm writer expects a 2-D tensor");
  image.require_finite("pgm image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  std::size_t maxval = bit_depth <= 8 ? 255 : 65535;
  out << "P5\n" << image.cols() << " " << image.rows() << "\n" << maxval << "\n";
  for (std::size_t i = 0; i < image.size(); ++i) {
    double v = std::clamp(image[i], 0.0, 1.0);
    auto q = static_cast<std::size_t>(std::lround(v * static_cast<double>(maxval)));
    if (maxval == 255) {
      out.put(static_cast<char>(q));
    } else {
      out.put(static_cast<char>(q >> 8));
      out.put(static_cast<char>(q & 0xff));
    }
  }
  if (!out.good()) throw IoError("failed while writing image: " + path);
}

}  // namespace nfula
