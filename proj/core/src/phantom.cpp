// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "nfula/error.hpp"

namespace nfula {

namespace {

// Renders f over [-1,1]^2 with 2x2 supersampling per pixel.
Tensor render(std::size_t side, const std::function<double(double, double)>& f) {
  if (side < 2) throw ShapeError("phantom: side must be >= 2");
  Tensor img({side, side});
  double h = 2.0 / static_cast<double>(side);
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) {
      double acc = 0.0;
      for (int sr = 0; sr < 2; ++sr)
        for (int sc = 0; sc < 2; ++sc) {
          double y = -1.0 + (static_cast<double>(r) + 0.25 + 0.5 * sr) * h;
          double x = -1.0 + (static_cast<double>(c) + 0.25 + 0.5 * sc) * h;
          acc += f(x, y);
        }
      img.at(r, c) = std::clamp(acc / 4.0, 0.0, 1.0);
    }
  return img;
}

struct Ellipse {
  double cx, cy, a, b, angle, value;
};

double ellipse_sum(const std::vector<Ellipse>& parts, double x, double y) {
  double v = 0.0;
  for (const Ellipse& e : parts) {
    double dx = x - e.cx, dy = y - e.cy;
    double ca = std::cos(e.angle), sa = std::sin(e.angle);
    double u = (dx * ca + dy * sa) / e.a;
    double w = (-dx * sa + dy * ca) / e.b;
    if (u * u + w * w <= 1.0) v += e.value;
  }
  return v;
}

}  // namespace

Tensor disk_phantom(std::size_t side) {
  return render(side, [](double x, double y) {
    return x * x + y * y <= 0.55 * 0.55 ? 0.9 : 0.1;
  });
}

Tensor ellipse_phantom(std::size_t side) {
  static const std::vector<Ellipse> parts = {
      {0.0, 0.0, 0.85, 0.70, 0.0, 0.75},
      {0.0, 0.02, 0.72, 0.58, 0.0, -0.35},
      {-0.25, 0.10, 0.18, 0.30, 0.4, 0.25},
      {0.25, 0.10, 0.15, 0.28, -0.4, 0.25},
      {0.0, -0.30, 0.20, 0.12, 0.0, -0.15},
      {0.0, 0.35, 0.08, 0.08, 0.0, 0.30},
  };
  return render(side,
                [](double x, double y) { return 0.05 + ellipse_sum(parts, x, y); });
}

Tensor checkerboard_phantom(std::size_t side, std::size_t cells) {
  if (cells == 0) throw ShapeError("phantom: cells must be >= 1");
  return render(side, [cells](double x, double y) {
    auto ix = static_cast<long>(std::floor((x + 1.0) / 2.0 * cells));
    auto iy = static_cast<long>(std::floor((y + 1.0) / 2.0 * cells));
    ix = std::clamp<long>(ix, 0, static_cast<long>(cells) - 1);
    iy = std::clamp<long>(iy, 0, static_cast<long>(cells) - 1);
    return (ix + iy) % 2 == 0 ? 0.15 : 0.85;
  });
}

Tensor random_disks_phantom(std::size_t side, Rng& rng, std::size_t n_disks) {
  std::vector<Ellipse> parts;
  for (std::size_t i = 0; i < n_disks; ++i) {
    double cx = -0.5 + rng.uniform();
    double cy = -0.5 + rng.uniform();
    double radius = 0.15 + 0.35 * rng.uniform();
    double value = 0.25 + 0.6 * rng.uniform();
    parts.push_back({cx, cy, radius, radius, 0.0, value});
  }
  double background = 0.05 + 0.1 * rng.uniform();
  return render(side, [&](double x, double y) {
    return background + ellipse_sum(parts, x, y);
  });
}

Tensor make_phantom(const std::string& name, std::size_t side) {
  if (name == "disk") return disk_phantom(side);
  if (name == "ellipses") return ellipse_phantom(side);
  if (name == "checkerboard") return checkerboard_phantom(side);
  throw ParseError("unknown phantom name: " + name +
                   " (expected disk, ellipses, or checkerboard)");
}

}  // namespace nfula
