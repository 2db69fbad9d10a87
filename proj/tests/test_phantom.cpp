// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstddef>

#include <doctest.h>

#include "nfula/error.hpp"
#include "nfula/phantom.hpp"
#include "nfula/rng.hpp"

using namespace nfula;

TEST_SUITE_BEGIN("phantom");

TEST_CASE("disk phantom hits its two plateaus") {
  Tensor img = disk_phantom(64);
  REQUIRE(img.shape() == std::vector<std::size_t>{64, 64});
  CHECK(img.at(32, 32) == 0.9);  // deep inside the disk
  CHECK(img.at(0, 0) == 0.1);    // far corner background
  CHECK(img.at(1, 62) == 0.1);
  for (std::size_t i = 0; i < img.size(); ++i) {
    CHECK(img[i] >= 0.1);
    CHECK(img[i] <= 0.9);
  }
  // edge pixels are antialiased: some strictly interior value must exist
  bool partial = false;
  for (std::size_t i = 0; i < img.size(); ++i)
    if (img[i] > 0.1 && img[i] < 0.9) partial = true;
  CHECK(partial);
}

TEST_CASE("checkerboard alternates its two tones") {
  Tensor img = checkerboard_phantom(32, 8);  // 4 px per cell
  CHECK(img.at(2, 2) == 0.15);
  CHECK(img.at(2, 6) == 0.85);
  CHECK(img.at(6, 2) == 0.85);
  CHECK(img.at(6, 6) == 0.15);
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK((img[i] == 0.15 || img[i] == 0.85));

  CHECK_THROWS_AS(checkerboard_phantom(16, 0), ShapeError);
}

TEST_CASE("ellipse phantom stays in the unit range with structure") {
  Tensor img = ellipse_phantom(48);
  double lo = 2.0, hi = -1.0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    CHECK(img[i] >= 0.0);
    CHECK(img[i] <= 1.0);
    lo = std::min(lo, img[i]);
    hi = std::max(hi, img[i]);
  }
  CHECK(hi - lo > 0.2);  // not a flat field
  CHECK(img.at(0, 0) == 0.05);
}

TEST_CASE("named dispatch") {
  Tensor disk = make_phantom("disk", 16);
  CHECK(norm_inf(disk - disk_phantom(16)) == 0.0);
  Tensor ell = make_phantom("ellipses", 16);
  CHECK(norm_inf(ell - ellipse_phantom(16)) == 0.0);
  Tensor check = make_phantom("checkerboard", 16);
  CHECK(norm_inf(check - checkerboard_phantom(16)) == 0.0);
  CHECK_THROWS_AS(make_phantom("shepp", 16), ParseError);
  CHECK_THROWS_AS(disk_phantom(1), ShapeError);
}

TEST_CASE("random disks are deterministic per stream and vary across seeds") {
  Rng a(42, 3), b(42, 3), c(43, 3);
  Tensor pa = random_disks_phantom(32, a);
  Tensor pb = random_disks_phantom(32, b);
  Tensor pc = random_disks_phantom(32, c);
  CHECK(norm_inf(pa - pb) == 0.0);
  CHECK(norm_inf(pa - pc) > 0.0);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i] >= 0.0);
    CHECK(pa[i] <= 1.0);
  }

  // consecutive draws from one stream differ (layouts are consumed)
  Rng shared(7, 3);
  Tensor first = random_disks_phantom(24, shared);
  Tensor second = random_disks_phantom(24, shared);
  CHECK(norm_inf(first - second) > 0.0);
}

TEST_SUITE_END();
