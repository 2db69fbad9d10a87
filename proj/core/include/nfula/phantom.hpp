// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "nfula/rng.hpp"
#include "nfula/tensor.hpp"

namespace nfula {

// Built-in ground-truth images on [0,1], side x side. Shapes are drawn in
// normalized coordinates [-1, 1]^2 with 2x2 supersampling so edges are not
// aliased to a single hard step.

// Centered disk (radius 0.55, intensity 0.9 on a 0.1 background).
Tensor disk_phantom(std::size_t side);

// Head-like composite of nested and offset ellipses.
Tensor ellipse_phantom(std::size_t side);

// cells x cells alternating squares at 0.15 / 0.85.
Tensor checkerboard_phantom(std::size_t side, std::size_t cells = 8);

// Random disks on a random low background; training material for image
// and patch priors over the disk family.
Tensor random_disks_phantom(std::size_t side, Rng& rng, std::size_t n_disks = 3);

// Dispatch by name: disk | ellipses | checkerboard.
Tensor make_phantom(const std::string& name, std::size_t side);

}  // namespace nfula
