// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "nfula/flow.hpp"

namespace nfula {

// Flow checkpoint container, format tag "NFCK" version 1: named f64
// tensors, one entry per parameter or metadata field; names carry the
// layer index, layer kind, and parameter role. Holds the architecture,
// all parameters, and optionally the optimizer/rng state needed to resume
// training bit for bit.

struct FlowCheckpoint {
  FlowModel model;
  bool has_train_state = false;
  TrainState train;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_stream = 0;
  std::uint64_t rng_counter = 0;
};

void save_checkpoint(const std::string& path, const FlowModel& model,
                     const TrainState* train = nullptr, const Rng* rng = nullptr);

FlowCheckpoint load_checkpoint(const std::string& path);

}  // namespace nfula
