// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ngt/tensor.hpp"

namespace ngt {

enum class GatingVariant {
  NoGatingBlock,
  NeuromodulatedGating,
  NonNeuromodulatedGating,
};

std::string variant_name(GatingVariant v);
GatingVariant variant_from_name(const std::string& name);

// Gates sit after the layers named in `positions` (1-based): the block reads
// layer k's output and its result feeds layer k+1, or the head when k == L.
struct GatingConfig {
  GatingVariant variant = GatingVariant::NoGatingBlock;
  std::vector<int64_t> positions;
  int64_t gb_depth = 3;
  // The non-neuromodulated block normally feeds its stack output onward as
  // extra layers would. This switch keeps the final sigmoid instead.
  bool gb_sigmoid = false;
};

void validate_gating(const GatingConfig& gating, int64_t num_layers);

// Insertion points used by position sweeps, scaled from the 24-layer shape
// (3 near the input, 21 near the head) and clamped to [1, L-1].
int64_t sweep_start_position(int64_t num_layers);
int64_t sweep_end_position(int64_t num_layers);

Tensor apply_gate(const Tensor& x, const Tensor& gate);

}  // namespace ngt
