#pragma once

#include "fairvfl/nn/param.hpp"

#include <cstdint>
#include <vector>

namespace fairvfl::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamMoments {
  Tensor2D first_weights;
  Tensor2D second_weights;
  RowVector first_bias;
  RowVector second_bias;
};

/// Moments for one group of blocks plus the shared step counter.
/// Buffers are sized on the first update and checked on every later one.
struct AdamState {
  AdamConfig config;
  std::vector<AdamMoments> moments;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : config(cfg) {}
};

// One bias-corrected Adam step using the gradients currently held by the
// blocks. Gradient accumulators are left untouched.
void adam_update(const BlockList& blocks, AdamState& state);

}  // namespace fairvfl::nn
