#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tsdapt/array.hpp"

namespace tsdapt {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer state. Accumulators are created lazily on the
/// first step, one pair per parameter, in the order parameters are passed.
struct OptimizerState {
  AdamConfig config;
  std::vector<Array> first_moment;
  std::vector<Array> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update applied in place.
void adam_step(std::span<Array* const> params, std::span<const Array> grads, OptimizerState& state);

}  // namespace tsdapt
