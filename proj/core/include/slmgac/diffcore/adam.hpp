#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "slmgac/diffcore/tensor.hpp"

namespace slmgac::diffcore {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamMoments {
  Tensor first;
  Tensor second;
};

/// Optimizer state for one parameter group. Moments are created lazily the
/// first time a parameter path is stepped.
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::map<std::string, AdamMoments> moments;
};

/// Bias-corrected Adam update of every parameter in `params`, then zeroes the
/// gradients. Throws NumericFault naming the first parameter whose gradient
/// holds a NaN or Inf; nothing is modified in that case.
void adam_step(const ParamRefs& params, AdamState& state);

}  // namespace slmgac::diffcore
