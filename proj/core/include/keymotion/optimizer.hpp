#ifndef KEYMOTION_OPTIMIZER_HPP_
#define KEYMOTION_OPTIMIZER_HPP_

#include <cstdint>

#include "keymotion/common.hpp"

namespace keymotion {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::int64_t step = 0;
  Vector m;
  Vector v;
  AdamConfig config;

  static OptimizerState For(Eigen::Index size, const AdamConfig& config = {});
};

// Bias-corrected adaptive-moment update; increments state.step.
void AdamStep(OptimizerState& state, Vector& params, const Vector& grads);

}  // namespace keymotion

#endif  // KEYMOTION_OPTIMIZER_HPP_
