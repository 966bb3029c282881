#include "keymotion/optimizer.hpp"

#include <cmath>
#include <string>

namespace keymotion {

OptimizerState OptimizerState::For(Eigen::Index size, const AdamConfig& config) {
  OptimizerState state;
  state.m = Vector::Zero(size);
  state.v = Vector::Zero(size);
  state.config = config;
  return state;
}

void AdamStep(OptimizerState& state, Vector& params, const Vector& grads) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("optimizer shape mismatch: params " + std::to_string(params.size()) + ", grads " +
                                std::to_string(grads.size()) + ", moments " + std::to_string(state.m.size()));
  }
  const AdamConfig& c = state.config;
  ++state.step;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grads;
  state.v = c.beta2 * state.v + (1.0 - c.beta2) * grads.cwiseAbs2();
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const double step_size = c.learning_rate / correction1;
  params.array() -= step_size * state.m.array() / ((state.v.array() / correction2).sqrt() + c.epsilon);
}

}  // namespace keymotion
