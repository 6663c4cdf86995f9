#pragma once

#include <vector>

#include "agil/nn/tensor.hpp"

namespace agil::nn {

// First/second-moment state matching one ParamStore buffer-for-buffer.
// Moments are lazily sized on the first step and must match afterwards.
struct OptimizerState {
  enum class Kind { adam, rmsprop };

  Kind kind = Kind::adam;
  double learning_rate = 1e-3;
  long step_count = 0;

  // adam
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // rmsprop
  double decay = 0.99;

  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
};

OptimizerState make_adam(double learning_rate);
OptimizerState make_rmsprop(double learning_rate);

// Applies one update from the gradients accumulated in `params` and zeroes
// them. Throws NumericError before touching any parameter if a gradient is
// non-finite.
void adam_step(OptimizerState& opt, ParamStore& params);
void rmsprop_step(OptimizerState& opt, ParamStore& params);
void optimizer_step(OptimizerState& opt, ParamStore& params);

}  // namespace agil::nn
