#pragma once

#include "agil/nn/tensor.hpp"

namespace agil::env {

using nn::Matrix;
using nn::Vector;

inline constexpr int kSimJoints = 3;
inline constexpr int kSimObsDim = 2 * kSimJoints;     // q, qdot
inline constexpr int kSimTransitionDim = 2 * kSimObsDim + kSimJoints;

// Physical parameters of the chain of torque-limited PD-driven joints.
struct SimParams {
  Vector stiffness = Vector::Constant(kSimJoints, 25.0);  // kp
  Vector damping = Vector::Constant(kSimJoints, 1.0);     // kd
  double mass = 1.0;
  double friction = 0.3;

  void validate() const;
  // Flat layout used by the EASI search: [kp0..2, kd0..2, friction].
  // Mass is treated as known and stays fixed during identification.
  Vector searched() const;
  static SimParams from_searched(const Vector& v, double mass);
};

struct ParamSimState {
  Vector q = Vector::Zero(kSimJoints);
  Vector qd = Vector::Zero(kSimJoints);
};

// One 50 Hz step of
//   tau_j = clamp(kp_j (a_j - q_j) - kd_j qd_j, +-tau_limit)
//   qdd_j = (tau_j - friction * sign(qd_j)) / mass
// integrated semi-implicitly: qd' = qd + qdd dt, q' = q + qd' dt.
ParamSimState step_paramsim(const ParamSimState& state, const Vector& action,
                            const SimParams& params, double dt = 0.02,
                            double tau_limit = 50.0);

Vector sim_observation(const ParamSimState& state);

// Deterministic multi-sine target-angle controller used for identification
// rollouts; purely a function of the step index, so every simulator instance
// sees identical actions.
Vector excitation_action(int step);

// T transitions (o_t, a_t, o_t+1) from the settled zero state. Optional
// observation noise perturbs the recorded observations only.
Matrix rollout_transitions(const SimParams& params, int steps, double obs_noise,
                           Rng& rng);

}  // namespace agil::env
