#include "agil/env/paramsim.hpp"

#include <cmath>

namespace agil::env {

void SimParams::validate() const {
  require(stiffness.size() == kSimJoints && damping.size() == kSimJoints,
          "SimParams: wrong joint count");
  for (int j = 0; j < kSimJoints; ++j) {
    require(stiffness[j] > 0.0, "SimParams: stiffness must be positive");
    require(damping[j] > 0.0, "SimParams: damping must be positive");
  }
  require(mass > 0.0, "SimParams: mass must be positive");
  require(friction >= 0.0, "SimParams: friction must be nonnegative");
}

Vector SimParams::searched() const {
  Vector v(2 * kSimJoints + 1);
  v.segment(0, kSimJoints) = stiffness;
  v.segment(kSimJoints, kSimJoints) = damping;
  v[2 * kSimJoints] = friction;
  return v;
}

SimParams SimParams::from_searched(const Vector& v, double mass) {
  require(v.size() == 2 * kSimJoints + 1, "SimParams::from_searched: wrong width");
  SimParams p;
  p.stiffness = v.segment(0, kSimJoints);
  p.damping = v.segment(kSimJoints, kSimJoints);
  p.friction = v[2 * kSimJoints];
  p.mass = mass;
  return p;
}

namespace {
double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
}

ParamSimState step_paramsim(const ParamSimState& state, const Vector& action,
                            const SimParams& params, double dt, double tau_limit) {
  params.validate();
  require(action.size() == kSimJoints, "step_paramsim: action width mismatch");
  for (int j = 0; j < kSimJoints; ++j)
    require_finite(action[j], "step_paramsim: non-finite action");
  ParamSimState next;
  next.q = Vector(kSimJoints);
  next.qd = Vector(kSimJoints);
  for (int j = 0; j < kSimJoints; ++j) {
    double tau = params.stiffness[j] * (action[j] - state.q[j]) -
                 params.damping[j] * state.qd[j];
    tau = std::min(tau_limit, std::max(-tau_limit, tau));
    const double qdd = (tau - params.friction * sign0(state.qd[j])) / params.mass;
    next.qd[j] = state.qd[j] + qdd * dt;
    next.q[j] = state.q[j] + next.qd[j] * dt;
  }
  return next;
}

Vector sim_observation(const ParamSimState& s) {
  Vector o(kSimObsDim);
  o.segment(0, kSimJoints) = s.q;
  o.segment(kSimJoints, kSimJoints) = s.qd;
  return o;
}

Vector excitation_action(int step) {
  const double t = 0.02 * step;
  Vector a(kSimJoints);
  for (int j = 0; j < kSimJoints; ++j) {
    const double ph = 0.9 * j;
    a[j] = 0.6 * std::sin(2.0 * 3.14159265358979323846 * (0.4 + 0.25 * j) * t + ph) +
           0.3 * std::sin(2.0 * 3.14159265358979323846 * (1.3 + 0.2 * j) * t + 2.0 * ph);
  }
  return a;
}

Matrix rollout_transitions(const SimParams& params, int steps, double obs_noise,
                           Rng& rng) {
  params.validate();
  Matrix out(steps, kSimTransitionDim);
  ParamSimState s;  // settled zero state
  Vector obs = sim_observation(s);
  auto noisy = [&](const Vector& o) {
    if (obs_noise <= 0.0) return o;
    Vector n = o;
    for (Eigen::Index i = 0; i < n.size(); ++i) n[i] += obs_noise * rng.normal();
    return n;
  };
  Vector recorded = noisy(obs);
  for (int t = 0; t < steps; ++t) {
    const Vector a = excitation_action(t);
    ParamSimState ns = step_paramsim(s, a, params);
    const Vector next_obs = sim_observation(ns);
    const Vector next_recorded = noisy(next_obs);
    out.row(t).segment(0, kSimObsDim) = recorded;
    out.row(t).segment(kSimObsDim, kSimJoints) = a;
    out.row(t).segment(kSimObsDim + kSimJoints, kSimObsDim) = next_recorded;
    s = ns;
    recorded = next_recorded;
  }
  return out;
}

}  // namespace agil::env
