#include "agil/env/multigait.hpp"

#include <cmath>

namespace agil::env {

namespace {
constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
}

double wrap_angle_2pi(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}

double wrap_angle_pi(double a) {
  double w = std::fmod(a + 3.14159265358979323846, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w - 3.14159265358979323846;
}

MultiGaitState step_multigait(const MultiGaitState& state, const Vector& action,
                              const MultiGaitParams& p) {
  require(action.size() == kGaitActionDim, "step_multigait: action must be 7-d");
  Vector u(kGaitActionDim);
  for (int i = 0; i < kGaitActionDim; ++i) {
    require_finite(action[i], "step_multigait: non-finite action component");
    u[i] = std::min(1.0, std::max(-1.0, action[i]));
  }

  MultiGaitState next = state;
  for (int i = 0; i < kLimbs; ++i) {
    next.limb_phase[i] =
        wrap_angle_2pi(state.limb_phase[i] + (p.freq + p.freq_gain * u[i]) * p.dt);
    const double amp_target = p.amp_base * (1.0 + p.amp_gain * u[i]);
    next.limb_amplitude[i] = std::max(
        0.0, state.limb_amplitude[i] +
                 p.amp_rate * (amp_target - state.limb_amplitude[i]) * p.dt);
  }
  next.body_velocity[0] =
      state.body_velocity[0] + (p.acc_gain * u[4] - p.drag * state.body_velocity[0]) * p.dt;
  next.body_velocity[1] =
      state.body_velocity[1] + (p.acc_gain * u[5] - p.drag * state.body_velocity[1]) * p.dt;
  next.heading_rate =
      state.heading_rate + (p.turn_gain * u[6] - p.turn_drag * state.heading_rate) * p.dt;

  double m = 0.0, amp_mean = 0.0;
  for (int i = 0; i < kLimbs; ++i) {
    m += next.limb_amplitude[i] * std::sin(next.limb_phase[i]);
    amp_mean += next.limb_amplitude[i];
  }
  m /= kLimbs;
  amp_mean /= kLimbs;
  const double pulse = std::max(0.0, std::abs(m) - p.pulse_deadband * amp_mean);
  const double h_target = p.h_base + p.pulse_gain * pulse;
  next.height = state.height + p.h_rate * (h_target - state.height) * p.dt;
  return next;
}

Vector gait_features(const MultiGaitState& s) {
  Vector f(kGaitFeatureDim);
  for (int i = 0; i < kLimbs; ++i) {
    f[i] = std::sin(s.limb_phase[i]);
    f[kLimbs + i] = std::cos(s.limb_phase[i]);
    f[2 * kLimbs + i] = s.limb_amplitude[i];
  }
  f[3 * kLimbs] = s.height;
  int k = 3 * kLimbs + 1;
  for (int i = 0; i < kLimbs; ++i)
    for (int j = i + 1; j < kLimbs; ++j) {
      const double d = s.limb_phase[i] - s.limb_phase[j];
      f[k++] = std::sin(d);
      f[k++] = std::cos(d);
    }
  return f;
}

CommandRanges command_ranges(int mode) {
  require(mode >= 0 && mode < 5, "command_ranges: mode out of range");
  switch (mode) {
    case 0: return {0.0, 0.6, -0.15, 0.15, -1.0, 1.0, 0.25, 0.34};    // walk
    case 1: return {0.5, 1.5, -0.3, 0.3, -1.57, 1.57, 0.25, 0.34};    // pace
    case 2: return {0.5, 1.5, -0.3, 0.3, -1.57, 1.57, 0.25, 0.34};    // trot
    case 3: return {0.8, 2.0, -0.5, 0.5, -0.5, 0.5, 0.25, 0.34};      // canter
    default: return {0.8, 1.8, -0.3, 0.3, -0.5, 0.5, 0.45, 0.55};     // jump
  }
}

GaitCommand sample_command(int mode, Rng& rng) {
  const CommandRanges r = command_ranges(mode);
  GaitCommand c;
  c.mode = mode;
  c.vx = rng.uniform(r.vx_lo, r.vx_hi);
  c.vy = rng.uniform(r.vy_lo, r.vy_hi);
  c.yaw_rate = rng.uniform(r.wz_lo, r.wz_hi);
  c.height = rng.uniform(r.h_lo, r.h_hi);
  return c;
}

BbcRewardBreakdown bbc_command_rewards(const MultiGaitState& state,
                                       const GaitCommand& command,
                                       const Vector& action,
                                       const Vector& prev_action) {
  require(action.size() == prev_action.size(), "bbc_command_rewards: action sizes");
  BbcRewardBreakdown b;
  const double dvx = command.vx - state.body_velocity[0];
  const double dvy = command.vy - state.body_velocity[1];
  b.linear = 2.0 * std::exp(-(dvx * dvx + dvy * dvy));
  const double dw = command.yaw_rate - state.heading_rate;
  b.angular = 1.5 * std::exp(-dw * dw);
  const double dh = command.height - state.height;
  if (command.mode == 4) {
    b.jump = (std::abs(dh) < 0.05) ? 2.0 : 0.0;
  } else {
    b.locomotion_height = 0.1 * std::exp(-dh * dh);
  }
  b.smoothness = -0.1 * (action - prev_action).squaredNorm();
  b.total = b.linear + b.angular + b.jump + b.locomotion_height + b.smoothness;
  return b;
}

}  // namespace agil::env
