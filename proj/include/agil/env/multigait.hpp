#pragma once

#include <array>

#include "agil/nn/tensor.hpp"

namespace agil::env {

using nn::Matrix;
using nn::Vector;

inline constexpr int kLimbs = 4;
inline constexpr int kGaitActionDim = 7;
// sin(phi) x4, cos(phi) x4, amp x4, height, then sin/cos of the six pairwise
// phase differences (the rotation-invariant gait signature)
inline constexpr int kGaitFeatureDim = 25;
inline constexpr double kControlDt = 0.02;  // 50 Hz

// Body plus four limb oscillators. Phases are wrapped to [0, 2pi); amplitudes
// are nonnegative.
struct MultiGaitState {
  Vector body_velocity = Vector::Zero(2);
  double heading_rate = 0.0;
  Vector limb_phase = Vector::Zero(kLimbs);
  Vector limb_amplitude = Vector::Ones(kLimbs);
  double height = 0.3;
};

// Constants of the surrogate dynamics. The update equations (one step, with
// action u in [-1,1]^7 and dt = 0.02):
//   phi_i'  = wrap(phi_i + (freq + freq_gain * u_i) * dt)               i<4
//   amp_i'  = max(0, amp_i + amp_rate * (amp_base * (1 + amp_gain * u_i) - amp_i) * dt)
//   v'      = v + (acc_gain * u_{4,5} - drag * v) * dt
//   omega'  = omega + (turn_gain * u_6 - turn_drag * omega) * dt
//   m       = mean_i(amp_i' * sin(phi_i'))
//   h_tgt   = h_base + pulse_gain * max(0, |m| - pulse_deadband * mean_i(amp_i'))
//   h'      = h + h_rate * (h_tgt - h) * dt
// The height channel is driven by limb-phase alignment: patterns whose phase
// offsets cancel (quarter offsets, in-phase pairs) keep m = 0, the 3-1
// grouping stays below the deadband, and the all-in-phase pattern pulses.
struct MultiGaitParams {
  double dt = kControlDt;
  double freq = 2.0 * 3.14159265358979323846;  // 1 Hz intrinsic
  double freq_gain = 0.5 * freq;
  double amp_base = 1.0;
  double amp_gain = 0.6;
  double amp_rate = 4.0;
  double acc_gain = 2.5;
  double drag = 1.2;
  double turn_gain = 3.0;
  double turn_drag = 2.0;
  double h_base = 0.3;
  double pulse_gain = 0.5;
  double pulse_deadband = 0.6;
  double h_rate = 12.0;
};

// Steps the surrogate dynamics. Non-finite action components raise; finite
// components are clamped to [-1, 1].
MultiGaitState step_multigait(const MultiGaitState& state, const Vector& action,
                              const MultiGaitParams& params);

// Imitation-relevant per-step features o^I: {sin(phi) x4, cos(phi) x4,
// amp x4, height, sin/cos(phi_i - phi_j) for the six limb pairs}.
Vector gait_features(const MultiGaitState& state);

// BBC command inputs. Mode selects the jump/locomotion indicator; ranges per
// mode follow the task command table mapped 1:1 onto toy units.
struct GaitCommand {
  int mode = 0;
  double vx = 0.0;
  double vy = 0.0;
  double yaw_rate = 0.0;
  double height = 0.3;  // jump height for mode 4, locomotion height otherwise
};

struct CommandRanges {
  double vx_lo, vx_hi, vy_lo, vy_hi, wz_lo, wz_hi, h_lo, h_hi;
};
CommandRanges command_ranges(int mode);
GaitCommand sample_command(int mode, Rng& rng);

// Per-term command-tracking reward. The breakdown always sums to total.
struct BbcRewardBreakdown {
  double linear = 0.0;
  double angular = 0.0;
  double jump = 0.0;
  double locomotion_height = 0.0;
  double smoothness = 0.0;
  double total = 0.0;
};

// 2 exp(-||v_cmd - v||^2) + 1.5 exp(-(w_cmd - w)^2)
// + 2 I_jump I(|h_cmd - h| < 0.05) + 0.1 I_loco exp(-(h_cmd - h)^2)
// - 0.1 ||a - a_prev||^2, with I_jump = (mode == 4) and I_loco its complement.
BbcRewardBreakdown bbc_command_rewards(const MultiGaitState& state,
                                       const GaitCommand& command,
                                       const Vector& action,
                                       const Vector& prev_action);

double wrap_angle_2pi(double a);   // into [0, 2pi)
double wrap_angle_pi(double a);    // into (-pi, pi]

}  // namespace agil::env
