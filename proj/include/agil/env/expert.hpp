#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "agil/env/multigait.hpp"

namespace agil::env {

inline constexpr int kModes = 5;
inline constexpr int kWindowH = 2;  // observation horizon

// Per-mode limb phase offsets, limb order [LF, RF, LR, RR]:
//   0 walk:   quarter offsets
//   1 pace:   lateral pairs in phase
//   2 trot:   diagonal pairs in phase
//   3 canter: asymmetric 3-1 grouping
//   4 jump:   all in phase (drives the height-channel pulse)
const std::array<std::array<double, kLimbs>, kModes>& mode_phase_offsets();

// Feedback controller that locks the limb phases onto a mode's offset
// pattern while tracking velocity/yaw/height commands. Used by the expert
// demo generator and as the command-execution layer under the task course.
class ScriptedGaitController {
 public:
  ScriptedGaitController(int mode, double style, GaitCommand command,
                         double initial_ref_phase);

  // Computes the 7-d action for the current state and advances the internal
  // reference oscillator.
  Vector act(const MultiGaitState& state, const MultiGaitParams& params);

  void set_mode(int mode) { mode_ = mode; }
  void set_style(double style) { style_ = style; }
  void set_command(const GaitCommand& command) { command_ = command; }
  int mode() const { return mode_; }
  double ref_phase() const { return ref_phase_; }

  // Steady-state base drive: amplitude tracks style in locomotion modes and
  // the commanded jump height in mode 4.
  double base_drive(const MultiGaitParams& params) const;

  // State settled onto the mode pattern (no transient).
  MultiGaitState settled_state(const MultiGaitParams& params) const;

 private:
  int mode_;
  double style_;
  GaitCommand command_;
  double ref_phase_;
};

struct TransitionWindow {
  Vector features;  // flattened horizon x feature_width
};

struct DemoDataset {
  int horizon = kWindowH;
  int feature_width = kGaitFeatureDim;
  std::vector<Vector> windows;  // flattened horizon * feature_width
  std::vector<int> labels;      // -1 = unlabeled
  double label_fraction = 0.0;
  Vector mode_proportions = Vector::Zero(kModes);

  // Ground truth kept for evaluation when the dataset was generated locally;
  // not part of the serialized format.
  std::vector<int> true_modes;
  std::vector<double> true_styles;

  void validate() const;
  std::vector<int> labeled_indices() const;
  // Labeled indices rebalanced across modes by duplication, for samplers.
  std::vector<int> balanced_labeled_pool() const;
  int count() const { return static_cast<int>(windows.size()); }
};

struct DemoGenConfig {
  int n_per_mode = 600;
  double style_lo = -1.0;
  double style_hi = 1.0;
  std::array<double, kModes> proportions = {0.35, 0.25, 0.2, 0.15, 0.05};
  double label_fraction = 0.04;
  int traj_len = 121;  // steps per scripted trajectory
  std::uint64_t seed = 1;
};

// Five scripted controllers produce the imbalanced multimodal dataset; at
// most label_fraction of the windows carry labels.
DemoDataset generate_expert_demos(const DemoGenConfig& config);
DemoDataset generate_expert_demos(int n_per_mode, double style_lo, double style_hi,
                                  std::uint64_t seed);

// Newline-delimited JSON: {"features": [[...], [...]], "label": int|null}.
void save_demos_ndjson(const std::filesystem::path& path, const DemoDataset& data);
DemoDataset load_demos_ndjson(const std::filesystem::path& path);

// Rolls one scripted trajectory and returns per-step feature rows.
Matrix scripted_trajectory(int mode, double style, double vx, int steps,
                           double initial_ref_phase, const MultiGaitParams& params);

// Threshold detector used to verify that height pulses appear only in
// mode-4 data: true if any step in the window has height above
// h_base + threshold.
bool window_has_height_pulse(const Vector& window, double h_base, double threshold);

// Mean limb amplitude across a window (the style-linked statistic).
double window_mean_amplitude(const Vector& window);

}  // namespace agil::env
