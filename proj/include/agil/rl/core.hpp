#pragma once

#include <utility>
#include <vector>

#include "agil/ail/losses.hpp"
#include "agil/nn/tape.hpp"

namespace agil::rl {

using nn::Matrix;
using nn::Var;
using nn::Vector;

// One environment step as stored for PPO updates.
struct StepRecord {
  Vector observation;
  ail::LatentSample latent;
  Vector action;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
};

// Per-environment sequences of equal length T plus the bootstrap value of the
// state after the last step.
struct RolloutBuffer {
  std::vector<std::vector<StepRecord>> envs;
  std::vector<double> bootstrap_values;

  void validate() const;
  int total_steps() const;
};

// Standard GAE recursion backward over one sequence; dones cut the bootstrap
// chain. Returns (advantages, value_targets) with targets = A + V.
std::pair<std::vector<double>, std::vector<double>> compute_gae(
    const std::vector<double>& rewards, const std::vector<double>& values,
    const std::vector<bool>& dones, double gamma, double lambda,
    double bootstrap_value);

// Scalar PPO clip loss: -min(rho * A, clip(rho, 1-c, 1+c) * A) with
// rho = exp(log_prob_new - log_prob_old). Advantages are normalized by the
// caller (see normalize_advantages).
double ppo_loss(double log_prob_new, double log_prob_old, double advantage,
                double clip);

// Taped batch version; log_prob_new is a column Var, the rest constants.
Var ppo_loss_batch(const Var& log_prob_new, const Vector& log_prob_old,
                   const Vector& advantages, double clip);

// In-place (x - mean) / (std + 1e-8) with population std.
void normalize_advantages(std::vector<double>& advantages);

// Diagonal-Gaussian policy head helpers. logstd rows broadcast when the Var
// is 1 x dim.
Var gaussian_log_prob_batch(const Var& means, const Var& logstd_row,
                            const Matrix& actions);
double gaussian_entropy(const Vector& logstd);

// ---- hybrid (discrete + per-mode continuous) actions ----

// Mode index plus the selected mode's continuous command slice.
struct HybridAction {
  int mode = 0;
  Vector continuous;
};

struct HybridPolicyOutput {
  Vector mode_logits;     // K
  Matrix per_mode_means;  // K x C
  Matrix per_mode_logstds;
  double value = 0.0;
};

// log softmax(logits)[k] + sum_c log N(cont_c; mean[k,c], std[k,c]); only the
// selected mode's continuous branch contributes.
double hybrid_log_prob(const HybridPolicyOutput& out, const HybridAction& action);

HybridAction sample_hybrid(const HybridPolicyOutput& out, Rng& rng);
Vector mode_distribution(const Vector& mode_logits);

// Taped batch version. mode_logits (B x K), means / logstds (B x K*C); only
// the selected mode's slice receives gradient.
Var hybrid_log_prob_batch(const Var& mode_logits, const Var& means,
                          const Var& logstds, int num_modes, int command_dim,
                          const std::vector<HybridAction>& actions);

// Categorical entropy (mean over batch) for the entropy bonus.
Var categorical_entropy_mean(const Var& logits);

}  // namespace agil::rl
