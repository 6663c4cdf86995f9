#pragma once

#include <optional>
#include <vector>

#include "agil/nn/tape.hpp"

namespace agil::ail {

using nn::Matrix;
using nn::Var;
using nn::Vector;

inline constexpr int kSkillCount = 5;
inline constexpr double kLogProbFloor = -13.815510557964274;  // log(1e-6)

// Categorical skill index plus continuous style vector in [-1, 1]^m.
struct LatentSample {
  int skill = 0;
  Vector style = Vector::Zero(1);

  void validate() const;
};

// Sampling distribution over skills, tracked as an exponential moving
// average of predictor posteriors over unlabeled expert data.
struct LatentPrior {
  Vector probabilities = Vector::Constant(kSkillCount, 1.0 / kSkillCount);
  double ema_rate = 1e-3;

  void validate() const;
};

LatentSample sample_latent(const LatentPrior& prior, int style_dim, Rng& rng);

// p <- (1 - rate) * p + rate * mean(posteriors), renormalized. Posterior rows
// are per-sample skill posteriors over an unlabeled expert batch.
LatentPrior update_latent_prior(const LatentPrior& prior, const Matrix& posteriors);

// ---- scalar reward transforms (rollout side) ----

// max[0, 1 - 0.25 (score - 1)^2], bounded to [0, 1].
double imitation_reward(double score);

// log Q^c(c | o^I), floored at log(1e-6).
double ss_reward(const Vector& skill_posterior, int sampled_skill);

// Diagonal-Gaussian log density of the sampled style under the predictor
// head, floored at log(1e-6).
double us_reward(const Vector& style_mean, const Vector& style_logstd,
                 const Vector& sampled_style);

// Unclamped negative log density (the predictor loss) plus the clamped
// reward, for a single sample.
struct UsLossPair {
  double predictor_loss = 0.0;
  double reward = 0.0;
};
UsLossPair us_losses(const Vector& style_mean, const Vector& style_logstd,
                     const Vector& sampled_style);

// w_imitation * (r_d + r_ss + r_us) + w_task * r_task.
double total_reward(double r_d, double r_ss, double r_us, double r_task,
                    double w_imitation, double w_task);

// ---- taped losses (update side) ----

// mean((D_policy + 1)^2) + mean((D_expert - 1)^2); scores are column vectors
// of raw discriminator outputs.
Var lsgan_discriminator_loss(const Var& policy_scores, const Var& expert_scores);

// Cross-entropy of skill logits against ground-truth labels on labeled expert
// windows plus cross-entropy against the sampled skills on policy windows.
// Either side may be skipped by passing an empty index list alongside an
// unused Var (see overloads below).
Var ss_predictor_loss(const Var& labeled_logits, const std::vector<int>& labels,
                      const Var& policy_logits, const std::vector<int>& sampled_skills);

// Mean cross-entropy of one batch of logits against integer targets.
Var cross_entropy(const Var& logits, const std::vector<int>& targets);

// Negative mean diagonal-Gaussian log density of sampled styles under the
// predicted (mean, logstd) rows.
Var us_predictor_loss(const Var& style_mean, const Var& style_logstd,
                      const Matrix& sampled_styles);

// Mean posterior entropy over an unlabeled batch plus l2 * predictor
// parameter squared norm. The marginal-matching KL term vanishes because the
// sampling prior is set to the predictor's own marginal.
Var rim_loss(const Var& skill_logits, double l2_coefficient,
             std::optional<Var> predictor_squared_norm);

// Sum of the component losses with the minimization sign convention:
// L_GAIL + L_SS + L_US + L_RIM.
Var combined_discriminator_objective(const Var& lsgan, const Var& ss, const Var& us,
                                     const Var& rim);

// Squared norm of the named buffers, on the tape (for the RIM R term).
Var param_squared_norm(nn::Tape& tape, nn::ParamStore& store,
                       const std::vector<std::string>& names);

// Diagonal-Gaussian log density, scalar helper (no clamp).
double gaussian_log_density(const Vector& x, const Vector& mean, const Vector& logstd);

}  // namespace agil::ail
