#include "agil/ail/losses.hpp"

#include <cmath>

namespace agil::ail {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
}

void LatentSample::validate() const {
  require(skill >= 0 && skill < kSkillCount, "LatentSample: skill out of range");
  for (Eigen::Index i = 0; i < style.size(); ++i)
    require(style[i] >= -1.0 && style[i] <= 1.0,
            "LatentSample: style component outside [-1, 1]");
}

void LatentPrior::validate() const {
  require(probabilities.size() == kSkillCount, "LatentPrior: wrong width");
  double s = 0.0;
  for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
    require(probabilities[i] >= 0.0, "LatentPrior: negative probability");
    s += probabilities[i];
  }
  require(std::abs(s - 1.0) < 1e-9, "LatentPrior: probabilities must sum to 1");
}

LatentSample sample_latent(const LatentPrior& prior, int style_dim, Rng& rng) {
  prior.validate();
  LatentSample s;
  double u = rng.uniform01();
  s.skill = kSkillCount - 1;
  for (int k = 0; k < kSkillCount; ++k) {
    if (u < prior.probabilities[k]) {
      s.skill = k;
      break;
    }
    u -= prior.probabilities[k];
  }
  s.style = Vector(style_dim);
  for (int i = 0; i < style_dim; ++i) s.style[i] = rng.uniform(-1.0, 1.0);
  return s;
}

LatentPrior update_latent_prior(const LatentPrior& prior, const Matrix& posteriors) {
  prior.validate();
  require(posteriors.rows() > 0 && posteriors.cols() == kSkillCount,
          "update_latent_prior: posterior batch must be N x 5");
  Vector mean_post = posteriors.colwise().mean().transpose();
  Vector p = (1.0 - prior.ema_rate) * prior.probabilities + prior.ema_rate * mean_post;
  p /= p.sum();
  LatentPrior out;
  out.probabilities = p;
  out.ema_rate = prior.ema_rate;
  out.validate();
  return out;
}

double imitation_reward(double score) {
  const double d = score - 1.0;
  return std::max(0.0, 1.0 - 0.25 * d * d);
}

double ss_reward(const Vector& skill_posterior, int sampled_skill) {
  require(sampled_skill >= 0 && sampled_skill < skill_posterior.size(),
          "ss_reward: skill index out of range");
  const double q = skill_posterior[sampled_skill];
  if (q <= 1e-6) return kLogProbFloor;
  return std::log(q);
}

double gaussian_log_density(const Vector& x, const Vector& mean, const Vector& logstd) {
  require(x.size() == mean.size() && x.size() == logstd.size(),
          "gaussian_log_density: size mismatch");
  double lp = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double z = (x[i] - mean[i]) * std::exp(-logstd[i]);
    lp += -0.5 * kLog2Pi - logstd[i] - 0.5 * z * z;
  }
  return lp;
}

double us_reward(const Vector& style_mean, const Vector& style_logstd,
                 const Vector& sampled_style) {
  return std::max(kLogProbFloor,
                  gaussian_log_density(sampled_style, style_mean, style_logstd));
}

UsLossPair us_losses(const Vector& style_mean, const Vector& style_logstd,
                     const Vector& sampled_style) {
  const double lp = gaussian_log_density(sampled_style, style_mean, style_logstd);
  return UsLossPair{-lp, std::max(kLogProbFloor, lp)};
}

double total_reward(double r_d, double r_ss, double r_us, double r_task,
                    double w_imitation, double w_task) {
  return w_imitation * (r_d + r_ss + r_us) + w_task * r_task;
}

Var lsgan_discriminator_loss(const Var& policy_scores, const Var& expert_scores) {
  require(policy_scores.val().size() > 0 && expert_scores.val().size() > 0,
          "lsgan_discriminator_loss: empty batch");
  Var pol = mean(square(add_scalar(policy_scores, 1.0)));
  Var exp = mean(square(add_scalar(expert_scores, -1.0)));
  return add(pol, exp);
}

Var cross_entropy(const Var& logits, const std::vector<int>& targets) {
  require(!targets.empty(), "cross_entropy: empty batch");
  require(static_cast<Eigen::Index>(targets.size()) == logits.val().rows(),
          "cross_entropy: one target per row required");
  for (int y : targets)
    require(y >= 0 && y < logits.val().cols(), "cross_entropy: target out of range");
  Var lsm = log_softmax_rows(logits);
  return neg(mean(gather_cols(lsm, targets)));
}

Var ss_predictor_loss(const Var& labeled_logits, const std::vector<int>& labels,
                      const Var& policy_logits, const std::vector<int>& sampled_skills) {
  return add(cross_entropy(labeled_logits, labels),
             cross_entropy(policy_logits, sampled_skills));
}

Var us_predictor_loss(const Var& style_mean, const Var& style_logstd,
                      const Matrix& sampled_styles) {
  require(sampled_styles.rows() == style_mean.val().rows() &&
              sampled_styles.cols() == style_mean.val().cols(),
          "us_predictor_loss: style batch shape mismatch");
  nn::Tape& t = *style_mean.tape;
  Var x = t.constant(sampled_styles);
  Var z = mul(sub(x, style_mean), vexp(neg(style_logstd)));
  // per-element negative log density, summed over style dims, averaged over batch
  Var per_elem = add_scalar(add(style_logstd, scale(square(z), 0.5)), 0.5 * kLog2Pi);
  return mean(row_sum(per_elem));
}

Var rim_loss(const Var& skill_logits, double l2_coefficient,
             std::optional<Var> predictor_squared_norm) {
  Var p = softmax_rows(skill_logits);
  Var logp = log_softmax_rows(skill_logits);
  Var entropy_per_row = neg(row_sum(mul(p, logp)));
  Var loss = mean(entropy_per_row);
  if (l2_coefficient != 0.0) {
    require(predictor_squared_norm.has_value(),
            "rim_loss: l2 term requires the predictor squared norm");
    loss = add(loss, scale(*predictor_squared_norm, l2_coefficient));
  }
  return loss;
}

Var combined_discriminator_objective(const Var& lsgan, const Var& ss, const Var& us,
                                     const Var& rim) {
  return add(add(lsgan, ss), add(us, rim));
}

Var param_squared_norm(nn::Tape& tape, nn::ParamStore& store,
                       const std::vector<std::string>& names) {
  require(!names.empty(), "param_squared_norm: no buffers named");
  Var total = tape.constant(Matrix::Zero(1, 1));
  for (const auto& name : names) {
    Var p = tape.param(store[name]);
    total = add(total, sum(square(p)));
  }
  return total;
}

}  // namespace agil::ail
