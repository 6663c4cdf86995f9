#include "agil/rl/core.hpp"

#include <cmath>

namespace agil::rl {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

void RolloutBuffer::validate() const {
  require(!envs.empty(), "RolloutBuffer: no environments");
  require(bootstrap_values.size() == envs.size(),
          "RolloutBuffer: one bootstrap value per environment required");
  const std::size_t t = envs.front().size();
  for (const auto& seq : envs)
    require(seq.size() == t, "RolloutBuffer: sequences must have equal length");
}

int RolloutBuffer::total_steps() const {
  int n = 0;
  for (const auto& seq : envs) n += static_cast<int>(seq.size());
  return n;
}

std::pair<std::vector<double>, std::vector<double>> compute_gae(
    const std::vector<double>& rewards, const std::vector<double>& values,
    const std::vector<bool>& dones, double gamma, double lambda,
    double bootstrap_value) {
  const std::size_t t_len = rewards.size();
  require(values.size() == t_len && dones.size() == t_len,
          "compute_gae: length mismatch");
  std::vector<double> advantages(t_len, 0.0), targets(t_len, 0.0);
  double next_value = bootstrap_value;
  double next_advantage = 0.0;
  for (std::size_t i = t_len; i-- > 0;) {
    const double not_done = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * not_done - values[i];
    next_advantage = delta + gamma * lambda * not_done * next_advantage;
    advantages[i] = next_advantage;
    targets[i] = advantages[i] + values[i];
    next_value = values[i];
  }
  return {advantages, targets};
}

double ppo_loss(double log_prob_new, double log_prob_old, double advantage,
                double clip) {
  const double rho = std::exp(log_prob_new - log_prob_old);
  const double clipped = std::min(std::max(rho, 1.0 - clip), 1.0 + clip);
  return -std::min(rho * advantage, clipped * advantage);
}

Var ppo_loss_batch(const Var& log_prob_new, const Vector& log_prob_old,
                   const Vector& advantages, double clip) {
  nn::Tape& t = *log_prob_new.tape;
  require(log_prob_new.cols() == 1, "ppo_loss_batch: log probs must be a column");
  require(log_prob_new.rows() == static_cast<int>(log_prob_old.size()) &&
              log_prob_new.rows() == static_cast<int>(advantages.size()),
          "ppo_loss_batch: batch size mismatch");
  Var old = t.constant(log_prob_old);
  Var adv = t.constant(advantages);
  Var rho = vexp(sub(log_prob_new, old));
  Var unclipped = mul(rho, adv);
  Var clipped = mul(clamp(rho, 1.0 - clip, 1.0 + clip), adv);
  return neg(mean(cwise_min(unclipped, clipped)));
}

void normalize_advantages(std::vector<double>& advantages) {
  if (advantages.empty()) return;
  double m = 0.0;
  for (double a : advantages) m += a;
  m /= static_cast<double>(advantages.size());
  double var = 0.0;
  for (double a : advantages) var += (a - m) * (a - m);
  var /= static_cast<double>(advantages.size());
  const double denom = std::sqrt(var) + 1e-8;
  for (double& a : advantages) a = (a - m) / denom;
}

Var gaussian_log_prob_batch(const Var& means, const Var& logstd_row,
                            const Matrix& actions) {
  nn::Tape& t = *means.tape;
  require(actions.rows() == means.val().rows() && actions.cols() == means.val().cols(),
          "gaussian_log_prob_batch: action batch shape mismatch");
  Var ls = logstd_row;
  if (ls.rows() == 1 && means.rows() > 1) {
    // broadcast the 1 x dim row over the batch
    Var ones = t.constant(Matrix::Ones(means.rows(), 1));
    ls = matmul(ones, ls);
  }
  Var x = t.constant(actions);
  Var z = mul(sub(x, means), vexp(neg(ls)));
  Var per_elem = add_scalar(add(ls, scale(square(z), 0.5)), 0.5 * kLog2Pi);
  return neg(row_sum(per_elem));
}

double gaussian_entropy(const Vector& logstd) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < logstd.size(); ++i)
    h += logstd[i] + 0.5 * (kLog2Pi + 1.0);
  return h;
}

Vector mode_distribution(const Vector& mode_logits) {
  const double m = mode_logits.maxCoeff();
  Vector p = (mode_logits.array() - m).exp();
  p /= p.sum();
  return p;
}

double hybrid_log_prob(const HybridPolicyOutput& out, const HybridAction& action) {
  const int k = action.mode;
  require(k >= 0 && k < out.mode_logits.size(), "hybrid_log_prob: invalid mode");
  require(action.continuous.size() == out.per_mode_means.cols(),
          "hybrid_log_prob: command width mismatch");
  const double m = out.mode_logits.maxCoeff();
  const double lse =
      m + std::log((out.mode_logits.array() - m).exp().sum());
  double lp = out.mode_logits[k] - lse;
  for (Eigen::Index c = 0; c < action.continuous.size(); ++c) {
    const double ls = out.per_mode_logstds(k, c);
    const double z = (action.continuous[c] - out.per_mode_means(k, c)) * std::exp(-ls);
    lp += -0.5 * kLog2Pi - ls - 0.5 * z * z;
  }
  return lp;
}

HybridAction sample_hybrid(const HybridPolicyOutput& out, Rng& rng) {
  Vector p = mode_distribution(out.mode_logits);
  double u = rng.uniform01();
  int k = static_cast<int>(p.size()) - 1;
  for (int i = 0; i < p.size(); ++i) {
    if (u < p[i]) {
      k = i;
      break;
    }
    u -= p[i];
  }
  HybridAction a;
  a.mode = k;
  a.continuous = Vector(out.per_mode_means.cols());
  for (Eigen::Index c = 0; c < a.continuous.size(); ++c)
    a.continuous[c] =
        out.per_mode_means(k, c) + std::exp(out.per_mode_logstds(k, c)) * rng.normal();
  return a;
}

Var hybrid_log_prob_batch(const Var& mode_logits, const Var& means,
                          const Var& logstds, int num_modes, int command_dim,
                          const std::vector<HybridAction>& actions) {
  nn::Tape& t = *mode_logits.tape;
  const int batch = mode_logits.rows();
  require(static_cast<int>(actions.size()) == batch,
          "hybrid_log_prob_batch: one action per row required");
  require(mode_logits.cols() == num_modes, "hybrid_log_prob_batch: logit width");
  require(means.cols() == num_modes * command_dim,
          "hybrid_log_prob_batch: command table width");

  std::vector<int> modes(actions.size());
  Matrix selected(batch, command_dim);
  for (int i = 0; i < batch; ++i) {
    modes[static_cast<std::size_t>(i)] = actions[static_cast<std::size_t>(i)].mode;
    selected.row(i) = actions[static_cast<std::size_t>(i)].continuous.transpose();
  }
  Var lp = gather_cols(log_softmax_rows(mode_logits), modes);

  Var x = t.constant(selected);
  for (int c = 0; c < command_dim; ++c) {
    std::vector<int> idx(actions.size());
    for (std::size_t i = 0; i < actions.size(); ++i)
      idx[i] = actions[i].mode * command_dim + c;
    Var mu = gather_cols(means, idx);
    Var ls = gather_cols(logstds, idx);
    Var xc = slice_cols(x, c, 1);
    Var z = mul(sub(xc, mu), vexp(neg(ls)));
    Var nll = add_scalar(add(ls, scale(square(z), 0.5)), 0.5 * kLog2Pi);
    lp = sub(lp, nll);
  }
  return lp;
}

Var categorical_entropy_mean(const Var& logits) {
  Var p = softmax_rows(logits);
  Var logp = log_softmax_rows(logits);
  return neg(mean(row_sum(mul(p, logp))));
}

}  // namespace agil::rl
