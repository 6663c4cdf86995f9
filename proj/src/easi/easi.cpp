#include "agil/easi/easi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "agil/ail/losses.hpp"

namespace agil::easi {

void ParamDistribution::validate() const {
  const int n = size();
  require(n > 0, "ParamDistribution: empty");
  require(stds.size() == n && lo.size() == n && hi.size() == n,
          "ParamDistribution: inconsistent widths");
  const Vector floor = mutation_floor();
  for (int i = 0; i < n; ++i) {
    require(lo[i] < hi[i], "ParamDistribution: lo must be < hi");
    require(means[i] >= lo[i] && means[i] <= hi[i],
            "ParamDistribution: mean outside bounds");
    require(stds[i] >= floor[i] - 1e-12, "ParamDistribution: std below mutation floor");
  }
}

Vector ParamDistribution::mutation_floor() const {
  return mutation_floor_frac * (hi - lo);
}

void RealDataset::validate() const {
  require(transitions.rows() > 0, "RealDataset: empty");
  require(transitions.cols() == env::kSimTransitionDim,
          "RealDataset: wrong transition width");
}

TransitionDiscriminator::TransitionDiscriminator(Rng& rng, std::vector<int> hidden)
    : net([&]() {
        std::vector<int> widths;
        widths.push_back(env::kSimTransitionDim);
        for (int h : hidden) widths.push_back(h);
        widths.push_back(1);
        // final layer scaled down so untrained scores start near zero
        return nn::DenseNet(params, "easi_disc",
                            nn::DenseNetSpec{widths, nn::Activation::tanh, {}}, rng,
                            0.01);
      }()),
      feat_mean(Vector::Zero(env::kSimTransitionDim)),
      feat_std(Vector::Ones(env::kSimTransitionDim)) {}

void TransitionDiscriminator::fit_normalizer(const Matrix& reference) {
  require(reference.rows() > 1, "fit_normalizer: need at least 2 rows");
  feat_mean = reference.colwise().mean().transpose();
  Vector var = Vector::Zero(reference.cols());
  for (Eigen::Index r = 0; r < reference.rows(); ++r) {
    const Vector d = reference.row(r).transpose() - feat_mean;
    var += d.cwiseProduct(d);
  }
  var /= static_cast<double>(reference.rows());
  feat_std = (var.array().sqrt() + 1e-6).matrix();
}

Matrix TransitionDiscriminator::normalize(const Matrix& batch) const {
  Matrix out = batch;
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    out.row(r) = (out.row(r).transpose() - feat_mean).cwiseQuotient(feat_std).transpose();
  return out;
}

double TransitionDiscriminator::score(const Vector& transition) const {
  const Vector z = (transition - feat_mean).cwiseQuotient(feat_std);
  return net.infer(params, z)[0];
}

std::vector<Individual> sample_population(const ParamDistribution& dist, int n,
                                          Rng& rng) {
  require(n > 0, "sample_population: n must be positive");
  dist.validate();
  std::vector<Individual> pop(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    Individual& ind = pop[static_cast<std::size_t>(j)];
    ind.params = Vector(dist.size());
    for (int i = 0; i < dist.size(); ++i) {
      const double x = dist.means[i] + dist.stds[i] * rng.normal();
      ind.params[i] = std::min(dist.hi[i], std::max(dist.lo[i], x));
    }
  }
  return pop;
}

std::vector<Matrix> rollout_population(const std::vector<Individual>& population,
                                       int trajectory_len, double fixed_mass) {
  std::vector<Matrix> out;
  out.reserve(population.size());
  Rng unused(0);
  for (const Individual& ind : population) {
    const env::SimParams p = env::SimParams::from_searched(ind.params, fixed_mass);
    if (trajectory_len == 0) {
      out.emplace_back(0, env::kSimTransitionDim);
      continue;
    }
    out.push_back(env::rollout_transitions(p, trajectory_len, 0.0, unused));
  }
  return out;
}

DiscriminatorUpdateResult update_easi_discriminator(
    TransitionDiscriminator& disc, nn::OptimizerState& opt, const Matrix& real_batch,
    const Matrix& sim_batch, int epochs, int minibatch, Rng& rng) {
  require(real_batch.rows() > 0 && sim_batch.rows() > 0,
          "update_easi_discriminator: empty batch");
  require(real_batch.cols() == sim_batch.cols() &&
              real_batch.cols() == env::kSimTransitionDim,
          "update_easi_discriminator: feature width mismatch");
  DiscriminatorUpdateResult res;
  if (epochs == 0) return res;

  const Matrix real_n = disc.normalize(real_batch);
  const Matrix sim_n = disc.normalize(sim_batch);
  const int steps_per_epoch = std::max<Eigen::Index>(
      1, (sim_n.rows() + minibatch - 1) / minibatch);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (int s = 0; s < steps_per_epoch; ++s) {
      const int bs = std::min<int>(minibatch, static_cast<int>(sim_n.rows()));
      const int br = std::min<int>(minibatch, static_cast<int>(real_n.rows()));
      Matrix xs(bs, sim_n.cols()), xr(br, real_n.cols());
      for (int i = 0; i < bs; ++i)
        xs.row(i) = sim_n.row(rng.randint(static_cast<int>(sim_n.rows())));
      for (int i = 0; i < br; ++i)
        xr.row(i) = real_n.row(rng.randint(static_cast<int>(real_n.rows())));
      nn::Tape t;
      nn::Var sim_scores = disc.net.forward(t, disc.params, t.constant(xs));
      nn::Var real_scores = disc.net.forward(t, disc.params, t.constant(xr));
      nn::Var loss = ail::lsgan_discriminator_loss(sim_scores, real_scores);
      res.final_loss = loss.scalar();
      t.backward(loss);
      nn::rmsprop_step(opt, disc.params);
      res.steps += 1;
    }
  }
  return res;
}

double fitness(const Matrix& individual_transitions, const TransitionDiscriminator& disc) {
  require(individual_transitions.rows() > 0, "fitness: empty transitions");
  double total = 0.0;
  for (Eigen::Index r = 0; r < individual_transitions.rows(); ++r)
    total += ail::imitation_reward(disc.score(individual_transitions.row(r).transpose()));
  return total / static_cast<double>(individual_transitions.rows());
}

ParamDistribution es_refit(const std::vector<Individual>& population,
                           const ParamDistribution& dist, double survival_rate) {
  require(population.size() >= 2, "es_refit: population too small");
  std::vector<int> order(population.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return population[static_cast<std::size_t>(a)].fitness >
           population[static_cast<std::size_t>(b)].fitness;
  });
  const int survivors =
      std::max(1, static_cast<int>(std::floor(survival_rate * population.size())));

  ParamDistribution next = dist;
  Vector mean = Vector::Zero(dist.size());
  for (int s = 0; s < survivors; ++s)
    mean += population[static_cast<std::size_t>(order[static_cast<std::size_t>(s)])].params;
  mean /= survivors;
  Vector var = Vector::Zero(dist.size());
  for (int s = 0; s < survivors; ++s) {
    const Vector d =
        population[static_cast<std::size_t>(order[static_cast<std::size_t>(s)])].params - mean;
    var += d.cwiseProduct(d);
  }
  var /= survivors;

  const Vector floor = dist.mutation_floor();
  for (int i = 0; i < dist.size(); ++i) {
    next.means[i] = std::min(dist.hi[i], std::max(dist.lo[i], mean[i]));
    next.stds[i] = std::max(floor[i], std::sqrt(var[i]));
  }
  next.validate();
  return next;
}

EasiResult run_easi(const EasiConfig& cfg, const ParamDistribution& init,
                    const RealDataset& real,
                    const std::function<void(const GenerationRecord&)>& on_generation) {
  init.validate();
  real.validate();
  Rng rng(cfg.seed);
  Rng disc_init = rng.split(1);
  TransitionDiscriminator disc(disc_init);
  disc.fit_normalizer(real.transitions);
  nn::OptimizerState opt = nn::make_rmsprop(cfg.disc_lr);

  EasiResult result;
  result.final_dist = init;

  Rng sample_rng = rng.split(2);
  Rng disc_rng = rng.split(3);
  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::vector<Individual> pop =
        sample_population(result.final_dist, cfg.population, sample_rng);
    std::vector<Matrix> rollouts =
        rollout_population(pop, cfg.trajectory_len, cfg.fixed_mass);

    // subsample the generation's simulated transitions for the update
    const int total = cfg.population * cfg.trajectory_len;
    const int take = std::min(cfg.sim_batch_per_gen, total);
    Matrix sim_batch(take, env::kSimTransitionDim);
    for (int i = 0; i < take; ++i) {
      const int ind = disc_rng.randint(cfg.population);
      const int row = disc_rng.randint(cfg.trajectory_len);
      sim_batch.row(i) = rollouts[static_cast<std::size_t>(ind)].row(row);
    }
    const auto upd = update_easi_discriminator(disc, opt, real.transitions, sim_batch,
                                               cfg.disc_epochs, cfg.disc_minibatch,
                                               disc_rng);

    GenerationRecord rec;
    rec.generation = gen;
    rec.disc_loss = upd.final_loss;
    rec.best_fitness = -1.0;
    double fit_sum = 0.0;
    for (int j = 0; j < cfg.population; ++j) {
      pop[static_cast<std::size_t>(j)].fitness =
          fitness(rollouts[static_cast<std::size_t>(j)], disc);
      fit_sum += pop[static_cast<std::size_t>(j)].fitness;
      rec.best_fitness = std::max(rec.best_fitness, pop[static_cast<std::size_t>(j)].fitness);
    }
    rec.mean_fitness = fit_sum / cfg.population;

    result.final_dist = es_refit(pop, result.final_dist, cfg.survival_rate);
    rec.means = result.final_dist.means;
    rec.stds = result.final_dist.stds;
    result.trace.push_back(rec);
    if (on_generation) on_generation(rec);
  }
  return result;
}

ParamDistribution default_search_space() {
  ParamDistribution d;
  const int n = 2 * env::kSimJoints + 1;
  d.means = Vector(n);
  d.stds = Vector(n);
  d.lo = Vector(n);
  d.hi = Vector(n);
  for (int j = 0; j < env::kSimJoints; ++j) {
    d.lo[j] = 5.0;
    d.hi[j] = 80.0;  // kp
    d.lo[env::kSimJoints + j] = 0.2;
    d.hi[env::kSimJoints + j] = 4.0;  // kd
  }
  d.lo[n - 1] = 0.05;
  d.hi[n - 1] = 1.5;  // friction
  d.means = 0.5 * (d.lo + d.hi);
  // one eighth of the box per std: mean +- 2 std leaves room inside the
  // bounds for the out-of-distribution case
  d.stds = 0.125 * (d.hi - d.lo);
  return d;
}

Vector draw_hidden_params(const ParamDistribution& init, bool out_of_distribution,
                          Rng& rng) {
  init.validate();
  Vector hidden(init.size());
  for (int i = 0; i < init.size(); ++i) {
    if (!out_of_distribution) {
      hidden[i] = init.means[i] + init.stds[i] * rng.uniform(-1.0, 1.0);
    } else {
      // outside mean +- 2 std but inside the bounds
      const double side = rng.uniform01() < 0.5 ? -1.0 : 1.0;
      double lo = init.means[i] + side * 2.0 * init.stds[i];
      double hi = side > 0 ? init.hi[i] : init.lo[i];
      if ((side > 0 && lo >= hi) || (side < 0 && lo <= hi)) {
        // no room on that side; use the other one
        lo = init.means[i] - side * 2.0 * init.stds[i];
        hi = side > 0 ? init.lo[i] : init.hi[i];
      }
      hidden[i] = lo + (hi - lo) * rng.uniform01();
    }
    hidden[i] = std::min(init.hi[i], std::max(init.lo[i], hidden[i]));
  }
  return hidden;
}

RealDataset make_real_dataset(const Vector& hidden_searched, const EasiConfig& cfg) {
  RealDataset real;
  Rng rng(cfg.seed + 0x5ea1);
  const env::SimParams p = env::SimParams::from_searched(hidden_searched, cfg.fixed_mass);
  real.transitions = env::rollout_transitions(p, cfg.real_transitions, cfg.obs_noise, rng);
  return real;
}

}  // namespace agil::easi
