#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "agil/env/paramsim.hpp"
#include "agil/nn/dense.hpp"
#include "agil/nn/optim.hpp"

namespace agil::easi {

using nn::Matrix;
using nn::Vector;

// Per-parameter Gaussian search state with box bounds. Stds never drop below
// the mutation floor (a fraction of each bound width).
struct ParamDistribution {
  Vector means;
  Vector stds;
  Vector lo;
  Vector hi;
  double mutation_floor_frac = 0.01;

  void validate() const;
  Vector mutation_floor() const;
  int size() const { return static_cast<int>(means.size()); }
};

struct Individual {
  Vector params;
  double fitness = 0.0;
};

// Recorded (o_t, a_t, o_t+1) triplets standing in for real-world data.
struct RealDataset {
  Matrix transitions;  // rows of width env::kSimTransitionDim

  void validate() const;
};

// Transition discriminator with feature normalization fitted on the real
// dataset once.
struct TransitionDiscriminator {
  nn::ParamStore params;
  nn::DenseNet net;
  Vector feat_mean;
  Vector feat_std;

  explicit TransitionDiscriminator(Rng& rng,
                                   std::vector<int> hidden = {64, 64});
  void fit_normalizer(const Matrix& reference);
  double score(const Vector& transition) const;
  Matrix normalize(const Matrix& batch) const;
};

std::vector<Individual> sample_population(const ParamDistribution& dist, int n,
                                          Rng& rng);

// Rolls each individual's simulator instance for T steps under the shared
// deterministic excitation controller.
std::vector<Matrix> rollout_population(const std::vector<Individual>& population,
                                       int trajectory_len, double fixed_mass);

// LSGAN update over (o, a, o') triplets for the stated epochs; sim labeled
// -1, real labeled +1. RMSprop, warm-started across generations.
struct DiscriminatorUpdateResult {
  double final_loss = 0.0;
  int steps = 0;
};
DiscriminatorUpdateResult update_easi_discriminator(
    TransitionDiscriminator& disc, nn::OptimizerState& opt, const Matrix& real_batch,
    const Matrix& sim_batch, int epochs, int minibatch, Rng& rng);

// Mean of max[0, 1 - 0.25 (score - 1)^2] over the individual's transitions.
double fitness(const Matrix& individual_transitions,
               const TransitionDiscriminator& disc);

// Truncation selection (top half by fitness, ties broken by lower index),
// Gaussian refit from survivor sample statistics, std floored, means clipped
// to bounds.
ParamDistribution es_refit(const std::vector<Individual>& population,
                           const ParamDistribution& dist, double survival_rate = 0.5);

struct EasiConfig {
  int generations = 150;
  int population = 64;
  int trajectory_len = 500;
  int disc_epochs = 10;
  int disc_minibatch = 256;
  int sim_batch_per_gen = 8192;  // transitions subsampled for the update
  double disc_lr = 3e-4;
  double survival_rate = 0.5;
  double obs_noise = 0.01;
  int real_transitions = 4000;
  double fixed_mass = 1.0;
  std::uint64_t seed = 1;
};

struct GenerationRecord {
  int generation = 0;
  Vector means;
  Vector stds;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  double disc_loss = 0.0;
};

struct EasiResult {
  ParamDistribution final_dist;
  std::vector<GenerationRecord> trace;
};

// Full loop of sample -> rollout -> discriminator epochs -> fitness -> refit.
// `on_generation`, when set, observes each record as it is produced.
EasiResult run_easi(const EasiConfig& config, const ParamDistribution& init,
                    const RealDataset& real,
                    const std::function<void(const GenerationRecord&)>& on_generation = {});

// Default search box for the joint-chain parameters [kp x3, kd x3, friction].
ParamDistribution default_search_space();

// Hidden ground-truth draw for sim-to-sim runs. WD draws within one initial
// std of the mean; OOD draws outside two stds but inside the bounds.
Vector draw_hidden_params(const ParamDistribution& init, bool out_of_distribution,
                          Rng& rng);

RealDataset make_real_dataset(const Vector& hidden_searched, const EasiConfig& config);

}  // namespace agil::easi
