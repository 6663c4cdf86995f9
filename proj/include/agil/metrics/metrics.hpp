#pragma once

#include <filesystem>
#include <vector>

#include "agil/env/expert.hpp"
#include "agil/nn/dense.hpp"

namespace agil::metrics {

using nn::Matrix;
using nn::Vector;

// Latent x class count table for clustering metrics.
struct ContingencyTable {
  Eigen::MatrixXi counts;

  void validate() const;
  double total() const { return static_cast<double>(counts.sum()); }
  static ContingencyTable from_assignments(const std::vector<int>& latents,
                                           const std::vector<int>& classes,
                                           int n_latent, int n_class);
};

// NMI = 2 I(A;B) / (H(A) + H(B)) with natural-log entropies; returns 1 when
// both marginal entropies are zero.
double compute_nmi(const ContingencyTable& table);

// Mean of the two size-weighted conditional entropies H(class | latent) and
// H(latent | class), natural log. Zero iff each latent maps to one class and
// vice versa.
double compute_ent(const ContingencyTable& table);

struct TrackingStats {
  double mean_abs_error = 0.0;
  double max_error = 0.0;
};

// Elementwise statistics after dropping the first `settle` steps.
TrackingStats tracking_error_stats(const std::vector<double>& command,
                                   const std::vector<double>& realized,
                                   int settle = 25);

// Dense classifier over transition windows, gated at 99% held-out accuracy
// before it may back any metric.
class ReferenceClassifier {
 public:
  ReferenceClassifier();

  // Trains on the dataset's labeled windows (rebalanced by duplication) and
  // verifies the accuracy gate on the held-out windows using the generator's
  // ground truth. Throws if the gate cannot be met within the budget.
  void train(const env::DemoDataset& data, std::uint64_t seed, int epochs = 1200,
             double gate = 0.99);

  int classify(const Vector& window) const;
  Vector posterior(const Vector& window) const;
  double gate_accuracy() const { return gate_accuracy_; }
  bool trained() const { return trained_; }

  const nn::ParamStore& params() const { return params_; }
  nn::ParamStore& params() { return params_; }
  const nn::DenseNet& net() const { return net_; }

 private:
  nn::ParamStore params_;
  nn::DenseNet net_;
  double gate_accuracy_ = 0.0;
  bool trained_ = false;
};

// CSV rows (skill, style..., window features) for external embedding tools.
void export_embeddings(const std::filesystem::path& path,
                       const std::vector<int>& skills,
                       const std::vector<Vector>& styles,
                       const std::vector<Vector>& windows);

}  // namespace agil::metrics
