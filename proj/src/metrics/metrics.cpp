#include "agil/metrics/metrics.hpp"

#include <cmath>
#include <fstream>

#include "agil/ail/losses.hpp"
#include "agil/nn/optim.hpp"

namespace agil::metrics {

void ContingencyTable::validate() const {
  require(counts.rows() > 0 && counts.cols() > 0, "ContingencyTable: empty");
  require(counts.minCoeff() >= 0, "ContingencyTable: negative count");
  require(counts.sum() > 0, "ContingencyTable: all-zero table");
}

ContingencyTable ContingencyTable::from_assignments(const std::vector<int>& latents,
                                                    const std::vector<int>& classes,
                                                    int n_latent, int n_class) {
  require(latents.size() == classes.size(),
          "ContingencyTable: assignment length mismatch");
  ContingencyTable t;
  t.counts = Eigen::MatrixXi::Zero(n_latent, n_class);
  for (std::size_t i = 0; i < latents.size(); ++i) {
    require(latents[i] >= 0 && latents[i] < n_latent, "ContingencyTable: bad latent");
    require(classes[i] >= 0 && classes[i] < n_class, "ContingencyTable: bad class");
    t.counts(latents[i], classes[i]) += 1;
  }
  return t;
}

namespace {
double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }
}

double compute_nmi(const ContingencyTable& table) {
  table.validate();
  const double n = table.total();
  const Eigen::MatrixXi& c = table.counts;
  double h_a = 0.0, h_b = 0.0, h_ab = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) h_a -= xlogx(c.row(i).sum() / n);
  for (Eigen::Index j = 0; j < c.cols(); ++j) h_b -= xlogx(c.col(j).sum() / n);
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j) h_ab -= xlogx(c(i, j) / n);
  const double mi = h_a + h_b - h_ab;
  if (h_a + h_b == 0.0) return 1.0;  // single cluster on both sides
  return 2.0 * mi / (h_a + h_b);
}

double compute_ent(const ContingencyTable& table) {
  table.validate();
  const double n = table.total();
  const Eigen::MatrixXi& c = table.counts;
  double h_class_given_latent = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const double row = c.row(i).sum();
    if (row == 0.0) continue;
    double h = 0.0;
    for (Eigen::Index j = 0; j < c.cols(); ++j) h -= xlogx(c(i, j) / row);
    h_class_given_latent += (row / n) * h;
  }
  double h_latent_given_class = 0.0;
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    const double col = c.col(j).sum();
    if (col == 0.0) continue;
    double h = 0.0;
    for (Eigen::Index i = 0; i < c.rows(); ++i) h -= xlogx(c(i, j) / col);
    h_latent_given_class += (col / n) * h;
  }
  return 0.5 * (h_class_given_latent + h_latent_given_class);
}

TrackingStats tracking_error_stats(const std::vector<double>& command,
                                   const std::vector<double>& realized, int settle) {
  require(command.size() == realized.size(), "tracking_error_stats: length mismatch");
  require(static_cast<int>(command.size()) > settle,
          "tracking_error_stats: trace shorter than the settling window");
  TrackingStats s;
  int n = 0;
  for (std::size_t i = static_cast<std::size_t>(settle); i < command.size(); ++i, ++n) {
    const double e = std::abs(command[i] - realized[i]);
    s.mean_abs_error += e;
    s.max_error = std::max(s.max_error, e);
  }
  s.mean_abs_error /= n;
  return s;
}

ReferenceClassifier::ReferenceClassifier()
    : net_([this]() {
        Rng init(0);
        return nn::DenseNet(params_, "refclf",
                            nn::DenseNetSpec{{env::kWindowH * env::kGaitFeatureDim, 32,
                                              16, env::kModes},
                                             nn::Activation::tanh,
                                             {}},
                            init);
      }()) {}

void ReferenceClassifier::train(const env::DemoDataset& data, std::uint64_t seed,
                                int epochs, double gate) {
  require(!data.true_modes.empty(),
          "ReferenceClassifier::train: dataset lacks ground truth for the gate");
  Rng rng(seed);
  // re-initialize deterministically under the caller's seed
  params_ = nn::ParamStore();
  net_ = nn::DenseNet(params_, "refclf",
                      nn::DenseNetSpec{{env::kWindowH * env::kGaitFeatureDim, 32, 16,
                                        env::kModes},
                                       nn::Activation::tanh,
                                       {}},
                      rng);

  const std::vector<int> pool = data.balanced_labeled_pool();
  require(!pool.empty(), "ReferenceClassifier::train: no labeled windows");
  nn::OptimizerState opt = nn::make_adam(3e-3);
  const int batch = std::min<int>(64, static_cast<int>(pool.size()));

  for (int epoch = 0; epoch < epochs; ++epoch) {
    Matrix x(batch, env::kWindowH * env::kGaitFeatureDim);
    std::vector<int> y(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
      const int idx = pool[static_cast<std::size_t>(rng.randint(static_cast<int>(pool.size())))];
      x.row(b) = data.windows[static_cast<std::size_t>(idx)].transpose();
      y[static_cast<std::size_t>(b)] = data.labels[static_cast<std::size_t>(idx)];
    }
    nn::Tape t;
    nn::Var logits = net_.forward(t, params_, t.constant(x));
    t.backward(ail::cross_entropy(logits, y));
    nn::adam_step(opt, params_);
  }

  // gate on held-out (unlabeled) windows against generator ground truth
  int correct = 0, total = 0;
  for (int i = 0; i < data.count(); ++i) {
    if (data.labels[static_cast<std::size_t>(i)] >= 0) continue;
    ++total;
    if (classify(data.windows[static_cast<std::size_t>(i)]) ==
        data.true_modes[static_cast<std::size_t>(i)])
      ++correct;
  }
  require(total > 0, "ReferenceClassifier::train: no held-out windows");
  gate_accuracy_ = static_cast<double>(correct) / static_cast<double>(total);
  trained_ = true;
  if (gate_accuracy_ < gate)
    throw NumericError("ReferenceClassifier: accuracy gate unmet (" +
                       std::to_string(gate_accuracy_) + " < " + std::to_string(gate) +
                       "); metrics would be meaningless");
}

int ReferenceClassifier::classify(const Vector& window) const {
  const Vector logits = net_.infer(params_, window);
  int best = 0;
  for (int k = 1; k < logits.size(); ++k)
    if (logits[k] > logits[best]) best = k;
  return best;
}

Vector ReferenceClassifier::posterior(const Vector& window) const {
  const Vector logits = net_.infer(params_, window);
  const double m = logits.maxCoeff();
  Vector p = (logits.array() - m).exp();
  p /= p.sum();
  return p;
}

void export_embeddings(const std::filesystem::path& path,
                       const std::vector<int>& skills,
                       const std::vector<Vector>& styles,
                       const std::vector<Vector>& windows) {
  require(skills.size() == windows.size() && styles.size() == windows.size(),
          "export_embeddings: column length mismatch");
  std::ofstream os(path);
  require(os.good(), "export_embeddings: cannot open " + path.string());
  os.precision(17);
  os << "skill";
  if (!styles.empty())
    for (int i = 0; i < styles.front().size(); ++i) os << ",style" << i;
  if (!windows.empty())
    for (int i = 0; i < windows.front().size(); ++i) os << ",f" << i;
  os << "\n";
  for (std::size_t r = 0; r < windows.size(); ++r) {
    os << skills[r];
    for (int i = 0; i < styles[r].size(); ++i) os << "," << styles[r][i];
    for (int i = 0; i < windows[r].size(); ++i) os << "," << windows[r][i];
    os << "\n";
  }
}

}  // namespace agil::metrics
