#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "agil/ail/losses.hpp"
#include "agil/nn/dense.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace agil;
using namespace agil::ail;
using nn::Matrix;
using nn::Tape;
using nn::Var;
using nn::Vector;

namespace {
constexpr double kLn2Pi = 1.8378770664093453;

Var col(Tape& t, std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  int i = 0;
  for (double x : xs) m(i++, 0) = x;
  return t.constant(m);
}
}  // namespace

TEST_CASE("lsgan loss: closed-form examples") {
  Tape t;
  CHECK(lsgan_discriminator_loss(col(t, {0.0}), col(t, {0.0})).scalar() == 2.0);
  CHECK(lsgan_discriminator_loss(col(t, {-1.0}), col(t, {1.0})).scalar() == 0.0);
  CHECK(lsgan_discriminator_loss(col(t, {-0.5}), col(t, {0.5})).scalar() == 0.5);
  Matrix empty(0, 1);
  CHECK_THROWS_AS(lsgan_discriminator_loss(t.constant(empty), col(t, {0.0})),
                  ContractViolation);
}

TEST_CASE("lsgan loss: duplicating the batch leaves the mean unchanged") {
  Tape t;
  // dyadic values keep every intermediate exact, so equality is exact
  Matrix pol(3, 1), exp(2, 1);
  pol << 0.25, -0.5, 0.75;
  exp << 0.5, -0.25;
  Matrix pol2(6, 1), exp2(4, 1);
  pol2 << pol, pol;
  exp2 << exp, exp;
  const double a = lsgan_discriminator_loss(t.constant(pol), t.constant(exp)).scalar();
  const double b = lsgan_discriminator_loss(t.constant(pol2), t.constant(exp2)).scalar();
  CHECK(a == b);
}

TEST_CASE("imitation reward: transform and bounds") {
  CHECK(imitation_reward(1.0) == 1.0);
  CHECK(imitation_reward(-1.0) == 0.0);
  CHECK(imitation_reward(0.0) == 0.75);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const double r = imitation_reward(rng.uniform(-25.0, 25.0));
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
  // at the LSGAN optimum every policy sample earns zero imitation reward
  CHECK(imitation_reward(-1.0) == 0.0);
}

TEST_CASE("ss predictor loss: one-hot, uniform, and summation oracle") {
  Tape t;
  // near-one-hot logits underflow to an exactly zero cross-entropy
  Matrix onehot(1, 5);
  onehot << 800.0, 0.0, 0.0, 0.0, 0.0;
  CHECK(cross_entropy(t.constant(onehot), {0}).scalar() == 0.0);

  Matrix uniform = Matrix::Zero(1, 5);
  CHECK(cross_entropy(t.constant(uniform), {3}).scalar() ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));

  // mixed batch against a direct -log q summation oracle
  Rng rng(9);
  Matrix logits(6, 5);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 5; ++c) logits(r, c) = rng.normal();
  std::vector<int> ys = {0, 3, 1, 4, 2, 2};
  double oracle = 0.0;
  for (int r = 0; r < 6; ++r) {
    double denom = 0.0;
    for (int c = 0; c < 5; ++c) denom += std::exp(logits(r, c));
    oracle += -std::log(std::exp(logits(r, ys[static_cast<std::size_t>(r)])) / denom);
  }
  oracle /= 6.0;
  CHECK(cross_entropy(t.constant(logits), ys).scalar() ==
        doctest::Approx(oracle).epsilon(1e-12));

  CHECK_THROWS_AS(cross_entropy(t.constant(uniform), {7}), ContractViolation);

  // the combined semi-supervised term is the sum of both cross-entropies
  const double combined =
      ss_predictor_loss(t.constant(onehot), {0}, t.constant(uniform), {3}).scalar();
  CHECK(combined == doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("ss reward: log posterior with floor") {
  Vector post(5);
  post << 1.0, 0.0, 0.0, 0.0, 0.0;
  CHECK(ss_reward(post, 0) == 0.0);
  post << std::exp(-1.0), 0.0, 0.0, 0.0, 1.0 - std::exp(-1.0);
  CHECK(ss_reward(post, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  post << 0.0, 1.0, 0.0, 0.0, 0.0;
  CHECK(ss_reward(post, 0) == doctest::Approx(std::log(1e-6)).epsilon(1e-12));
}

TEST_CASE("us losses: Gaussian density cases and batch oracle") {
  Vector eps = Vector::Constant(1, 0.3);
  Vector mean = eps;
  Vector logstd = Vector::Zero(1);
  auto pair = us_losses(mean, logstd, eps);
  CHECK(pair.predictor_loss == doctest::Approx(0.5 * kLn2Pi).epsilon(1e-12));
  CHECK(pair.reward == doctest::Approx(-0.5 * kLn2Pi).epsilon(1e-12));

  Vector mean_off = Vector::Constant(1, 1.3);
  auto pair2 = us_losses(mean_off, logstd, eps);
  CHECK(pair2.reward == doctest::Approx(-0.5 * kLn2Pi - 0.5).epsilon(1e-12));

  // batched tape loss equals the scalar density oracle
  Tape t;
  Rng rng(4);
  const int n = 7, m = 2;
  Matrix mu(n, m), ls(n, m), x(n, m);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < m; ++c) {
      mu(r, c) = rng.normal();
      ls(r, c) = 0.3 * rng.normal();
      x(r, c) = rng.uniform(-1.0, 1.0);
    }
  double oracle = 0.0;
  for (int r = 0; r < n; ++r)
    oracle -= gaussian_log_density(x.row(r).transpose(), mu.row(r).transpose(),
                                   ls.row(r).transpose());
  oracle /= n;
  CHECK(us_predictor_loss(t.constant(mu), t.constant(ls), x).scalar() ==
        doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("rim loss: entropy term and l2 term") {
  Tape t;
  Matrix sharp(3, 5);
  sharp.setZero();
  sharp(0, 1) = 800.0;
  sharp(1, 4) = 800.0;
  sharp(2, 0) = 800.0;
  CHECK(rim_loss(t.constant(sharp), 0.0, std::nullopt).scalar() == 0.0);

  Matrix uniform = Matrix::Zero(4, 5);
  CHECK(rim_loss(t.constant(uniform), 0.0, std::nullopt).scalar() ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));

  Var norm = t.constant(Matrix::Constant(1, 1, 100.0));
  CHECK(rim_loss(t.constant(uniform), 1e-4, norm).scalar() ==
        doctest::Approx(std::log(5.0) + 0.01).epsilon(1e-12));
}

TEST_CASE("combined objective: optimum, compositionality, and gradient sum") {
  Tape t;
  // each component sits at a zero: lsgan at (-1, 1), both cross-entropies at
  // one-hot, the Gaussian at its mean with 2*pi*sigma^2 = 1, sharp posteriors
  Matrix onehot(1, 5);
  onehot << 800.0, 0.0, 0.0, 0.0, 0.0;
  Var lsgan = lsgan_discriminator_loss(col(t, {-1.0}), col(t, {1.0}));
  Var ss = ss_predictor_loss(t.constant(onehot), {0}, t.constant(onehot), {0});
  Matrix eps = Matrix::Constant(1, 1, 0.2);
  Var us = us_predictor_loss(t.constant(eps), t.constant(Matrix::Constant(1, 1, -0.5 * kLn2Pi)), eps);
  Var rim = rim_loss(t.constant(onehot), 0.0, std::nullopt);
  Var total = combined_discriminator_objective(lsgan, ss, us, rim);
  CHECK(total.scalar() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(total.scalar() ==
        lsgan.scalar() + ss.scalar() + us.scalar() + rim.scalar());
  t.clear();

  // gradient of the combined objective through a shared trunk matches finite
  // differences (and therefore the sum of component gradients)
  nn::ParamStore store;
  Rng rng(17);
  nn::DenseNetSpec spec{{6, 8, 8},
                        nn::Activation::tanh,
                        {{"disc", 1}, {"skill", 5}, {"mean", 1}, {"logstd", 1}}};
  nn::DenseNet trunk(store, "dq", spec, rng);
  Rng drng(18);
  Matrix xp(4, 6), xe(4, 6), xl(3, 6), xu(5, 6);
  for (auto* m : {&xp, &xe, &xl, &xu})
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c) (*m)(r, c) = drng.normal();
  std::vector<int> labels = {1, 0, 3};
  std::vector<int> skills = {2, 2, 4, 0};
  Matrix styles(4, 1);
  styles << 0.1, -0.4, 0.9, 0.3;

  auto build = [&](Tape& tp) {
    Var op = trunk.forward(tp, store, tp.constant(xp));
    Var oe = trunk.forward(tp, store, tp.constant(xe));
    Var ol = trunk.forward(tp, store, tp.constant(xl));
    Var ou = trunk.forward(tp, store, tp.constant(xu));
    Var lsg = lsgan_discriminator_loss(trunk.head(tp, op, "disc"),
                                       trunk.head(tp, oe, "disc"));
    Var ssl = ss_predictor_loss(trunk.head(tp, ol, "skill"), labels,
                                trunk.head(tp, op, "skill"), skills);
    Var usl = us_predictor_loss(trunk.head(tp, op, "mean"),
                                trunk.head(tp, op, "logstd"), styles);
    Var sqn = param_squared_norm(tp, store, trunk.param_names());
    Var riml = rim_loss(trunk.head(tp, ou, "skill"), 1e-4, sqn);
    return combined_discriminator_objective(lsg, ssl, usl, riml);
  };
  auto eval = [&]() {
    Tape tp;
    return build(tp).scalar();
  };
  store.zero_gradients();
  {
    Tape tp;
    tp.backward(build(tp));
  }
  auto fd = testutil::finite_difference(store, eval);
  CHECK(testutil::max_grad_rel_error(store, fd) < 1e-4);
}

TEST_CASE("total reward: weighted combination") {
  CHECK(total_reward(0, 0, 0, 0, 0.2, 0.2) == 0.0);
  CHECK(total_reward(1, 0, 0, 2, 0.2, 0.2) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(total_reward(5, -1, 2, 3, 0.0, 1.0) == 3.0);
}

TEST_CASE("latent prior: EMA update, fixed point, geometric convergence") {
  LatentPrior prior;
  prior.ema_rate = 1e-3;

  // fixed point: mean posterior equals the prior
  Matrix post(2, 5);
  post << 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2;
  LatentPrior same = update_latent_prior(prior, post);
  CHECK((same.probabilities - prior.probabilities).cwiseAbs().maxCoeff() < 1e-15);

  // arithmetic example: 0.999 * 0.2 + 0.001 * 0.4 = 0.2002
  Matrix shifted(1, 5);
  shifted << 0.4, 0.15, 0.15, 0.15, 0.15;
  LatentPrior next = update_latent_prior(prior, shifted);
  CHECK(next.probabilities[0] == doctest::Approx(0.2002).epsilon(1e-12));

  // repeated updates converge geometrically to the constant mean posterior
  Vector target = shifted.row(0).transpose();
  LatentPrior p = prior;
  const int n = 400;
  for (int i = 0; i < n; ++i) p = update_latent_prior(p, shifted);
  const double shrink = std::pow(1.0 - prior.ema_rate, n);
  Vector closed_form = target + shrink * (prior.probabilities - target);
  CHECK((p.probabilities - closed_form).cwiseAbs().maxCoeff() < 1e-12);

  // prior remains a valid distribution under random update sequences
  Rng rng(8);
  LatentPrior q;
  q.ema_rate = 0.05;
  for (int i = 0; i < 500; ++i) {
    Matrix batch(3, 5);
    for (int r = 0; r < 3; ++r) {
      double s = 0.0;
      for (int c = 0; c < 5; ++c) {
        batch(r, c) = rng.uniform01() + 1e-9;
        s += batch(r, c);
      }
      batch.row(r) /= s;
    }
    q = update_latent_prior(q, batch);
    CHECK(std::abs(q.probabilities.sum() - 1.0) < 1e-9);
    CHECK(q.probabilities.minCoeff() >= 0.0);
  }
}

TEST_CASE("latent sampling respects the prior and style bounds") {
  LatentPrior prior;
  prior.probabilities << 0.5, 0.5, 0.0, 0.0, 0.0;
  Rng rng(12);
  int counts[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < 2000; ++i) {
    LatentSample s = sample_latent(prior, 1, rng);
    s.validate();
    counts[s.skill]++;
    CHECK(std::abs(s.style[0]) <= 1.0);
  }
  CHECK(counts[2] + counts[3] + counts[4] == 0);
  CHECK(counts[0] > 800);
  CHECK(counts[1] > 800);
}
