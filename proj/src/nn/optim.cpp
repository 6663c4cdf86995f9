#include "agil/nn/optim.hpp"

#include <cmath>

namespace agil::nn {

OptimizerState make_adam(double learning_rate) {
  OptimizerState o;
  o.kind = OptimizerState::Kind::adam;
  o.learning_rate = learning_rate;
  return o;
}

OptimizerState make_rmsprop(double learning_rate) {
  OptimizerState o;
  o.kind = OptimizerState::Kind::rmsprop;
  o.learning_rate = learning_rate;
  return o;
}

namespace {

void prepare(OptimizerState& opt, ParamStore& params, bool needs_first) {
  require(opt.learning_rate > 0, "optimizer: learning_rate must be positive");
  auto& bufs = params.buffers();
  if (opt.second_moment.empty()) {
    for (const auto& b : bufs) {
      if (needs_first) opt.first_moment.push_back(Vector::Zero(b.size()));
      opt.second_moment.push_back(Vector::Zero(b.size()));
    }
  }
  require(opt.second_moment.size() == bufs.size(),
          "optimizer: state does not match parameter store");
  for (std::size_t i = 0; i < bufs.size(); ++i) {
    require(opt.second_moment[i].size() == bufs[i].values.size(),
            "optimizer: moment length mismatch for " + bufs[i].name);
    bufs[i].ensure_gradient();
    for (Eigen::Index k = 0; k < bufs[i].gradient.size(); ++k)
      if (!std::isfinite(bufs[i].gradient[k]))
        throw NumericError("optimizer: non-finite gradient in " + bufs[i].name +
                           " at flat index " + std::to_string(k) + "; step aborted");
  }
}

}  // namespace

void adam_step(OptimizerState& opt, ParamStore& params) {
  require(opt.kind == OptimizerState::Kind::adam, "adam_step: wrong optimizer kind");
  prepare(opt, params, /*needs_first=*/true);
  opt.step_count += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
  auto& bufs = params.buffers();
  for (std::size_t i = 0; i < bufs.size(); ++i) {
    Vector& m = opt.first_moment[i];
    Vector& v = opt.second_moment[i];
    Vector& g = bufs[i].gradient;
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * g[k];
      v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      bufs[i].values[k] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.eps);
    }
    g.setZero();
  }
}

void rmsprop_step(OptimizerState& opt, ParamStore& params) {
  require(opt.kind == OptimizerState::Kind::rmsprop, "rmsprop_step: wrong optimizer kind");
  prepare(opt, params, /*needs_first=*/false);
  opt.step_count += 1;
  auto& bufs = params.buffers();
  for (std::size_t i = 0; i < bufs.size(); ++i) {
    Vector& v = opt.second_moment[i];
    Vector& g = bufs[i].gradient;
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      v[k] = opt.decay * v[k] + (1.0 - opt.decay) * g[k] * g[k];
      bufs[i].values[k] -= opt.learning_rate * g[k] / (std::sqrt(v[k]) + opt.eps);
    }
    g.setZero();
  }
}

void optimizer_step(OptimizerState& opt, ParamStore& params) {
  if (opt.kind == OptimizerState::Kind::adam)
    adam_step(opt, params);
  else
    rmsprop_step(opt, params);
}

}  // namespace agil::nn
