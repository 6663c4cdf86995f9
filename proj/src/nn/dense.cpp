#include "agil/nn/dense.hpp"

#include <cmath>

namespace agil::nn {

void DenseNetSpec::validate() const {
  require(layer_widths.size() >= 2, "DenseNetSpec: at least 2 layers required");
  for (int w : layer_widths) require(w > 0, "DenseNetSpec: widths must be positive");
  if (!output_heads.empty()) {
    int total = 0;
    for (const auto& h : output_heads) {
      require(h.width > 0, "DenseNetSpec: head widths must be positive");
      total += h.width;
    }
    require(total == layer_widths.back(),
            "DenseNetSpec: head slices must partition the output width");
  }
}

namespace {

double apply_act(Activation a, double x) {
  switch (a) {
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::elu: return x > 0.0 ? x : std::expm1(x);
  }
  return x;
}

Var act_var(Activation a, const Var& v) {
  switch (a) {
    case Activation::tanh: return vtanh(v);
    case Activation::relu: return relu(v);
    case Activation::elu: return elu(v);
  }
  return v;
}

}  // namespace

DenseNet::DenseNet(ParamStore& store, std::string prefix, DenseNetSpec spec,
                   Rng& rng, double final_scale)
    : prefix_(std::move(prefix)), spec_(std::move(spec)) {
  spec_.validate();
  const int layers = layer_count();
  for (int l = 0; l < layers; ++l) {
    const int fan_in = spec_.layer_widths[static_cast<std::size_t>(l)];
    const int fan_out = spec_.layer_widths[static_cast<std::size_t>(l) + 1];
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    if (l == layers - 1) limit *= final_scale;
    store.add_uniform(weight_name(l), {fan_in, fan_out}, limit, rng);
    store.add(bias_name(l), {1, fan_out});
  }
}

Var DenseNet::forward(Tape& tape, ParamStore& store, const Var& input) const {
  require(input.cols() == spec_.input_width(), "DenseNet::forward: input width mismatch");
  Var x = input;
  const int layers = layer_count();
  for (int l = 0; l < layers; ++l) {
    Var w = tape.param(store[weight_name(l)]);
    Var b = tape.param(store[bias_name(l)]);
    x = add_rowvec(matmul(x, w), b);
    if (l + 1 < layers) x = act_var(spec_.activation, x);
  }
  return x;
}

Vector DenseNet::infer(const ParamStore& store, const Vector& input) const {
  require(static_cast<int>(input.size()) == spec_.input_width(),
          "DenseNet::infer: input width mismatch");
  Vector x = input;
  const int layers = layer_count();
  for (int l = 0; l < layers; ++l) {
    const Matrix w = store[weight_name(l)].as_matrix();
    const Matrix b = store[bias_name(l)].as_matrix();
    Vector y = w.transpose() * x + b.row(0).transpose();
    if (l + 1 < layers)
      for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = apply_act(spec_.activation, y[i]);
    x = std::move(y);
  }
  return x;
}

Matrix DenseNet::infer(const ParamStore& store, const Matrix& input) const {
  Matrix out(input.rows(), spec_.output_width());
  for (Eigen::Index r = 0; r < input.rows(); ++r)
    out.row(r) = infer(store, Vector(input.row(r).transpose())).transpose();
  return out;
}

Var DenseNet::head(Tape& tape, const Var& output, const std::string& name) const {
  (void)tape;
  auto [begin, width] = head_range(name);
  return slice_cols(output, begin, width);
}

Vector DenseNet::head(const Vector& output, const std::string& name) const {
  auto [begin, width] = head_range(name);
  return output.segment(begin, width);
}

std::pair<int, int> DenseNet::head_range(const std::string& name) const {
  int begin = 0;
  for (const auto& h : spec_.output_heads) {
    if (h.name == name) return {begin, h.width};
    begin += h.width;
  }
  throw ContractViolation("DenseNet: unknown head " + name + " on " + prefix_);
}

std::vector<std::string> DenseNet::param_names() const {
  std::vector<std::string> names;
  for (int l = 0; l < layer_count(); ++l) {
    names.push_back(weight_name(l));
    names.push_back(bias_name(l));
  }
  return names;
}

std::string DenseNet::weight_name(int layer) const {
  return prefix_ + ".L" + std::to_string(layer) + ".W";
}
std::string DenseNet::bias_name(int layer) const {
  return prefix_ + ".L" + std::to_string(layer) + ".b";
}

GruCell::GruCell(ParamStore& store, std::string prefix, int input_width,
                 int hidden_width, Rng& rng)
    : prefix_(std::move(prefix)), input_width_(input_width), hidden_width_(hidden_width) {
  require(input_width > 0 && hidden_width > 0, "GruCell: widths must be positive");
  const double wlim = std::sqrt(6.0 / (input_width + hidden_width));
  const double ulim = std::sqrt(6.0 / (2 * hidden_width));
  for (const char* gate : {"z", "r", "n"}) {
    store.add_uniform(prefix_ + ".W" + gate, {input_width, hidden_width}, wlim, rng);
    store.add_uniform(prefix_ + ".U" + gate, {hidden_width, hidden_width}, ulim, rng);
    store.add(prefix_ + ".b" + gate, {1, hidden_width});
  }
}

Var GruCell::step(Tape& tape, ParamStore& store, const Var& x, const Var& h) const {
  require(x.cols() == input_width_ && h.cols() == hidden_width_,
          "GruCell::step: width mismatch");
  auto affine = [&](const char* gate, const Var& xin, const Var& hin) {
    Var w = tape.param(store[prefix_ + ".W" + std::string(gate)]);
    Var u = tape.param(store[prefix_ + ".U" + std::string(gate)]);
    Var b = tape.param(store[prefix_ + ".b" + std::string(gate)]);
    return add_rowvec(add(matmul(xin, w), matmul(hin, u)), b);
  };
  Var z = sigmoid(affine("z", x, h));
  Var r = sigmoid(affine("r", x, h));
  Var n = vtanh(affine("n", x, mul(r, h)));
  Var one_minus_z = add_scalar(neg(z), 1.0);
  return add(mul(one_minus_z, n), mul(z, h));
}

Vector GruCell::step_infer(const ParamStore& store, const Vector& x, const Vector& h) const {
  auto affine = [&](const char* gate, const Vector& xin, const Vector& hin) {
    const Matrix w = store[prefix_ + ".W" + std::string(gate)].as_matrix();
    const Matrix u = store[prefix_ + ".U" + std::string(gate)].as_matrix();
    const Matrix b = store[prefix_ + ".b" + std::string(gate)].as_matrix();
    return Vector(w.transpose() * xin + u.transpose() * hin + b.row(0).transpose());
  };
  auto sig = [](Vector v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 / (1.0 + std::exp(-v[i]));
    return v;
  };
  Vector z = sig(affine("z", x, h));
  Vector r = sig(affine("r", x, h));
  Vector rh = r.cwiseProduct(h);
  Vector n = affine("n", x, rh);
  for (Eigen::Index i = 0; i < n.size(); ++i) n[i] = std::tanh(n[i]);
  return (Vector::Ones(hidden_width_) - z).cwiseProduct(n) + z.cwiseProduct(h);
}

std::vector<std::string> GruCell::param_names() const {
  std::vector<std::string> names;
  for (const char* gate : {"z", "r", "n"})
    for (const char* kind : {".W", ".U", ".b"})
      names.push_back(prefix_ + kind + gate);
  return names;
}

}  // namespace agil::nn
