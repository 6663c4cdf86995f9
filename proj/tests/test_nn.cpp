#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <filesystem>

#include "agil/nn/checkpoint.hpp"
#include "agil/nn/dense.hpp"
#include "agil/nn/optim.hpp"
#include "agil/nn/tape.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace agil;
using namespace agil::nn;

namespace {

// Independent nested-loop matmul oracle (no Eigen products).
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
  Matrix y = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      for (Eigen::Index k = 0; k < a.cols(); ++k) y(i, j) += a(i, k) * b(k, j);
  return y;
}

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("forward: identity linear layer") {
  ParamStore store;
  Rng rng(1);
  DenseNet net(store, "net", DenseNetSpec{{2, 2}, Activation::tanh, {}}, rng);
  store["net.L0.W"].set_from_matrix(Matrix::Identity(2, 2));
  store["net.L0.b"].values.setZero();
  Vector out = net.infer(store, Vector{{1.0, 2.0}});
  CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("forward: tanh layer with zero weights gives zero") {
  ParamStore store;
  Rng rng(1);
  DenseNet net(store, "net", DenseNetSpec{{3, 4, 2}, Activation::tanh, {}}, rng);
  store["net.L0.W"].values.setZero();
  store["net.L0.b"].values.setZero();
  Vector out_hidden = net.infer(store, Vector{{5.0, -3.0, 0.25}});
  // first layer output is tanh(0) = 0; the final linear layer sees zeros, so
  // the output equals its bias (randomly initialized biases are zero).
  for (int i = 0; i < 2; ++i) CHECK(out_hidden[i] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("forward: 2-layer net matches nested-loop oracle within 1e-12") {
  ParamStore store;
  Rng rng(42);
  DenseNetSpec spec{{5, 7, 3}, Activation::tanh, {}};
  DenseNet net(store, "net", spec, rng);
  Rng data_rng(7);
  Matrix x = random_matrix(4, 5, data_rng);

  const Matrix w0 = store["net.L0.W"].as_matrix();
  const Matrix b0 = store["net.L0.b"].as_matrix();
  const Matrix w1 = store["net.L1.W"].as_matrix();
  const Matrix b1 = store["net.L1.b"].as_matrix();
  Matrix h = matmul_oracle(x, w0);
  h.rowwise() += b0.row(0);
  h = h.unaryExpr([](double v) { return std::tanh(v); });
  Matrix expect = matmul_oracle(h, w1);
  expect.rowwise() += b1.row(0);

  Matrix got = net.infer(store, x);
  CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-12);

  // the taped forward agrees with inference
  Tape tape;
  Var out = net.forward(tape, store, tape.constant(x));
  CHECK((out.val() - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward: d(x^2)/dx = 2x and tanh'(0) = 1") {
  Tape tape;
  TensorBuffer x;
  x.name = "x";
  x.shape = {1, 1};
  x.values = Vector::Constant(1, 3.0);
  Var v = tape.param(x);
  Var loss = square(v);
  tape.backward(loss);
  CHECK(x.gradient[0] == doctest::Approx(6.0).epsilon(1e-12));

  TensorBuffer z;
  z.name = "z";
  z.shape = {1, 1};
  z.values = Vector::Zero(1);
  Var vz = tape.param(z);
  tape.backward(vtanh(vz));
  CHECK(z.gradient[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("backward without forward is a contract violation") {
  Tape tape;
  CHECK_THROWS_AS(tape.backward(Var{&tape, 0}), ContractViolation);
}

TEST_CASE("backward: random 2-layer net matches central finite differences") {
  for (int seed = 0; seed < 5; ++seed) {
    ParamStore store;
    Rng rng(static_cast<std::uint64_t>(seed) + 10);
    DenseNetSpec spec{{4, 6, 3}, Activation::tanh, {}};
    DenseNet net(store, "net", spec, rng);
    Rng data_rng(static_cast<std::uint64_t>(seed) + 100);
    Matrix x = random_matrix(3, 4, data_rng);
    Matrix target = random_matrix(3, 3, data_rng);

    auto eval = [&]() {
      Tape t;
      Var out = net.forward(t, store, t.constant(x));
      Var diff = sub(out, t.constant(target));
      return mean(square(diff)).scalar();
    };

    store.zero_gradients();
    {
      Tape t;
      Var out = net.forward(t, store, t.constant(x));
      Var diff = sub(out, t.constant(target));
      t.backward(mean(square(diff)));
    }
    auto fd = testutil::finite_difference(store, eval);
    CHECK(testutil::max_grad_rel_error(store, fd) < 1e-4);
  }
}

TEST_CASE("backward: every op in the closed set passes finite differences") {
  ParamStore store;
  Rng rng(77);
  store.add_uniform("a", {3, 4}, 0.8, rng);
  store.add_uniform("b", {3, 4}, 0.8, rng);
  store.add_uniform("c", {4, 2}, 0.8, rng);
  // keep values away from kinks and log/sqrt domains
  for (auto& buf : store.buffers())
    for (int i = 0; i < buf.size(); ++i)
      buf.values[i] = 0.3 + std::abs(buf.values[i]);

  auto build = [&](Tape& t) {
    Var a = t.param(store["a"]);
    Var b = t.param(store["b"]);
    Var c = t.param(store["c"]);
    Var m = matmul(add(mul(a, b), vexp(neg(a))), c);       // 3x2
    Var s = softmax_rows(m);
    Var ls = log_softmax_rows(scale(m, 0.7));
    Var mixed = concat_cols(s, ls);                        // 3x4
    Var sl = slice_cols(mixed, 1, 2);                      // 3x2
    Var act = add(vtanh(sl), sigmoid(sl));
    Var more = add(elu(sub(sl, act)), relu(sl));
    Var rs = reshape(more, 2, 3);
    Var gathered = gather_cols(rs, {2, 0});                // 2x1
    Var guarded = vsqrt(add_scalar(square(gathered), 1.0));
    Var lo = vlog(add_scalar(vexp(clamp(guarded, 0.2, 3.9)), 0.5));
    Var mn = cwise_min(lo, scale(lo, 0.9));
    Var dv = div(mn, add_scalar(square(mn), 1.0));
    return add(add(mean(dv), sum(row_sum(s))), mean(ls));
  };
  auto eval = [&]() {
    Tape t;
    return build(t).scalar();
  };
  store.zero_gradients();
  {
    Tape t;
    t.backward(build(t));
  }
  auto fd = testutil::finite_difference(store, eval);
  CHECK(testutil::max_grad_rel_error(store, fd) < 1e-4);
}

TEST_CASE("backward: add_rowvec bias broadcast passes finite differences") {
  ParamStore store;
  Rng rng(5);
  store.add_uniform("x", {4, 3}, 1.0, rng);
  store.add_uniform("bias", {1, 3}, 1.0, rng);
  auto build = [&](Tape& t) {
    return mean(square(add_rowvec(t.param(store["x"]), t.param(store["bias"]))));
  };
  auto eval = [&]() {
    Tape t;
    return build(t).scalar();
  };
  store.zero_gradients();
  {
    Tape t;
    t.backward(build(t));
  }
  auto fd = testutil::finite_difference(store, eval);
  CHECK(testutil::max_grad_rel_error(store, fd) < 1e-4);
}

TEST_CASE("gru cell: inference matches tape and gradients check out") {
  ParamStore store;
  Rng rng(11);
  GruCell cell(store, "gru", 3, 5, rng);
  Rng data_rng(12);
  Matrix x = random_matrix(2, 3, data_rng);
  Matrix h0 = random_matrix(2, 5, data_rng);

  Tape t;
  Var h1 = cell.step(t, store, t.constant(x), t.constant(h0));
  for (int r = 0; r < 2; ++r) {
    Vector hi = cell.step_infer(store, Vector(x.row(r).transpose()),
                                Vector(h0.row(r).transpose()));
    CHECK((h1.val().row(r).transpose() - hi).cwiseAbs().maxCoeff() < 1e-12);
  }
  t.clear();

  auto build = [&](Tape& tp) {
    Var h = cell.step(tp, store, tp.constant(x), tp.constant(h0));
    Var h2 = cell.step(tp, store, tp.constant(x), h);  // two chained steps
    return mean(square(h2));
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

TEST_CASE("conv1d and conv2d: shapes and finite differences") {
  ParamStore store;
  Rng rng(21);
  const int t_len = 8, in_ch = 2, k1 = 4, s1 = 2, out_ch = 3;
  store.add_uniform("x1", {2, t_len * in_ch}, 1.0, rng);
  store.add_uniform("w1", {k1 * in_ch, out_ch}, 0.5, rng);
  store.add_uniform("b1", {1, out_ch}, 0.5, rng);
  const int grid = 6, k2 = 3, s2 = 1, out_ch2 = 2;
  store.add_uniform("x2", {2, grid * grid}, 1.0, rng);
  store.add_uniform("w2", {k2 * k2, out_ch2}, 0.5, rng);
  store.add_uniform("b2", {1, out_ch2}, 0.5, rng);

  auto build = [&](Tape& t) {
    Var y1 = conv1d(t.param(store["x1"]), t.param(store["w1"]), t.param(store["b1"]),
                    t_len, in_ch, k1, s1);
    CHECK(y1.cols() == ((t_len - k1) / s1 + 1) * out_ch);
    Var y2 = conv2d(t.param(store["x2"]), t.param(store["w2"]), t.param(store["b2"]),
                    grid, 1, k2, s2);
    CHECK(y2.cols() == ((grid - k2) / s2 + 1) * ((grid - k2) / s2 + 1) * out_ch2);
    return add(mean(square(y1)), mean(vtanh(y2)));
  };
  auto eval = [&]() {
    Tape t;
    return build(t).scalar();
  };
  store.zero_gradients();
  {
    Tape t;
    t.backward(build(t));
  }
  auto fd = testutil::finite_difference(store, eval);
  CHECK(testutil::max_grad_rel_error(store, fd) < 1e-4);
}

TEST_CASE("conv1d matches a direct correlation oracle") {
  ParamStore store;
  Rng rng(31);
  const int t_len = 6, k = 4, stride = 2;
  store.add_uniform("x", {1, t_len}, 1.0, rng);
  store.add_uniform("w", {k, 1}, 1.0, rng);
  store.add("b", {1, 1});
  Tape t;
  Var y = conv1d(t.param(store["x"]), t.param(store["w"]), t.param(store["b"]),
                 t_len, 1, k, stride);
  const Matrix xv = store["x"].as_matrix();
  const Matrix wv = store["w"].as_matrix();
  for (int p = 0; p < 2; ++p) {
    double acc = 0.0;
    for (int i = 0; i < k; ++i) acc += xv(0, p * stride + i) * wv(i, 0);
    CHECK(y.val()(0, p) == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("adam: first step moves by ~lr*sign(g); zero gradient is a no-op") {
  ParamStore store;
  store.add("w", {1, 3});
  store["w"].values << 1.0, -2.0, 0.5;
  store.zero_gradients();
  store["w"].gradient << 0.2, -3.0, 0.0;
  OptimizerState opt = make_adam(0.05);
  Vector before = store["w"].values;
  adam_step(opt, store);
  CHECK(store["w"].values[0] == doctest::Approx(before[0] - 0.05).epsilon(1e-6));
  CHECK(store["w"].values[1] == doctest::Approx(before[1] + 0.05).epsilon(1e-6));
  CHECK(store["w"].values[2] == before[2]);  // zero gradient -> zero change

  // with fresh moments an all-zero gradient leaves every parameter untouched
  ParamStore store_z;
  store_z.add("w", {1, 3});
  store_z["w"].values << 1.0, -2.0, 0.5;
  store_z.zero_gradients();
  OptimizerState opt_z = make_adam(0.05);
  Vector snap = store_z["w"].values;
  adam_step(opt_z, store_z);
  CHECK((store_z["w"].values - snap).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam: three steps on f(x)=x^2 match a scalar recurrence oracle") {
  ParamStore store;
  store.add("x", {1, 1});
  store["x"].values[0] = 1.0;
  OptimizerState opt = make_adam(0.1);

  // independent scalar transcription of the Adam recurrence
  double x = 1.0, m = 0.0, v = 0.0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.1;
  for (int step = 1; step <= 3; ++step) {
    const double g = 2.0 * x;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, step));
    const double vhat = v / (1 - std::pow(b2, step));
    x -= lr * mhat / (std::sqrt(vhat) + eps);
  }

  for (int step = 0; step < 3; ++step) {
    store.zero_gradients();
    store["x"].gradient[0] = 2.0 * store["x"].values[0];
    adam_step(opt, store);
  }
  CHECK(store["x"].values[0] == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("rmsprop: first step and 5-step scalar recurrence oracle") {
  ParamStore store;
  store.add("x", {1, 1});
  store["x"].values[0] = 2.0;
  OptimizerState opt = make_rmsprop(0.01);

  store.zero_gradients();
  store["x"].gradient[0] = 0.5;
  rmsprop_step(opt, store);
  // first step: delta = -lr * g / (sqrt(0.01 g^2) + eps) ~ -10 lr sign(g)
  CHECK(store["x"].values[0] ==
        doctest::Approx(2.0 - 0.01 * 0.5 / (std::sqrt(0.01 * 0.25) + 1e-8)).epsilon(1e-12));

  // fresh 5-step run against an independent scalar recurrence, g = x
  ParamStore store2;
  store2.add("x", {1, 1});
  store2["x"].values[0] = 1.5;
  OptimizerState opt2 = make_rmsprop(0.02);
  double x = 1.5, v = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double g = x;
    v = 0.99 * v + 0.01 * g * g;
    x -= 0.02 * g / (std::sqrt(v) + 1e-8);
  }
  for (int i = 0; i < 5; ++i) {
    store2.zero_gradients();
    store2["x"].gradient[0] = store2["x"].values[0];
    rmsprop_step(opt2, store2);
  }
  CHECK(store2["x"].values[0] == doctest::Approx(x).epsilon(1e-12));

  // zero gradient -> zero change
  Vector snap = store2["x"].values;
  store2.zero_gradients();
  rmsprop_step(opt2, store2);
  CHECK(store2["x"].values[0] == snap[0]);
}

TEST_CASE("optimizers abort on NaN gradients without touching parameters") {
  ParamStore store;
  store.add("w", {1, 2});
  store["w"].values << 1.0, 2.0;
  store.zero_gradients();
  store["w"].gradient << 0.1, std::numeric_limits<double>::quiet_NaN();
  OptimizerState opt = make_adam(0.1);
  CHECK_THROWS_AS(adam_step(opt, store), NumericError);
  CHECK(store["w"].values[0] == 1.0);
  CHECK(store["w"].values[1] == 2.0);
}

TEST_CASE("determinism: identical seeds give bit-identical parameters after N steps") {
  auto run = [](std::uint64_t seed) {
    ParamStore store;
    Rng rng(seed);
    DenseNet net(store, "net", DenseNetSpec{{3, 8, 2}, Activation::elu, {}}, rng);
    OptimizerState opt = make_adam(1e-3);
    Rng data_rng(seed + 1);
    for (int iter = 0; iter < 20; ++iter) {
      Matrix x = random_matrix(4, 3, data_rng);
      Matrix y = random_matrix(4, 2, data_rng);
      Tape t;
      Var out = net.forward(t, store, t.constant(x));
      t.backward(mean(square(sub(out, t.constant(y)))));
      adam_step(opt, store);
    }
    return store;
  };
  ParamStore a = run(99), b = run(99);
  for (std::size_t i = 0; i < a.buffers().size(); ++i) {
    const auto& va = a.buffers()[i].values;
    const auto& vb = b.buffers()[i].values;
    REQUIRE(va.size() == vb.size());
    CHECK(std::memcmp(va.data(), vb.data(), sizeof(double) * va.size()) == 0);
  }
}

TEST_CASE("checkpoint: round-trip is bit-exact") {
  ParamStore store;
  Rng rng(123);
  DenseNet net(store, "net", DenseNetSpec{{4, 5, 3}, Activation::tanh, {}}, rng);
  // include values that stress the encoding
  store["net.L0.b"].values[0] = 0x1.fffffffffffffp1023;
  store["net.L0.b"].values[1] = 4.9406564584124654e-324;  // min subnormal
  store["net.L0.b"].values[2] = -0.0;

  auto dir = std::filesystem::temp_directory_path() / "agil_ckpt_test";
  std::filesystem::create_directories(dir);
  CheckpointWriter w;
  w.add_store("policy", store);
  w.add_text("note", "42");
  w.write(dir / "ckpt.json");

  ParamStore restored;
  Rng rng2(999);  // different init, must be fully overwritten
  DenseNet net2(restored, "net", DenseNetSpec{{4, 5, 3}, Activation::tanh, {}}, rng2);
  CheckpointReader r(dir / "ckpt.json");
  r.read_store("policy", restored);
  CHECK(r.text("note") == "42");
  for (std::size_t i = 0; i < store.buffers().size(); ++i) {
    const auto& va = store.buffers()[i].values;
    const auto& vb = restored.buffers()[i].values;
    REQUIRE(va.size() == vb.size());
    CHECK(std::memcmp(va.data(), vb.data(), sizeof(double) * va.size()) == 0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("head slices partition the output and misuse throws") {
  ParamStore store;
  Rng rng(3);
  DenseNetSpec spec{{3, 6, 8}, Activation::tanh, {{"a", 5}, {"b", 3}}};
  DenseNet net(store, "net", spec, rng);
  Vector out = net.infer(store, Vector{{0.1, 0.2, 0.3}});
  CHECK(net.head(out, "a").size() == 5);
  CHECK(net.head(out, "b").size() == 3);
  CHECK_THROWS_AS(net.head(out, "c"), ContractViolation);

  DenseNetSpec bad{{3, 6, 8}, Activation::tanh, {{"a", 5}, {"b", 2}}};
  CHECK_THROWS_AS(bad.validate(), ContractViolation);

  DenseNetSpec too_short{{3}, Activation::tanh, {}};
  CHECK_THROWS_AS(too_short.validate(), ContractViolation);
}

TEST_CASE("forward input width mismatch throws") {
  ParamStore store;
  Rng rng(4);
  DenseNet net(store, "net", DenseNetSpec{{3, 2}, Activation::tanh, {}}, rng);
  CHECK_THROWS_AS(net.infer(store, Vector{{1.0, 2.0}}), ContractViolation);
}
