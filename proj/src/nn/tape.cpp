#include "agil/nn/tape.hpp"

#include <cmath>
#include <utility>

namespace agil::nn {

const Matrix& Var::val() const {
  require(tape != nullptr && id >= 0, "Var: unbound handle");
  return tape->value(id);
}

double Var::scalar() const {
  const Matrix& v = val();
  require(v.rows() == 1 && v.cols() == 1, "Var::scalar: node is not 1x1");
  return v(0, 0);
}

Var Tape::constant(Matrix value) { return make(std::move(value)); }

Var Tape::param(TensorBuffer& buf) {
  Var v = make(buf.as_matrix());
  nodes_[static_cast<std::size_t>(v.id)].param = &buf;
  return v;
}

Var Tape::make(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::set_backprop(int id, std::function<void(Tape&)> fn) {
  nodes_[static_cast<std::size_t>(id)].backprop = std::move(fn);
}

const Matrix& Tape::value(int id) const {
  require(id >= 0 && id < size(), "Tape::value: bad node id");
  return nodes_[static_cast<std::size_t>(id)].value;
}

Matrix& Tape::grad(int id) {
  require(id >= 0 && id < size(), "Tape::grad: bad node id");
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(const Var& scalar_loss) {
  require(scalar_loss.tape == this, "Tape::backward: Var from another tape");
  require(!nodes_.empty(), "Tape::backward: no forward pass recorded");
  const Matrix& v = value(scalar_loss.id);
  require(v.rows() == 1 && v.cols() == 1, "Tape::backward: loss must be scalar");
  grad(scalar_loss.id)(0, 0) = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0) continue;  // no gradient reached this node
    if (n.backprop) n.backprop(*this);
    if (n.param != nullptr) n.param->accumulate_gradient(n.grad);
  }
  clear();
}

void Tape::clear() { nodes_.clear(); }

namespace {

Tape& same_tape(const Var& a, const Var& b, const char* op) {
  require(a.tape != nullptr && a.tape == b.tape,
          std::string(op) + ": operands from different tapes");
  return *a.tape;
}

void same_shape(const Var& a, const Var& b, const char* op) {
  require(a.val().rows() == b.val().rows() && a.val().cols() == b.val().cols(),
          std::string(op) + ": shape mismatch");
}

// Elementwise unary op. df(x, y) is the local derivative given input x and
// output y.
template <typename F, typename DF>
Var unary(const Var& a, F f, DF df) {
  Tape& t = *a.tape;
  Var out = t.make(a.val().unaryExpr(f));
  const int aid = a.id, oid = out.id;
  t.set_backprop(oid, [aid, oid, df](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    const Matrix& x = tp.value(aid);
    const Matrix& y = tp.value(oid);
    Matrix& ga = tp.grad(aid);
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      for (Eigen::Index c = 0; c < g.cols(); ++c)
        ga(r, c) += g(r, c) * df(x(r, c), y(r, c));
  });
  return out;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "matmul");
  require(a.val().cols() == b.val().rows(), "matmul: inner dimension mismatch");
  Var out = t.make(a.val() * b.val());
  const int aid = a.id, bid = b.id, oid = out.id;
  t.set_backprop(oid, [aid, bid, oid](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    tp.grad(aid) += g * tp.value(bid).transpose();
    tp.grad(bid) += tp.value(aid).transpose() * g;
  });
  return out;
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "add");
  same_shape(a, b, "add");
  Var out = t.make(a.val() + b.val());
  const int aid = a.id, bid = b.id, oid = out.id;
  t.set_backprop(oid, [aid, bid, oid](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    tp.grad(aid) += g;
    tp.grad(bid) += g;
  });
  return out;
}

Var add_rowvec(const Var& a, const Var& bias) {
  Tape& t = same_tape(a, bias, "add_rowvec");
  require(bias.val().rows() == 1 && bias.val().cols() == a.val().cols(),
          "add_rowvec: bias must be 1 x cols");
  Matrix y = a.val();
  y.rowwise() += bias.val().row(0);
  Var out = t.make(std::move(y));
  const int aid = a.id, bid = bias.id, oid = out.id;
  t.set_backprop(oid, [aid, bid, oid](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    tp.grad(aid) += g;
    tp.grad(bid).row(0) += g.colwise().sum();
  });
  return out;
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "sub");
  same_shape(a, b, "sub");
  Var out = t.make(a.val() - b.val());
  const int aid = a.id, bid = b.id, oid = out.id;
  t.set_backprop(oid, [aid, bid, oid](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    tp.grad(aid) += g;
    tp.grad(bid) -= g;
  });
  return out;
}

Var mul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "mul");
  same_shape(a, b, "mul");
  Var out = t.make(a.val().cwiseProduct(b.val()));
  const int aid = a.id, bid = b.id, oid = out.id;
  t.set_backprop(oid, [aid, bid, oid](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    tp.grad(aid) += g.cwiseProduct(tp.value(bid));
    tp.grad(bid) += g.cwiseProduct(tp.value(aid));
  });
  return out;
}

Var div(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "div");
  same_shape(a, b, "div");
  Var out = t.make(a.val().cwiseQuotient(b.val()));
  const int aid = a.id, bid = b.id, oid = out.id;
  t.set_backprop(oid, [aid, bid, oid](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    const Matrix& bv = tp.value(bid);
    const Matrix& y = tp.value(oid);
    tp.grad(aid) += g.cwiseQuotient(bv);
    tp.grad(bid) -= g.cwiseProduct(y).cwiseQuotient(bv);
  });
  return out;
}

Var neg(const Var& a) {
  return unary(a, [](double x) { return -x; },
               [](double, double) { return -1.0; });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return s * x; },
               [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; },
               [](double, double) { return 1.0; });
}

Var vtanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var elu(const Var& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
               [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Var sigmoid(const Var& a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Var vexp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Var vlog(const Var& a) {
  return unary(a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Var vsqrt(const Var& a) {
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

Var clamp(const Var& a, double lo, double hi) {
  require(lo < hi, "clamp: lo must be < hi");
  return unary(a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
               [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var cwise_min(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "cwise_min");
  same_shape(a, b, "cwise_min");
  Var out = t.make(a.val().cwiseMin(b.val()));
  const int aid = a.id, bid = b.id, oid = out.id;
  t.set_backprop(oid, [aid, bid, oid](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    const Matrix& av = tp.value(aid);
    const Matrix& bv = tp.value(bid);
    Matrix& ga = tp.grad(aid);
    Matrix& gb = tp.grad(bid);
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      for (Eigen::Index c = 0; c < g.cols(); ++c) {
        if (av(r, c) <= bv(r, c))
          ga(r, c) += g(r, c);
        else
          gb(r, c) += g(r, c);
      }
  });
  return out;
}

Var softmax_rows(const Var& a) {
  Tape& t = *a.tape;
  Matrix y = a.val();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  Var out = t.make(std::move(y));
  const int aid = a.id, oid = out.id;
  t.set_backprop(oid, [aid, oid](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    const Matrix& y = tp.value(oid);
    Matrix& ga = tp.grad(aid);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double dot = g.row(r).cwiseProduct(y.row(r)).sum();
      ga.row(r) += y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
  });
  return out;
}

Var log_softmax_rows(const Var& a) {
  Tape& t = *a.tape;
  Matrix y = a.val();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    const double lse = m + std::log((y.row(r).array() - m).exp().sum());
    y.row(r).array() -= lse;
  }
  Var out = t.make(std::move(y));
  const int aid = a.id, oid = out.id;
  t.set_backprop(oid, [aid, oid](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    const Matrix& y = tp.value(oid);  // log-softmax values
    Matrix& ga = tp.grad(aid);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double gsum = g.row(r).sum();
      ga.row(r) += g.row(r) - gsum * y.row(r).array().exp().matrix();
    }
  });
  return out;
}

Var sum(const Var& a) {
  Tape& t = *a.tape;
  Matrix y(1, 1);
  y(0, 0) = a.val().sum();
  Var out = t.make(std::move(y));
  const int aid = a.id, oid = out.id;
  t.set_backprop(oid, [aid, oid](Tape& tp) {
    tp.grad(aid).array() += tp.grad(oid)(0, 0);
  });
  return out;
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.val().size());
  require(n > 0, "mean: empty input");
  return scale(sum(a), 1.0 / n);
}

Var row_sum(const Var& a) {
  Tape& t = *a.tape;
  Var out = t.make(a.val().rowwise().sum());
  const int aid = a.id, oid = out.id;
  t.set_backprop(oid, [aid, oid](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    Matrix& ga = tp.grad(aid);
    for (Eigen::Index r = 0; r < ga.rows(); ++r) ga.row(r).array() += g(r, 0);
  });
  return out;
}

Var gather_cols(const Var& a, std::vector<int> col_per_row) {
  Tape& t = *a.tape;
  const Matrix& av = a.val();
  require(static_cast<Eigen::Index>(col_per_row.size()) == av.rows(),
          "gather_cols: one index per row required");
  Matrix y(av.rows(), 1);
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    const int c = col_per_row[static_cast<std::size_t>(r)];
    require(c >= 0 && c < av.cols(), "gather_cols: column index out of range");
    y(r, 0) = av(r, c);
  }
  Var out = t.make(std::move(y));
  const int aid = a.id, oid = out.id;
  t.set_backprop(oid, [aid, oid, idx = std::move(col_per_row)](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    Matrix& ga = tp.grad(aid);
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      ga(r, idx[static_cast<std::size_t>(r)]) += g(r, 0);
  });
  return out;
}

Var slice_cols(const Var& a, int begin, int len) {
  Tape& t = *a.tape;
  require(begin >= 0 && len > 0 && begin + len <= a.val().cols(),
          "slice_cols: range out of bounds");
  Var out = t.make(a.val().middleCols(begin, len));
  const int aid = a.id, oid = out.id;
  t.set_backprop(oid, [aid, oid, begin, len](Tape& tp) {
    tp.grad(aid).middleCols(begin, len) += tp.grad(oid);
  });
  return out;
}

Var concat_cols(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "concat_cols");
  require(a.val().rows() == b.val().rows(), "concat_cols: row count mismatch");
  Matrix y(a.val().rows(), a.val().cols() + b.val().cols());
  y << a.val(), b.val();
  Var out = t.make(std::move(y));
  const int aid = a.id, bid = b.id, oid = out.id;
  const int acols = a.cols(), bcols = b.cols();
  t.set_backprop(oid, [aid, bid, oid, acols, bcols](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    tp.grad(aid) += g.leftCols(acols);
    tp.grad(bid) += g.rightCols(bcols);
  });
  return out;
}

Var reshape(const Var& a, int rows, int cols) {
  Tape& t = *a.tape;
  const Matrix& av = a.val();
  require(static_cast<Eigen::Index>(rows) * cols == av.size(),
          "reshape: element count mismatch");
  Matrix y(rows, cols);
  {
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < av.rows(); ++r)
      for (Eigen::Index c = 0; c < av.cols(); ++c, ++k) y(k / cols, k % cols) = av(r, c);
  }
  Var out = t.make(std::move(y));
  const int aid = a.id, oid = out.id;
  t.set_backprop(oid, [aid, oid](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    Matrix& ga = tp.grad(aid);
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < ga.rows(); ++r)
      for (Eigen::Index c = 0; c < ga.cols(); ++c, ++k)
        ga(r, c) += g(k / g.cols(), k % g.cols());
  });
  return out;
}

Var conv1d(const Var& x, const Var& weights, const Var& bias, int t_len,
           int in_ch, int kernel, int stride) {
  Tape& t = same_tape(x, weights, "conv1d");
  require(stride > 0 && kernel > 0 && t_len >= kernel, "conv1d: bad geometry");
  const Matrix& xv = x.val();
  const Matrix& wv = weights.val();
  require(xv.cols() == static_cast<Eigen::Index>(t_len) * in_ch,
          "conv1d: input width must be t_len * in_ch");
  require(wv.rows() == static_cast<Eigen::Index>(kernel) * in_ch,
          "conv1d: weight rows must be kernel * in_ch");
  const int out_ch = static_cast<int>(wv.cols());
  require(bias.val().rows() == 1 && bias.val().cols() == out_ch,
          "conv1d: bias must be 1 x out_ch");
  const int positions = (t_len - kernel) / stride + 1;
  const Eigen::Index batch = xv.rows();

  Matrix y(batch, static_cast<Eigen::Index>(positions) * out_ch);
  const Matrix& bv = bias.val();
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int p = 0; p < positions; ++p)
      for (int co = 0; co < out_ch; ++co) {
        double acc = bv(0, co);
        for (int dt = 0; dt < kernel; ++dt)
          for (int ci = 0; ci < in_ch; ++ci)
            acc += xv(b, (p * stride + dt) * in_ch + ci) * wv(dt * in_ch + ci, co);
        y(b, p * out_ch + co) = acc;
      }
  Var out = t.make(std::move(y));
  const int xid = x.id, wid = weights.id, bid = bias.id, oid = out.id;
  t.set_backprop(oid, [=](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    const Matrix& xv2 = tp.value(xid);
    const Matrix& wv2 = tp.value(wid);
    Matrix& gx = tp.grad(xid);
    Matrix& gw = tp.grad(wid);
    Matrix& gb = tp.grad(bid);
    for (Eigen::Index b = 0; b < xv2.rows(); ++b)
      for (int p = 0; p < positions; ++p)
        for (int co = 0; co < out_ch; ++co) {
          const double go = g(b, p * out_ch + co);
          if (go == 0.0) continue;
          gb(0, co) += go;
          for (int dt = 0; dt < kernel; ++dt)
            for (int ci = 0; ci < in_ch; ++ci) {
              const int xc = (p * stride + dt) * in_ch + ci;
              gx(b, xc) += go * wv2(dt * in_ch + ci, co);
              gw(dt * in_ch + ci, co) += go * xv2(b, xc);
            }
        }
  });
  return out;
}

Var conv2d(const Var& x, const Var& weights, const Var& bias, int grid,
           int in_ch, int kernel, int stride) {
  Tape& t = same_tape(x, weights, "conv2d");
  require(stride > 0 && kernel > 0 && grid >= kernel, "conv2d: bad geometry");
  const Matrix& xv = x.val();
  const Matrix& wv = weights.val();
  require(xv.cols() == static_cast<Eigen::Index>(grid) * grid * in_ch,
          "conv2d: input width must be grid^2 * in_ch");
  require(wv.rows() == static_cast<Eigen::Index>(kernel) * kernel * in_ch,
          "conv2d: weight rows must be kernel^2 * in_ch");
  const int out_ch = static_cast<int>(wv.cols());
  require(bias.val().rows() == 1 && bias.val().cols() == out_ch,
          "conv2d: bias must be 1 x out_ch");
  const int positions = (grid - kernel) / stride + 1;
  const Eigen::Index batch = xv.rows();

  auto xcol = [grid, in_ch](int r, int c, int ci) { return (r * grid + c) * in_ch + ci; };
  Matrix y(batch, static_cast<Eigen::Index>(positions) * positions * out_ch);
  const Matrix& bv = bias.val();
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int pr = 0; pr < positions; ++pr)
      for (int pc = 0; pc < positions; ++pc)
        for (int co = 0; co < out_ch; ++co) {
          double acc = bv(0, co);
          for (int dr = 0; dr < kernel; ++dr)
            for (int dc = 0; dc < kernel; ++dc)
              for (int ci = 0; ci < in_ch; ++ci)
                acc += xv(b, xcol(pr * stride + dr, pc * stride + dc, ci)) *
                       wv((dr * kernel + dc) * in_ch + ci, co);
          y(b, (pr * positions + pc) * out_ch + co) = acc;
        }
  Var out = t.make(std::move(y));
  const int xid = x.id, wid = weights.id, bid = bias.id, oid = out.id;
  t.set_backprop(oid, [=](Tape& tp) {
    const Matrix& g = tp.grad(oid);
    const Matrix& xv2 = tp.value(xid);
    const Matrix& wv2 = tp.value(wid);
    Matrix& gx = tp.grad(xid);
    Matrix& gw = tp.grad(wid);
    Matrix& gb = tp.grad(bid);
    for (Eigen::Index b = 0; b < xv2.rows(); ++b)
      for (int pr = 0; pr < positions; ++pr)
        for (int pc = 0; pc < positions; ++pc)
          for (int co = 0; co < out_ch; ++co) {
            const double go = g(b, (pr * positions + pc) * out_ch + co);
            if (go == 0.0) continue;
            gb(0, co) += go;
            for (int dr = 0; dr < kernel; ++dr)
              for (int dc = 0; dc < kernel; ++dc)
                for (int ci = 0; ci < in_ch; ++ci) {
                  const int xc = xcol(pr * stride + dr, pc * stride + dc, ci);
                  const int wr = (dr * kernel + dc) * in_ch + ci;
                  gx(b, xc) += go * wv2(wr, co);
                  gw(wr, co) += go * xv2(b, xc);
                }
          }
  });
  return out;
}

}  // namespace agil::nn
