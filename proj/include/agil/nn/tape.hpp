#pragma once

#include <functional>
#include <vector>

#include "agil/nn/tensor.hpp"

namespace agil::nn {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid until backward()/clear().
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& val() const;
  int rows() const { return static_cast<int>(val().rows()); }
  int cols() const { return static_cast<int>(val().cols()); }
  double scalar() const;
};

// Reverse-mode tape over dense Eigen matrices. The op set is the closed set
// the losses in this repo need: dense layers (matmul + broadcast bias),
// elementwise ops, softmax/log-softmax, log, exp, square, sqrt, clamp,
// slicing/concat, gather, reductions, and small 1-D/2-D convolutions.
class Tape {
 public:
  // Leaf that never receives gradient.
  Var constant(Matrix value);

  // Parameter leaf viewing `buf` as its shaped matrix; backward() accumulates
  // into buf.gradient.
  Var param(TensorBuffer& buf);

  // Push an op node (used by the op library).
  Var make(Matrix value);
  void set_backprop(int id, std::function<void(Tape&)> fn);

  const Matrix& value(int id) const;
  Matrix& grad(int id);  // lazily zero-initialized

  // Seeds d(loss)/d(loss) = 1 on a 1x1 node, sweeps the tape in reverse, and
  // accumulates parameter gradients into their TensorBuffers. The tape is
  // cleared afterwards; Vars from this tape become invalid. Read the loss
  // value before calling.
  void backward(const Var& scalar_loss);

  int size() const { return static_cast<int>(nodes_.size()); }
  void clear();

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> backprop;  // pulls this node's grad into parents
    TensorBuffer* param = nullptr;        // set for parameter leaves
  };
  std::vector<Node> nodes_;
};

// ---- op library (free functions) ----

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);            // same shape
Var add_rowvec(const Var& a, const Var& bias);  // bias is 1 x cols, broadcast over rows
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var div(const Var& a, const Var& b);  // elementwise
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

Var vtanh(const Var& a);
Var relu(const Var& a);
Var elu(const Var& a);
Var sigmoid(const Var& a);
Var vexp(const Var& a);
Var vlog(const Var& a);
Var square(const Var& a);
Var vsqrt(const Var& a);
Var clamp(const Var& a, double lo, double hi);  // pass-through gradient inside (lo, hi)
Var cwise_min(const Var& a, const Var& b);      // gradient routed to the smaller side (ties -> a)

Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);

Var sum(const Var& a);      // 1x1
Var mean(const Var& a);     // 1x1
Var row_sum(const Var& a);  // n x 1, sums across columns
Var gather_cols(const Var& a, std::vector<int> col_per_row);  // n x 1
Var slice_cols(const Var& a, int begin, int len);
Var concat_cols(const Var& a, const Var& b);

// Row-major semantic reshape: values are read row by row and refilled row by
// row into the new shape.
Var reshape(const Var& a, int rows, int cols);

// 1-D convolution over the time axis. Each input row holds a length-T signal
// with `in_ch` channels laid out time-major: x[t * in_ch + ch]. `weights` is
// (kernel * in_ch) x out_ch, `bias` 1 x out_ch. Output rows are P * out_ch
// with P = (t_len - kernel) / stride + 1, laid out position-major.
Var conv1d(const Var& x, const Var& weights, const Var& bias, int t_len,
           int in_ch, int kernel, int stride);

// 2-D convolution over a square grid. Each input row holds a g x g image with
// `in_ch` channels laid out pixel-major: x[(r * g + c) * in_ch + ch].
// `weights` is (kernel * kernel * in_ch) x out_ch. Output rows are
// P * P * out_ch with P = (g - kernel) / stride + 1.
Var conv2d(const Var& x, const Var& weights, const Var& bias, int grid,
           int in_ch, int kernel, int stride);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator-(const Var& a) { return neg(a); }

}  // namespace agil::nn
