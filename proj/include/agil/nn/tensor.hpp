#pragma once

#include <Eigen/Dense>
#include <numeric>
#include <string>
#include <vector>

#include "agil/core/error.hpp"
#include "agil/core/rng.hpp"

namespace agil::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Named flat parameter array. Matrices are stored row-major in `values`
// (values[r * cols + c]); `gradient` is empty until first use and always
// matches `values` in length afterwards.
struct TensorBuffer {
  std::string name;
  std::vector<int> shape;
  Vector values;
  Vector gradient;

  int size() const { return static_cast<int>(values.size()); }

  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() > 1 ? shape[1] : 1; }

  void ensure_gradient() {
    if (gradient.size() != values.size()) gradient = Vector::Zero(values.size());
  }

  Matrix as_matrix() const {
    Matrix m(rows(), cols());
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) m(r, c) = values[r * m.cols() + c];
    return m;
  }

  void set_from_matrix(const Matrix& m) {
    require(m.rows() == rows() && m.cols() == cols(),
            "TensorBuffer::set_from_matrix: shape mismatch for " + name);
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) values[r * m.cols() + c] = m(r, c);
  }

  void accumulate_gradient(const Matrix& g) {
    ensure_gradient();
    require(g.rows() == rows() && g.cols() == cols(),
            "TensorBuffer::accumulate_gradient: shape mismatch for " + name);
    for (int r = 0; r < g.rows(); ++r)
      for (int c = 0; c < g.cols(); ++c) gradient[r * g.cols() + c] += g(r, c);
  }
};

inline int shape_numel(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    require(d > 0, "shape dimensions must be positive");
    n *= d;
  }
  return n;
}

// Ordered collection of named parameter buffers. Insertion order is the
// checkpoint manifest order, so it must be deterministic.
class ParamStore {
 public:
  TensorBuffer& add(const std::string& name, std::vector<int> shape) {
    require(find_index(name) < 0, "ParamStore::add: duplicate name " + name);
    TensorBuffer buf;
    buf.name = name;
    buf.shape = std::move(shape);
    buf.values = Vector::Zero(shape_numel(buf.shape));
    bufs_.push_back(std::move(buf));
    return bufs_.back();
  }

  TensorBuffer& add_uniform(const std::string& name, std::vector<int> shape,
                            double half_width, Rng& rng) {
    TensorBuffer& buf = add(name, std::move(shape));
    for (int i = 0; i < buf.size(); ++i)
      buf.values[i] = rng.uniform(-half_width, half_width);
    return buf;
  }

  TensorBuffer& operator[](const std::string& name) {
    int i = find_index(name);
    require(i >= 0, "ParamStore: unknown buffer " + name);
    return bufs_[static_cast<std::size_t>(i)];
  }
  const TensorBuffer& operator[](const std::string& name) const {
    int i = find_index(name);
    require(i >= 0, "ParamStore: unknown buffer " + name);
    return bufs_[static_cast<std::size_t>(i)];
  }

  bool contains(const std::string& name) const { return find_index(name) >= 0; }

  std::vector<TensorBuffer>& buffers() { return bufs_; }
  const std::vector<TensorBuffer>& buffers() const { return bufs_; }

  int total_size() const {
    int n = 0;
    for (const auto& b : bufs_) n += b.size();
    return n;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& b : bufs_) s += b.values.squaredNorm();
    return s;
  }

  void zero_gradients() {
    for (auto& b : bufs_) {
      b.ensure_gradient();
      b.gradient.setZero();
    }
  }

 private:
  int find_index(const std::string& name) const {
    for (std::size_t i = 0; i < bufs_.size(); ++i)
      if (bufs_[i].name == name) return static_cast<int>(i);
    return -1;
  }

  std::vector<TensorBuffer> bufs_;
};

}  // namespace agil::nn
