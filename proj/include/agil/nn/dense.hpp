#pragma once

#include <string>
#include <utility>
#include <vector>

#include "agil/nn/tape.hpp"

namespace agil::nn {

enum class Activation { tanh, relu, elu };

struct HeadSpec {
  std::string name;
  int width = 0;
};

// Layer widths include input and output; hidden defaults follow the
// {128, 64, 32} desk-scale stack. Heads, when present, partition the output
// width into named slices.
struct DenseNetSpec {
  std::vector<int> layer_widths;
  Activation activation = Activation::tanh;
  std::vector<HeadSpec> output_heads;

  void validate() const;
  int input_width() const { return layer_widths.front(); }
  int output_width() const { return layer_widths.back(); }
};

// MLP with a linear final layer. Parameters live in an external ParamStore
// under "<prefix>.L<i>.W" / "<prefix>.L<i>.b"; the net itself is an immutable
// description, so frozen copies are just copies of the store.
class DenseNet {
 public:
  DenseNet(ParamStore& store, std::string prefix, DenseNetSpec spec, Rng& rng,
           double final_scale = 1.0);

  Var forward(Tape& tape, ParamStore& store, const Var& input) const;

  // Tape-free evaluation for rollouts. Single-row evaluation is used inside
  // rollout workers so results cannot depend on batching.
  Vector infer(const ParamStore& store, const Vector& input) const;
  Matrix infer(const ParamStore& store, const Matrix& input) const;

  Var head(Tape& tape, const Var& output, const std::string& name) const;
  Vector head(const Vector& output, const std::string& name) const;
  std::pair<int, int> head_range(const std::string& name) const;  // (begin, width)

  const DenseNetSpec& spec() const { return spec_; }
  const std::string& prefix() const { return prefix_; }
  int layer_count() const { return static_cast<int>(spec_.layer_widths.size()) - 1; }
  std::vector<std::string> param_names() const;

 private:
  std::string weight_name(int layer) const;
  std::string bias_name(int layer) const;

  std::string prefix_;
  DenseNetSpec spec_;
};

// Single gated recurrent cell (64 hidden units by default where used).
// Update equations, with x the input row and h the previous hidden row:
//   z = sigmoid(x Wz + h Uz + bz)
//   r = sigmoid(x Wr + h Ur + br)
//   n = tanh(x Wn + (r .* h) Un + bn)
//   h' = (1 - z) .* n + z .* h
class GruCell {
 public:
  GruCell(ParamStore& store, std::string prefix, int input_width, int hidden_width,
          Rng& rng);

  Var step(Tape& tape, ParamStore& store, const Var& x, const Var& h) const;
  Vector step_infer(const ParamStore& store, const Vector& x, const Vector& h) const;

  int input_width() const { return input_width_; }
  int hidden_width() const { return hidden_width_; }
  std::vector<std::string> param_names() const;

 private:
  std::string prefix_;
  int input_width_ = 0;
  int hidden_width_ = 0;
};

}  // namespace agil::nn
