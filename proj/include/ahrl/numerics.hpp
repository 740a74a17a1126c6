#pragma once

// Small dense linear algebra and neural-network kernels with hand-written
// gradients. Only the shapes used in this project are supported: recurrent
// cores with a handful of hidden units and dense heads.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ahrl {

using Vector = std::vector<double>;
using Rng = std::mt19937_64;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transpose() const;
  bool all_finite() const;

  friend Matrix operator*(const Matrix& a, const Matrix& b);
  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Activation { identity, tanh, softmax };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

Vector softmax(std::span<const double> logits);

// y = activation(Wᵀx + b), W stored in×out.
struct DenseLayer {
  Matrix weights;
  Vector bias;
  Activation activation = Activation::identity;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act);

  std::size_t in_size() const noexcept { return weights.rows(); }
  std::size_t out_size() const noexcept { return weights.cols(); }
};

Vector dense_forward(const DenseLayer& layer, std::span<const double> input);
// Wᵀx + b without the activation.
Vector dense_preactivation(const DenseLayer& layer, std::span<const double> input);

// h_t = tanh(W_in·x_t + W_rec·h_{t-1} + b). W_in is hidden×in.
struct RnnCell {
  Matrix input_weights;
  Matrix recurrent_weights;
  Vector bias;

  RnnCell() = default;
  RnnCell(std::size_t in, std::size_t hidden);

  std::size_t hidden_size() const noexcept { return recurrent_weights.rows(); }
  std::size_t input_size() const noexcept { return input_weights.cols(); }
};

Vector rnn_step(const RnnCell& cell, std::span<const double> input, std::span<const double> hidden);
std::vector<Vector> rnn_unroll(const RnnCell& cell, std::span<const Vector> inputs,
                               std::span<const double> h0);

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
void init_uniform(DenseLayer& layer, Rng& rng);
void init_uniform(RnnCell& cell, Rng& rng);

// ---------------------------------------------------------------------------
// Parameters and gradients

struct ParameterBlock {
  std::string name;
  std::span<double> values;
};
using ParameterList = std::vector<ParameterBlock>;

void append_parameters(ParameterList& out, const std::string& prefix, DenseLayer& layer);
void append_parameters(ParameterList& out, const std::string& prefix, RnnCell& cell);

// Partial derivatives of a scalar loss, one block per parameter block, in the
// same order and with the same sizes.
class GradientRecord {
 public:
  struct Block {
    std::string name;
    Vector values;
  };

  GradientRecord() = default;
  static GradientRecord zeros_like(const ParameterList& params);
  static GradientRecord capture(const ParameterList& grads);

  std::size_t size() const noexcept { return blocks_.size(); }
  const Block& operator[](std::size_t i) const { return blocks_[i]; }
  Block& operator[](std::size_t i) { return blocks_[i]; }
  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }

  bool congruent_with(const ParameterList& params) const;
  double max_abs() const;

 private:
  std::vector<Block> blocks_;
};

// Gradient accumulators mirror the layer they differentiate.
struct DenseGradient {
  Matrix weights;
  Vector bias;
  explicit DenseGradient(const DenseLayer& like);
};

struct RnnGradient {
  Matrix input_weights;
  Matrix recurrent_weights;
  Vector bias;
  explicit RnnGradient(const RnnCell& like);
};

void append_parameters(ParameterList& out, const std::string& prefix, DenseGradient& grad);
void append_parameters(ParameterList& out, const std::string& prefix, RnnGradient& grad);

// Accumulates dL/dW, dL/db into `acc` and returns dL/dx. `output` is the value
// previously returned by dense_forward for `input`.
Vector dense_backward(const DenseLayer& layer, std::span<const double> input,
                      std::span<const double> output, std::span<const double> grad_output,
                      DenseGradient& acc);

// Full backpropagation through time. `states[t]` is h_t from rnn_unroll and
// `grad_states[t]` the loss gradient injected directly at h_t (may be shorter
// than `states`; missing entries are zero). Returns dL/dh0.
Vector rnn_backward(const RnnCell& cell, std::span<const Vector> inputs,
                    std::span<const double> h0, const std::vector<Vector>& states,
                    const std::vector<Vector>& grad_states, RnnGradient& acc);

// RNN core with a dense head applied at every step. Records its forward pass
// so that backward() can run BPTT.
class SequenceNetwork {
 public:
  SequenceNetwork() = default;
  SequenceNetwork(RnnCell core, DenseLayer head);
  static SequenceNetwork random(std::size_t in, std::size_t hidden, std::size_t out,
                                Activation head_activation, Rng& rng);

  // Outputs for every step, starting from a zero hidden state.
  const std::vector<Vector>& forward(const std::vector<Vector>& inputs);
  const std::vector<Vector>& hidden_states() const noexcept { return states_; }

  // grad_outputs[t] = dL/dy_t for the last forward pass; entries may be empty.
  GradientRecord backward(const std::vector<Vector>& grad_outputs);

  ParameterList parameters();

  RnnCell core;
  DenseLayer head;

 private:
  std::vector<Vector> inputs_;
  std::vector<Vector> states_;
  std::vector<Vector> outputs_;
  bool recorded_ = false;
};

// ---------------------------------------------------------------------------
// Gradient checking

// Evaluates the loss at the current parameter values. When `grad` is non-null
// the analytic gradient must be written into it.
using LossFunction = std::function<double(GradientRecord* grad)>;

// Central differences on every scalar parameter. Returns
// max |analytic - numeric| / max(1, |numeric|). Parameters are restored.
double finite_diff_check(const ParameterList& params, const LossFunction& loss, double epsilon);

// ---------------------------------------------------------------------------
// Linear algebra

// (XᵀX)⁻¹XᵀY. Throws SingularMatrixError when cond(XᵀX) exceeds 1e12.
Matrix least_squares(const Matrix& x, const Matrix& y);

inline constexpr double kConditionLimit = 1e12;

// ---------------------------------------------------------------------------
// First-order optimizers

enum class UpdateRule { adam, plain };

struct OptimizerSettings {
  UpdateRule rule = UpdateRule::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerSettings settings = {}) : settings_(settings) {}

  void step(const ParameterList& params, const GradientRecord& grads, double learning_rate);
  long steps_taken() const noexcept { return steps_; }
  const OptimizerSettings& settings() const noexcept { return settings_; }

 private:
  OptimizerSettings settings_;
  std::vector<Vector> first_moment_;
  std::vector<Vector> second_moment_;
  long steps_ = 0;
};

// target ← τ·online + (1−τ)·target
void soft_update(const ParameterList& online, const ParameterList& target, double tau);

bool all_finite(std::span<const double> values);

}  // namespace ahrl
