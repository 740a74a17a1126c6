#include "ahrl/numerics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ahrl/errors.hpp"

namespace ahrl {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                     std::to_string(got));
  }
}

void fill_uniform(std::span<double> values, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : values) v = dist(rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Matrix::from_rows: ragged rows");
    std::copy(row.begin(), row.end(), m.row(i++).begin());
  }
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const { return ahrl::all_finite(data_); }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matrix product " + shape_str(a.rows(), a.cols()) + " * " +
                     shape_str(b.rows(), b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Activations and layers

const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "tanh") return Activation::tanh;
  if (name == "softmax") return Activation::softmax;
  throw ContractError("unknown activation '" + name + "'");
}

Vector softmax(std::span<const double> logits) {
  Vector out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double peak = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act)
    : weights(in, out), bias(out, 0.0), activation(act) {}

Vector dense_preactivation(const DenseLayer& layer, std::span<const double> input) {
  require_size(input.size(), layer.in_size(), "dense layer input");
  const std::size_t out_n = layer.out_size();
  Vector z(layer.bias);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double xi = input[i];
    const auto w = layer.weights.row(i);
    for (std::size_t j = 0; j < out_n; ++j) z[j] += w[j] * xi;
  }
  return z;
}

Vector dense_forward(const DenseLayer& layer, std::span<const double> input) {
  Vector z = dense_preactivation(layer, input);
  switch (layer.activation) {
    case Activation::identity: break;
    case Activation::tanh:
      for (double& v : z) v = std::tanh(v);
      break;
    case Activation::softmax: z = softmax(z); break;
  }
  if (!all_finite(z)) throw NumericError("dense_forward produced a non-finite output");
  return z;
}

Vector dense_backward(const DenseLayer& layer, std::span<const double> input,
                      std::span<const double> output, std::span<const double> grad_output,
                      DenseGradient& acc) {
  const std::size_t out_n = layer.out_size();
  require_size(input.size(), layer.in_size(), "dense_backward input");
  require_size(output.size(), out_n, "dense_backward output");
  require_size(grad_output.size(), out_n, "dense_backward gradient");

  Vector dz(out_n);
  switch (layer.activation) {
    case Activation::identity:
      std::copy(grad_output.begin(), grad_output.end(), dz.begin());
      break;
    case Activation::tanh:
      for (std::size_t j = 0; j < out_n; ++j) dz[j] = grad_output[j] * (1.0 - output[j] * output[j]);
      break;
    case Activation::softmax: {
      double dot = 0.0;
      for (std::size_t j = 0; j < out_n; ++j) dot += output[j] * grad_output[j];
      for (std::size_t j = 0; j < out_n; ++j) dz[j] = output[j] * (grad_output[j] - dot);
      break;
    }
  }

  Vector dx(input.size(), 0.0);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const auto w = layer.weights.row(i);
    auto gw = acc.weights.row(i);
    const double xi = input[i];
    double s = 0.0;
    for (std::size_t j = 0; j < out_n; ++j) {
      gw[j] += xi * dz[j];
      s += w[j] * dz[j];
    }
    dx[i] = s;
  }
  for (std::size_t j = 0; j < out_n; ++j) acc.bias[j] += dz[j];
  return dx;
}

RnnCell::RnnCell(std::size_t in, std::size_t hidden)
    : input_weights(hidden, in), recurrent_weights(hidden, hidden), bias(hidden, 0.0) {}

Vector rnn_step(const RnnCell& cell, std::span<const double> input, std::span<const double> hidden) {
  const std::size_t n = cell.hidden_size();
  require_size(input.size(), cell.input_size(), "rnn input");
  require_size(hidden.size(), n, "rnn hidden state");
  Vector h(n);
  for (std::size_t k = 0; k < n; ++k) {
    double a = cell.bias[k];
    const auto wi = cell.input_weights.row(k);
    for (std::size_t i = 0; i < input.size(); ++i) a += wi[i] * input[i];
    const auto wr = cell.recurrent_weights.row(k);
    for (std::size_t i = 0; i < n; ++i) a += wr[i] * hidden[i];
    h[k] = std::tanh(a);
  }
  return h;
}

std::vector<Vector> rnn_unroll(const RnnCell& cell, std::span<const Vector> inputs,
                               std::span<const double> h0) {
  require_size(h0.size(), cell.hidden_size(), "rnn initial state");
  std::vector<Vector> states;
  states.reserve(inputs.size());
  for (const auto& x : inputs) {
    states.push_back(rnn_step(cell, x, states.empty() ? h0 : std::span<const double>(states.back())));
  }
  return states;
}

Vector rnn_backward(const RnnCell& cell, std::span<const Vector> inputs,
                    std::span<const double> h0, const std::vector<Vector>& states,
                    const std::vector<Vector>& grad_states, RnnGradient& acc) {
  const std::size_t n = cell.hidden_size();
  if (states.size() != inputs.size()) throw ShapeError("rnn_backward: states/inputs length mismatch");
  Vector carry(n, 0.0);
  Vector da(n);
  for (std::size_t t = states.size(); t-- > 0;) {
    const Vector& h = states[t];
    if (t < grad_states.size() && !grad_states[t].empty()) {
      require_size(grad_states[t].size(), n, "rnn_backward gradient");
      for (std::size_t k = 0; k < n; ++k) carry[k] += grad_states[t][k];
    }
    for (std::size_t k = 0; k < n; ++k) da[k] = carry[k] * (1.0 - h[k] * h[k]);

    const std::span<const double> prev = t == 0 ? h0 : std::span<const double>(states[t - 1]);
    const Vector& x = inputs[t];
    for (std::size_t k = 0; k < n; ++k) {
      const double g = da[k];
      acc.bias[k] += g;
      if (g == 0.0) continue;
      auto gi = acc.input_weights.row(k);
      for (std::size_t i = 0; i < x.size(); ++i) gi[i] += g * x[i];
      auto gr = acc.recurrent_weights.row(k);
      for (std::size_t i = 0; i < n; ++i) gr[i] += g * prev[i];
    }
    std::fill(carry.begin(), carry.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const auto wr = cell.recurrent_weights.row(k);
      for (std::size_t i = 0; i < n; ++i) carry[i] += wr[i] * da[k];
    }
  }
  return carry;
}

void init_uniform(DenseLayer& layer, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(layer.in_size(), 1)));
  fill_uniform(layer.weights.data(), bound, rng);
  fill_uniform(layer.bias, bound, rng);
}

void init_uniform(RnnCell& cell, Rng& rng) {
  const double fan_in = static_cast<double>(cell.input_size() + cell.hidden_size());
  const double bound = 1.0 / std::sqrt(std::max(fan_in, 1.0));
  fill_uniform(cell.input_weights.data(), bound, rng);
  fill_uniform(cell.recurrent_weights.data(), bound, rng);
  fill_uniform(cell.bias, bound, rng);
}

// ---------------------------------------------------------------------------
// Parameters and gradients

void append_parameters(ParameterList& out, const std::string& prefix, DenseLayer& layer) {
  out.push_back({prefix + ".weights", layer.weights.data()});
  out.push_back({prefix + ".bias", layer.bias});
}

void append_parameters(ParameterList& out, const std::string& prefix, RnnCell& cell) {
  out.push_back({prefix + ".input_weights", cell.input_weights.data()});
  out.push_back({prefix + ".recurrent_weights", cell.recurrent_weights.data()});
  out.push_back({prefix + ".bias", cell.bias});
}

void append_parameters(ParameterList& out, const std::string& prefix, DenseGradient& grad) {
  out.push_back({prefix + ".weights", grad.weights.data()});
  out.push_back({prefix + ".bias", grad.bias});
}

void append_parameters(ParameterList& out, const std::string& prefix, RnnGradient& grad) {
  out.push_back({prefix + ".input_weights", grad.input_weights.data()});
  out.push_back({prefix + ".recurrent_weights", grad.recurrent_weights.data()});
  out.push_back({prefix + ".bias", grad.bias});
}

DenseGradient::DenseGradient(const DenseLayer& like)
    : weights(like.weights.rows(), like.weights.cols()), bias(like.bias.size(), 0.0) {}

RnnGradient::RnnGradient(const RnnCell& like)
    : input_weights(like.input_weights.rows(), like.input_weights.cols()),
      recurrent_weights(like.recurrent_weights.rows(), like.recurrent_weights.cols()),
      bias(like.bias.size(), 0.0) {}

GradientRecord GradientRecord::zeros_like(const ParameterList& params) {
  GradientRecord g;
  g.blocks_.reserve(params.size());
  for (const auto& p : params) g.blocks_.push_back({p.name, Vector(p.values.size(), 0.0)});
  return g;
}

GradientRecord GradientRecord::capture(const ParameterList& grads) {
  GradientRecord g;
  g.blocks_.reserve(grads.size());
  for (const auto& p : grads) g.blocks_.push_back({p.name, Vector(p.values.begin(), p.values.end())});
  return g;
}

bool GradientRecord::congruent_with(const ParameterList& params) const {
  if (params.size() != blocks_.size()) return false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].values.size() != blocks_[i].values.size()) return false;
  }
  return true;
}

double GradientRecord::max_abs() const {
  double m = 0.0;
  for (const auto& b : blocks_)
    for (double v : b.values) m = std::max(m, std::abs(v));
  return m;
}

// ---------------------------------------------------------------------------
// SequenceNetwork

SequenceNetwork::SequenceNetwork(RnnCell core_cell, DenseLayer head_layer)
    : core(std::move(core_cell)), head(std::move(head_layer)) {
  if (head.in_size() != core.hidden_size()) {
    throw ShapeError("SequenceNetwork: head input " + std::to_string(head.in_size()) +
                     " does not match hidden size " + std::to_string(core.hidden_size()));
  }
}

SequenceNetwork SequenceNetwork::random(std::size_t in, std::size_t hidden, std::size_t out,
                                        Activation head_activation, Rng& rng) {
  RnnCell cell(in, hidden);
  DenseLayer layer(hidden, out, head_activation);
  init_uniform(cell, rng);
  init_uniform(layer, rng);
  return SequenceNetwork(std::move(cell), std::move(layer));
}

const std::vector<Vector>& SequenceNetwork::forward(const std::vector<Vector>& inputs) {
  inputs_ = inputs;
  const Vector h0(core.hidden_size(), 0.0);
  states_ = rnn_unroll(core, inputs_, h0);
  outputs_.clear();
  outputs_.reserve(states_.size());
  for (const auto& h : states_) outputs_.push_back(dense_forward(head, h));
  recorded_ = true;
  return outputs_;
}

GradientRecord SequenceNetwork::backward(const std::vector<Vector>& grad_outputs) {
  if (!recorded_) throw StateError("SequenceNetwork::backward called without a recorded forward pass");
  if (grad_outputs.size() > outputs_.size()) throw ShapeError("SequenceNetwork::backward: too many output gradients");

  RnnGradient core_grad(core);
  DenseGradient head_grad(head);
  std::vector<Vector> grad_states(states_.size());
  for (std::size_t t = 0; t < grad_outputs.size(); ++t) {
    if (grad_outputs[t].empty()) continue;
    grad_states[t] = dense_backward(head, states_[t], outputs_[t], grad_outputs[t], head_grad);
  }
  const Vector h0(core.hidden_size(), 0.0);
  rnn_backward(core, inputs_, h0, states_, grad_states, core_grad);

  ParameterList views;
  append_parameters(views, "core", core_grad);
  append_parameters(views, "head", head_grad);
  return GradientRecord::capture(views);
}

ParameterList SequenceNetwork::parameters() {
  ParameterList list;
  append_parameters(list, "core", core);
  append_parameters(list, "head", head);
  return list;
}

// ---------------------------------------------------------------------------
// Gradient checking

double finite_diff_check(const ParameterList& params, const LossFunction& loss, double epsilon) {
  if (!(epsilon > 0.0) || epsilon > 1e-2) throw ContractError("finite_diff_check: epsilon must lie in (0, 1e-2]");
  GradientRecord analytic = GradientRecord::zeros_like(params);
  loss(&analytic);
  if (!analytic.congruent_with(params)) throw ShapeError("finite_diff_check: gradient not congruent with parameters");

  double worst = 0.0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto values = params[b].values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double plus = loss(nullptr);
      values[i] = saved - epsilon;
      const double minus = loss(nullptr);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double err = std::abs(analytic[b].values[i] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Linear algebra

Matrix least_squares(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) throw ShapeError("least_squares: X and Y row counts differ");
  if (x.rows() < x.cols()) throw ShapeError("least_squares: underdetermined system " + shape_str(x.rows(), x.cols()));
  if (x.cols() == 0) return Matrix(0, y.cols());

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> xm(x.data().data(), static_cast<Eigen::Index>(x.rows()),
                                      static_cast<Eigen::Index>(x.cols()));
  const Eigen::Map<const RowMajor> ym(y.data().data(), static_cast<Eigen::Index>(y.rows()),
                                      static_cast<Eigen::Index>(y.cols()));

  // cond(XᵀX) = cond(X)²
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(xm);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || (smax / smin) * (smax / smin) > kConditionLimit) {
    std::ostringstream msg;
    msg << "least_squares: XᵀX is singular (condition estimate "
        << (smin > 0.0 ? (smax / smin) * (smax / smin) : INFINITY) << ")";
    throw SingularMatrixError(msg.str());
  }

  const Eigen::MatrixXd coef = xm.householderQr().solve(ym);
  Matrix out(x.cols(), y.cols());
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c)
      out(r, c) = coef(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  if (!out.all_finite()) throw NumericError("least_squares: non-finite coefficients");
  return out;
}

// ---------------------------------------------------------------------------
// Optimizers

void Optimizer::step(const ParameterList& params, const GradientRecord& grads, double learning_rate) {
  if (!(learning_rate > 0.0)) throw ContractError("optimizer_step: learning rate must be positive");
  if (!grads.congruent_with(params)) throw ShapeError("optimizer_step: gradient not congruent with parameters");
  for (std::size_t b = 0; b < grads.size(); ++b) {
    const auto& g = grads[b].values;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("non-finite gradient at " + params[b].name + "[" + std::to_string(i) + "]");
      }
    }
  }

  ++steps_;
  if (settings_.rule == UpdateRule::plain) {
    for (std::size_t b = 0; b < grads.size(); ++b) {
      auto values = params[b].values;
      const auto& g = grads[b].values;
      for (std::size_t i = 0; i < g.size(); ++i) values[i] -= learning_rate * g[i];
    }
    return;
  }

  if (first_moment_.empty()) {
    for (const auto& block : grads) {
      first_moment_.emplace_back(block.values.size(), 0.0);
      second_moment_.emplace_back(block.values.size(), 0.0);
    }
  }
  const double b1 = settings_.beta1;
  const double b2 = settings_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t b = 0; b < grads.size(); ++b) {
    auto values = params[b].values;
    const auto& g = grads[b].values;
    auto& m = first_moment_[b];
    auto& v = second_moment_[b];
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      values[i] -= learning_rate * mhat / (std::sqrt(vhat) + settings_.epsilon);
    }
  }
}

void soft_update(const ParameterList& online, const ParameterList& target, double tau) {
  if (online.size() != target.size()) throw ShapeError("soft_update: parameter sets differ");
  for (std::size_t b = 0; b < online.size(); ++b) {
    auto src = online[b].values;
    auto dst = target[b].values;
    if (src.size() != dst.size()) throw ShapeError("soft_update: block " + online[b].name + " differs in size");
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = tau * src[i] + (1.0 - tau) * dst[i];
  }
}

}  // namespace ahrl
