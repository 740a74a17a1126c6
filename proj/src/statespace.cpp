#include "ahrl/statespace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "ahrl/errors.hpp"

namespace ahrl {

namespace {

constexpr std::size_t kTemplateSize = 12;
constexpr double kBaseConcentration = 0.3;
constexpr double kTraitConcentration = 6.0;

// Category membership per trait, fixed for the lifetime of the program.
const std::array<std::array<std::size_t, kTemplateSize>, kTraitCount>& trait_templates() {
  static const auto templates = [] {
    std::array<std::array<std::size_t, kTemplateSize>, kTraitCount> t{};
    Rng rng(0x7a11c0de);
    std::vector<std::size_t> order(kTransactionCategories);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < kTraitCount; ++k)
      for (std::size_t i = 0; i < kTemplateSize; ++i) t[k][i] = order[k * kTemplateSize + i];
    return t;
  }();
  return templates;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void put(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, ",%.17g", v);
  out << buf;
}

using Json = nlohmann::ordered_json;

Json matrix_json(const Matrix& m) {
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

Matrix matrix_from(const Json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.size()) throw ShapeError("model file: matrix data does not match its shape");
  std::copy(data.begin(), data.end(), m.data().begin());
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Synthetic data

LabeledHistory synth_transactions(const PersonalityVector& profile, std::uint64_t seed) {
  Vector alpha(kTransactionCategories, kBaseConcentration);
  const auto& templates = trait_templates();
  for (std::size_t k = 0; k < kTraitCount; ++k)
    for (std::size_t c : templates[k]) alpha[c] += kTraitConcentration * profile[k];

  Rng rng(seed);
  TransactionHistory history;
  for (std::size_t t = 0; t < kTransactionSteps; ++t) {
    Vector step(kTransactionCategories);
    double total = 0.0;
    for (std::size_t c = 0; c < kTransactionCategories; ++c) {
      std::gamma_distribution<double> g(alpha[c], 1.0);
      step[c] = g(rng);
      total += step[c];
    }
    for (double& v : step) v /= total;
    history.steps.push_back(std::move(step));
  }
  return {std::move(history), profile, profile.dominant()};
}

PersonalityVector synth_profile(Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, kTraitCount - 1);
  std::uniform_real_distribution<double> high(0.6, 1.0), low(0.0, 0.35);
  const std::size_t dominant = pick(rng);
  std::array<double, kTraitCount> v{};
  for (std::size_t k = 0; k < kTraitCount; ++k) v[k] = k == dominant ? high(rng) : low(rng);
  return PersonalityVector(v);
}

std::vector<LabeledHistory> synth_dataset(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledHistory> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const PersonalityVector p = synth_profile(rng);
    out.push_back(synth_transactions(p, rng()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model

PersonalityRnn::PersonalityRnn(RnnCell core, DenseLayer head, bool trained)
    : core_(std::move(core)), head_(std::move(head)), trained_(trained) {
  if (head_.in_size() != core_.hidden_size()) throw ShapeError("PersonalityRnn: head does not match the core");
}

Vector personality_target(const PersonalityRnn& model, const PersonalityVector& p) {
  if (model.head().activation == Activation::softmax) {
    const auto& w = orchestration_prior(p).weights();
    return Vector(w.begin(), w.end());
  }
  return Vector(p.values().begin(), p.values().end());
}

PersonalityRnn PersonalityRnn::random(Rng& rng, Activation head_activation, std::size_t inputs, std::size_t hidden) {
  RnnCell core(inputs, hidden);
  DenseLayer head(hidden, kTraitCount, head_activation);
  init_uniform(core, rng);
  init_uniform(head, rng);
  return PersonalityRnn(std::move(core), std::move(head), false);
}

std::vector<Vector> PersonalityRnn::states(const std::vector<Vector>& inputs) const {
  return rnn_unroll(core_, inputs, Vector(core_.hidden_size(), 0.0));
}

Vector PersonalityRnn::predict(const TransactionHistory& history) const {
  if (history.steps.empty()) throw ContractError("PersonalityRnn: empty history");
  return output(states(history.steps).back());
}

ParameterList PersonalityRnn::parameters() {
  ParameterList list;
  append_parameters(list, "core", core_);
  append_parameters(list, "head", head_);
  return list;
}

double personality_loss(PersonalityRnn& model, const std::vector<LabeledHistory>& data, GradientRecord* grad) {
  if (data.empty()) throw ContractError("personality_loss: empty dataset");
  const std::size_t outputs = model.output_size();
  if (outputs != kTraitCount) throw ShapeError("personality_loss: model must output five traits");
  const double scale = 1.0 / static_cast<double>(data.size() * outputs);
  RnnGradient core_grad(model.core());
  DenseGradient head_grad(model.head());
  const Vector h0(model.core().hidden_size(), 0.0);
  double loss = 0.0;
  for (const auto& sample : data) {
    const auto& inputs = sample.history.steps;
    const auto states = rnn_unroll(model.core(), inputs, h0);
    const Vector y = dense_forward(model.head(), states.back());
    const Vector target = personality_target(model, sample.personality);
    Vector dy(outputs);
    for (std::size_t k = 0; k < outputs; ++k) {
      const double d = y[k] - target[k];
      loss += d * d * scale;
      dy[k] = 2.0 * d * scale;
    }
    if (grad == nullptr) continue;
    std::vector<Vector> grad_states(states.size());
    grad_states.back() = dense_backward(model.head(), states.back(), y, dy, head_grad);
    rnn_backward(model.core(), inputs, h0, states, grad_states, core_grad);
  }
  if (!std::isfinite(loss)) throw NumericError("personality_loss: non-finite loss");
  if (grad != nullptr) {
    ParameterList views;
    append_parameters(views, "core", core_grad);
    append_parameters(views, "head", head_grad);
    *grad = GradientRecord::capture(views);
  }
  return loss;
}

PersonalityTrainResult train_personality_rnn(const std::vector<LabeledHistory>& data,
                                             const PersonalityTrainConfig& config) {
  if (data.empty()) throw ContractError("train_personality_rnn: empty dataset");
  if (!(config.learning_rate > 0.0)) throw ContractError("train_personality_rnn: learning rate must be positive");
  Rng rng(config.seed);
  PersonalityTrainResult result;
  result.model = PersonalityRnn::random(rng);
  Optimizer opt(OptimizerSettings{config.update_rule});
  const std::size_t batch = config.batch_size == 0 ? data.size() : std::min(config.batch_size, data.size());
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<LabeledHistory> chunk;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    result.loss_history.push_back(personality_loss(result.model, data, nullptr));
    if (batch < data.size()) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < data.size(); start += batch) {
      chunk.clear();
      for (std::size_t i = start; i < std::min(start + batch, data.size()); ++i) chunk.push_back(data[order[i]]);
      GradientRecord grad;
      personality_loss(result.model, chunk, &grad);
      opt.step(result.model.parameters(), grad, config.learning_rate);
    }
  }
  result.model.mark_trained();
  return result;
}

double dominant_accuracy(const PersonalityRnn& model, const std::vector<LabeledHistory>& data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : data) hits += argmax(model.predict(s.history)) == index(s.dominant);
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Trajectories

BehavioralTrajectory extract_trajectory(const PersonalityRnn& rnn, const TransactionHistory& history) {
  if (!rnn.trained()) throw StateError("extract_trajectory: personality model is not trained");
  BehavioralTrajectory out;
  out.states = rnn.states(history.steps);
  if (!out.states.empty()) out.dominant = static_cast<Trait>(argmax(rnn.output(out.states.back())));
  return out;
}

BehavioralTrajectory converge_trajectory(const PersonalityRnn& rnn, const TransactionHistory& history,
                                         std::size_t repeats) {
  if (repeats == 0) throw ContractError("converge_trajectory: repeats must be positive");
  if (history.steps.empty()) throw ContractError("converge_trajectory: empty history");
  const std::vector<Vector> inputs(repeats, history.steps.front());
  BehavioralTrajectory out;
  out.states = rnn.states(inputs);
  out.dominant = static_cast<Trait>(argmax(rnn.output(out.states.back())));
  return out;
}

// ---------------------------------------------------------------------------
// Attractors

std::size_t AttractorSet::nearest(std::span<const double> state) const {
  if (attractors.empty()) throw StateError("AttractorSet: no attractors");
  std::size_t best = 0;
  double best_d = INFINITY;
  for (std::size_t i = 0; i < attractors.size(); ++i) {
    const auto& a = attractors[i];
    double d = 0.0;
    if (a.kind == AttractorKind::line) {
      // Distance to the line through `location` along `direction`.
      double along = 0.0;
      for (std::size_t k = 0; k < 3; ++k) along += (state[k] - a.location[k]) * a.direction[k];
      for (std::size_t k = 0; k < 3; ++k) {
        const double r = state[k] - a.location[k] - along * a.direction[k];
        d += r * r;
      }
    } else {
      for (std::size_t k = 0; k < 3; ++k) d += (state[k] - a.location[k]) * (state[k] - a.location[k]);
    }
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Spread principal_spread(const std::vector<Vector>& points) {
  Spread out;
  if (points.size() < 2) return out;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += Eigen::Vector3d(p[0], p[1], p[2]);
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = Eigen::Vector3d(p[0], p[1], p[2]) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size() - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  // Eigenvalues ascend.
  for (int k = 0; k < 3; ++k) out.spreads[static_cast<std::size_t>(k)] = std::sqrt(std::max(0.0, eig.eigenvalues()(2 - k)));
  for (int k = 0; k < 3; ++k) out.axis[static_cast<std::size_t>(k)] = eig.eigenvectors()(k, 2);
  return out;
}

AttractorSet estimate_attractors(const PersonalityRnn& rnn, const AttractorOptions& options) {
  if (!rnn.trained()) throw StateError("estimate_attractors: personality model is not trained");
  if (rnn.core().hidden_size() != 3) throw ShapeError("estimate_attractors: state space must be three-dimensional");
  if (options.grid_points < 8) throw ContractError("estimate_attractors: at least the 8 cube corners are required");
  const std::size_t p = rnn.output_size();
  const std::size_t k_points = options.grid_points;
  if (k_points < p + 1) throw ContractError("estimate_attractors: too few grid points for the output dimension");

  AttractorSet set;
  set.grid = Matrix(k_points, 3);
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t d = 0; d < 3; ++d) set.grid(c, d) = (c >> d) & 1U ? 1.0 : -1.0;
  Rng rng(options.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t r = 8; r < k_points; ++r)
    for (std::size_t d = 0; d < 3; ++d) set.grid(r, d) = u(rng);

  // Softmax rows sum to one and already carry the intercept.
  const bool intercept = rnn.head().activation != Activation::softmax;
  const std::size_t offset = intercept ? 1 : 0;
  set.intercept = intercept;
  set.outputs = Matrix(k_points, p);
  Matrix design(k_points, p + offset);
  for (std::size_t r = 0; r < k_points; ++r) {
    const Vector o = rnn.output(set.grid.row(r));
    if (intercept) design(r, 0) = 1.0;
    for (std::size_t j = 0; j < p; ++j) set.outputs(r, j) = design(r, j + offset) = o[j];
  }
  set.inverse = least_squares(design, set.grid);

  set.extremes.assign(p, -INFINITY);
  for (std::size_t r = 0; r < k_points; ++r)
    for (std::size_t j = 0; j < p; ++j) set.extremes[j] = std::max(set.extremes[j], set.outputs(r, j));

  // 𝒟·ω_inv − 0·ω_inv: with an intercept row the offset cancels, leaving
  // max_j times the slope row of output j.
  for (std::size_t j = 0; j < p; ++j) {
    Attractor a;
    a.trait = static_cast<Trait>(std::min(j, kTraitCount - 1));
    for (std::size_t d = 0; d < 3; ++d)
      a.location[d] = std::clamp(set.extremes[j] * set.inverse(j + offset, d), -1.0, 1.0);
    set.attractors.push_back(a);
  }

  if (!options.probes.empty()) {
    std::vector<std::vector<Vector>> clusters(p);
    for (const auto& h : options.probes) {
      const auto traj = converge_trajectory(rnn, h, options.repeats);
      clusters[set.nearest(traj.states.back())].push_back(traj.states.back());
    }
    for (std::size_t j = 0; j < p; ++j) {
      if (clusters[j].size() < 3) continue;
      const Spread s = principal_spread(clusters[j]);
      if (s.spreads[1] > 0.0 ? s.spreads[0] / s.spreads[1] > options.line_ratio : s.spreads[0] > 0.0) {
        set.attractors[j].kind = AttractorKind::line;
        set.attractors[j].direction = s.axis;
      }
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// Exports

void write_trajectory_csv(std::ostream& out, const std::string& customer_id, const BehavioralTrajectory& trajectory,
                          bool header) {
  if (header) out << "customer_id,step,h0,h1,h2,dominant_trait\n";
  for (std::size_t t = 0; t < trajectory.states.size(); ++t) {
    out << customer_id << ',' << t;
    for (double v : trajectory.states[t]) put(out, v);
    out << ',' << trait_name(trajectory.dominant) << '\n';
  }
}

void write_attractor_csv(std::ostream& out, const AttractorSet& set) {
  out << "trait,kind,x0,y0,z0,dx,dy,dz\n";
  for (const auto& a : set.attractors) {
    out << trait_name(a.trait) << ',' << (a.kind == AttractorKind::line ? "line" : "point");
    for (double v : a.location) put(out, v);
    if (a.kind == AttractorKind::line) {
      for (double v : a.direction) put(out, v);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
}

std::string personality_model_to_string(const PersonalityRnn& rnn) {
  Json j;
  j["format"] = "ahrl-personality-model";
  j["version"] = 1;
  j["trained"] = rnn.trained();
  j["core"] = {{"input_weights", matrix_json(rnn.core().input_weights)},
               {"recurrent_weights", matrix_json(rnn.core().recurrent_weights)},
               {"bias", rnn.core().bias}};
  j["head"] = {{"weights", matrix_json(rnn.head().weights)},
               {"bias", rnn.head().bias},
               {"activation", to_string(rnn.head().activation)}};
  return j.dump(1) + "\n";
}

PersonalityRnn personality_model_from_string(const std::string& text) {
  try {
    const Json j = Json::parse(text);
    if (j.at("format").get<std::string>() != "ahrl-personality-model") throw ContractError("not a personality model file");
    if (j.at("version").get<int>() != 1) throw ContractError("unsupported personality model version");
    RnnCell core;
    core.input_weights = matrix_from(j.at("core").at("input_weights"));
    core.recurrent_weights = matrix_from(j.at("core").at("recurrent_weights"));
    core.bias = j.at("core").at("bias").get<Vector>();
    if (core.input_weights.rows() != core.hidden_size() || core.recurrent_weights.cols() != core.hidden_size() ||
        core.bias.size() != core.hidden_size()) {
      throw ShapeError("model file: inconsistent recurrent core shapes");
    }
    DenseLayer head;
    head.weights = matrix_from(j.at("head").at("weights"));
    head.bias = j.at("head").at("bias").get<Vector>();
    head.activation = activation_from_string(j.at("head").at("activation").get<std::string>());
    if (head.bias.size() != head.out_size()) throw ShapeError("model file: inconsistent head shapes");
    return PersonalityRnn(std::move(core), std::move(head), j.at("trained").get<bool>());
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("malformed personality model: ") + e.what());
  }
}

void save_personality_model(const std::string& path, const PersonalityRnn& rnn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write personality model '" + path + "'");
  out << personality_model_to_string(rnn);
  if (!out) throw IoError("failed writing personality model '" + path + "'");
}

PersonalityRnn load_personality_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open personality model '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return personality_model_from_string(ss.str());
  } catch (const ContractError& e) {
    throw ContractError(path + ": " + e.what());
  }
}

}  // namespace ahrl
