#include "ahrl/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "ahrl/errors.hpp"

namespace ahrl {

namespace {

// Transitions of one batch that share an observation trace; each group is
// unrolled once up to its furthest step.
struct TraceGroup {
  const ObservationTrace* trace = nullptr;
  std::vector<std::size_t> members;
  std::size_t last_step = 0;
};

std::vector<TraceGroup> group_by_trace(std::span<const Transition> batch) {
  std::vector<TraceGroup> groups;
  std::unordered_map<const ObservationTrace*, std::size_t> slot;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const ObservationTrace* key = batch[i].trace.get();
    if (key == nullptr) throw ContractError("transition without an observation trace");
    auto [it, inserted] = slot.emplace(key, groups.size());
    if (inserted) groups.push_back({key, {}, 0});
    TraceGroup& g = groups[it->second];
    g.members.push_back(i);
    g.last_step = std::max(g.last_step, batch[i].step);
  }
  return groups;
}

std::span<const Vector> prefix(const ObservationTrace& trace, std::size_t count) {
  if (count > trace.observations.size()) throw ContractError("observation trace shorter than transition step");
  return {trace.observations.data(), count};
}

// Forward values of the critic head [h, a] → tanh layer → linear output.
struct CriticHeadPass {
  Vector input;
  Vector activations;
  double q = 0.0;
};

CriticHeadPass critic_head_forward(const DenseLayer& hidden, const DenseLayer& output, std::span<const double> state,
                                   std::span<const double> action) {
  CriticHeadPass pass;
  pass.input.reserve(state.size() + action.size());
  pass.input.insert(pass.input.end(), state.begin(), state.end());
  pass.input.insert(pass.input.end(), action.begin(), action.end());
  pass.activations = dense_forward(hidden, pass.input);
  pass.q = dense_forward(output, pass.activations)[0];
  return pass;
}

// dq/d[h, a] for an upstream gradient `dq`; accumulates parameter gradients
// when accumulators are supplied.
Vector critic_head_backward(const DenseLayer& hidden, const DenseLayer& output, const CriticHeadPass& pass, double dq,
                            DenseGradient* hidden_grad, DenseGradient* output_grad) {
  const std::size_t units = hidden.out_size();
  Vector g(units);
  const auto w2 = output.weights.data();
  for (std::size_t k = 0; k < units; ++k) {
    const double z = pass.activations[k];
    g[k] = dq * w2[k] * (1.0 - z * z);
  }
  if (output_grad != nullptr) {
    auto gw2 = output_grad->weights.data();
    for (std::size_t k = 0; k < units; ++k) gw2[k] += dq * pass.activations[k];
    output_grad->bias[0] += dq;
  }
  Vector dx(pass.input.size(), 0.0);
  for (std::size_t i = 0; i < pass.input.size(); ++i) {
    const auto w1 = hidden.weights.row(i);
    double s = 0.0;
    for (std::size_t k = 0; k < units; ++k) s += w1[k] * g[k];
    dx[i] = s;
    if (hidden_grad != nullptr) {
      auto gw1 = hidden_grad->weights.row(i);
      const double xi = pass.input[i];
      if (xi != 0.0)
        for (std::size_t k = 0; k < units; ++k) gw1[k] += xi * g[k];
    }
  }
  if (hidden_grad != nullptr)
    for (std::size_t k = 0; k < units; ++k) hidden_grad->bias[k] += g[k];
  return dx;
}

ActionArray to_action_array(std::span<const double> v) {
  ActionArray a{};
  std::copy(v.begin(), v.end(), a.begin());
  return a;
}

void check_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericError(std::string(what) + " is not finite");
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ContractError("TrainConfig: " + msg); };
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must lie in (0,1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0,1]");
  if (!(lambda >= 0.0)) fail("lambda must be non-negative");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) fail("learning rates must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (replay_capacity == 0) fail("replay_capacity must be positive");
  if (!(noise_scale >= 0.0) || !(noise_floor >= 0.0)) fail("noise must be non-negative");
  if (actor_hidden == 0 || critic_core_hidden == 0 || critic_hidden == 0) fail("layer sizes must be positive");
}

double TrainConfig::noise_at(std::size_t episode) const {
  if (episodes <= 1) return noise_scale;
  const double frac = static_cast<double>(std::min(episode, episodes - 1)) / static_cast<double>(episodes - 1);
  return noise_scale + (noise_floor - noise_scale) * frac;
}

// ---------------------------------------------------------------------------
// Actor

ActorNetwork::ActorNetwork(RnnCell core, DenseLayer head) : core_(std::move(core)), head_(std::move(head)) {
  if (head_.in_size() != core_.hidden_size() || head_.out_size() != kActionCount) {
    throw ShapeError("ActorNetwork: head must map the hidden state to 5 actions");
  }
  head_.activation = Activation::softmax;
}

ActorNetwork ActorNetwork::random(std::size_t observation_size, Rng& rng, std::size_t hidden) {
  RnnCell core(observation_size, hidden);
  DenseLayer head(hidden, kActionCount, Activation::softmax);
  init_uniform(core, rng);
  init_uniform(head, rng);
  return ActorNetwork(std::move(core), std::move(head));
}

ActorNetwork ActorNetwork::zeros(std::size_t observation_size, std::size_t hidden) {
  return ActorNetwork(RnnCell(observation_size, hidden), DenseLayer(hidden, kActionCount, Activation::softmax));
}

Vector ActorNetwork::step_logits(std::span<const double> observation, Vector& hidden) const {
  hidden = rnn_step(core_, observation, hidden);
  return dense_preactivation(head_, hidden);
}

ParameterList ActorNetwork::parameters() {
  ParameterList list;
  append_parameters(list, "core", core_);
  append_parameters(list, "head", head_);
  return list;
}

ActionArray act(const ActorNetwork& actor, const std::vector<Vector>& history) {
  if (history.empty()) throw ContractError("act: observation history is empty");
  Vector hidden = actor.initial_state();
  Vector logits;
  for (const auto& obs : history) logits = actor.step_logits(obs, hidden);
  return to_action_array(softmax(logits));
}

AllocationAction ActorPolicy::act(std::span<const double> observation) {
  return AllocationAction(act_raw(observation));
}

ActionArray ActorPolicy::act_raw(std::span<const double> observation, double noise_sigma, Rng* rng) {
  Vector logits = actor_->step_logits(observation, hidden_);
  if (noise_sigma > 0.0 && rng != nullptr) {
    std::normal_distribution<double> normal(0.0, noise_sigma);
    for (double& z : logits) z += normal(*rng);
  }
  return to_action_array(softmax(logits));
}

// ---------------------------------------------------------------------------
// Critic

CriticNetwork::CriticNetwork(RnnCell core, DenseLayer hidden, DenseLayer output)
    : core_(std::move(core)), hidden_(std::move(hidden)), output_(std::move(output)) {
  if (hidden_.in_size() != core_.hidden_size() + kActionCount) {
    throw ShapeError("CriticNetwork: hidden layer must take [state, action]");
  }
  if (output_.in_size() != hidden_.out_size() || output_.out_size() != 1) {
    throw ShapeError("CriticNetwork: output layer must map the hidden layer to a scalar");
  }
  hidden_.activation = Activation::tanh;
  output_.activation = Activation::identity;
}

CriticNetwork CriticNetwork::random(std::size_t observation_size, Rng& rng, std::size_t hidden_units,
                                    std::size_t core_hidden) {
  RnnCell core(observation_size, core_hidden);
  DenseLayer hidden(core_hidden + kActionCount, hidden_units, Activation::tanh);
  DenseLayer output(hidden_units, 1, Activation::identity);
  init_uniform(core, rng);
  init_uniform(hidden, rng);
  init_uniform(output, rng);
  return CriticNetwork(std::move(core), std::move(hidden), std::move(output));
}

double CriticNetwork::evaluate(std::span<const double> state, std::span<const double> action) const {
  return critic_head_forward(hidden_, output_, state, action).q;
}

double CriticNetwork::evaluate_history(const std::vector<Vector>& history, std::span<const double> action) const {
  if (history.empty()) throw ContractError("critic: observation history is empty");
  const Vector h0(core_.hidden_size(), 0.0);
  const auto states = rnn_unroll(core_, history, h0);
  return evaluate(states.back(), action);
}

ParameterList CriticNetwork::parameters() {
  ParameterList list;
  append_parameters(list, "core", core_);
  append_parameters(list, "hidden", hidden_);
  append_parameters(list, "output", output_);
  return list;
}

// ---------------------------------------------------------------------------
// Replay buffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ContractError("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (!on_simplex(t.action, 1e-6)) throw ContractError("ReplayBuffer: action is off the simplex");
  if (!std::isfinite(t.reward)) throw NumericError("ReplayBuffer: reward is not finite");
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[cursor_] = std::move(t);
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (items_.empty()) throw ContractError("ReplayBuffer: cannot sample from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<Transition> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(items_[pick(rng)]);
  return out;
}

// ---------------------------------------------------------------------------
// Losses

double regularization_loss(std::span<const ActionArray> actions, std::span<const double> prior) {
  if (actions.empty()) throw ContractError("regularization_loss: empty batch");
  if (prior.size() != kActionCount) throw ShapeError("regularization_loss: prior must have 5 entries");
  ActionArray mean{};
  for (const auto& a : actions)
    for (std::size_t j = 0; j < kActionCount; ++j) mean[j] += a[j];
  double loss = 0.0;
  for (std::size_t j = 0; j < kActionCount; ++j) {
    const double d = mean[j] / static_cast<double>(actions.size()) - prior[j];
    loss += d * d;
  }
  return loss / static_cast<double>(kActionCount);
}

LossEvaluation actor_loss(std::span<const Transition> batch, ActorNetwork& actor, const CriticNetwork& critic,
                          std::span<const double> prior, double lambda) {
  if (batch.empty()) throw ContractError("actor_loss: empty batch");
  if (prior.size() != kActionCount) throw ShapeError("actor_loss: prior must have 5 entries");
  if (!(lambda >= 0.0)) throw ContractError("actor_loss: lambda must be non-negative");
  if (actor.observation_size() != critic.observation_size()) throw ShapeError("actor_loss: actor/critic observation sizes differ");

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const auto groups = group_by_trace(batch);
  const Vector actor_h0 = actor.initial_state();
  const Vector critic_h0(critic.core().hidden_size(), 0.0);

  std::vector<std::vector<Vector>> actor_states(groups.size());
  std::vector<Vector> actions(batch.size());
  std::vector<Vector> dq_da(batch.size());
  double q_sum = 0.0;
  ActionArray mean{};

  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto inputs = prefix(*groups[g].trace, groups[g].last_step + 1);
    actor_states[g] = rnn_unroll(actor.core(), inputs, actor_h0);
    const auto critic_states = rnn_unroll(critic.core(), inputs, critic_h0);
    for (std::size_t i : groups[g].members) {
      const std::size_t t = batch[i].step;
      actions[i] = dense_forward(actor.head(), actor_states[g][t]);
      const auto pass = critic_head_forward(critic.hidden(), critic.output(), critic_states[t], actions[i]);
      q_sum += pass.q;
      const Vector dx = critic_head_backward(critic.hidden(), critic.output(), pass, 1.0, nullptr, nullptr);
      dq_da[i].assign(dx.end() - static_cast<std::ptrdiff_t>(kActionCount), dx.end());
      for (std::size_t j = 0; j < kActionCount; ++j) mean[j] += actions[i][j] * inv_b;
    }
  }

  LossEvaluation out;
  double reg = 0.0;
  ActionArray reg_grad{};
  for (std::size_t j = 0; j < kActionCount; ++j) {
    const double d = mean[j] - prior[j];
    reg += d * d;
    reg_grad[j] = lambda * 2.0 * d / static_cast<double>(kActionCount) * inv_b;
  }
  reg /= static_cast<double>(kActionCount);
  out.regularization = reg;
  out.mean_action = mean;
  out.loss = -q_sum * inv_b + lambda * reg;
  check_finite(out.loss, "actor loss");

  RnnGradient core_grad(actor.core());
  DenseGradient head_grad(actor.head());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<Vector> grad_states(groups[g].last_step + 1);
    for (std::size_t i : groups[g].members) {
      const std::size_t t = batch[i].step;
      Vector ga(kActionCount);
      for (std::size_t j = 0; j < kActionCount; ++j) ga[j] = -dq_da[i][j] * inv_b + reg_grad[j];
      const Vector dh = dense_backward(actor.head(), actor_states[g][t], actions[i], ga, head_grad);
      if (grad_states[t].empty()) grad_states[t].assign(dh.size(), 0.0);
      for (std::size_t k = 0; k < dh.size(); ++k) grad_states[t][k] += dh[k];
    }
    const auto inputs = prefix(*groups[g].trace, groups[g].last_step + 1);
    rnn_backward(actor.core(), inputs, actor_h0, actor_states[g], grad_states, core_grad);
  }
  ParameterList views;
  append_parameters(views, "core", core_grad);
  append_parameters(views, "head", head_grad);
  out.gradient = GradientRecord::capture(views);
  return out;
}

LossEvaluation critic_loss(std::span<const Transition> batch, CriticNetwork& critic, const ActorNetwork& target_actor,
                           const CriticNetwork& target_critic, double gamma) {
  if (batch.empty()) throw ContractError("critic_loss: empty batch");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractError("critic_loss: gamma must lie in [0,1]");

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const auto groups = group_by_trace(batch);
  const Vector critic_h0(critic.core().hidden_size(), 0.0);
  const Vector target_critic_h0(target_critic.core().hidden_size(), 0.0);
  const Vector target_actor_h0 = target_actor.initial_state();

  RnnGradient core_grad(critic.core());
  DenseGradient hidden_grad(critic.hidden());
  DenseGradient output_grad(critic.output());
  const std::size_t state_size = critic.core().hidden_size();

  LossEvaluation out;
  double loss = 0.0;
  for (const auto& group : groups) {
    const auto inputs = prefix(*group.trace, group.last_step + 1);
    const auto states = rnn_unroll(critic.core(), inputs, critic_h0);

    bool need_bootstrap = false;
    for (std::size_t i : group.members) need_bootstrap = need_bootstrap || (!batch[i].terminal && gamma > 0.0);
    std::vector<Vector> next_actor_states, next_critic_states;
    if (need_bootstrap) {
      const auto next_inputs = prefix(*group.trace, group.last_step + 2);
      next_actor_states = rnn_unroll(target_actor.core(), next_inputs, target_actor_h0);
      next_critic_states = rnn_unroll(target_critic.core(), next_inputs, target_critic_h0);
    }

    std::vector<Vector> grad_states(group.last_step + 1);
    for (std::size_t i : group.members) {
      const Transition& tr = batch[i];
      const std::size_t t = tr.step;
      double target = tr.reward;
      if (!tr.terminal && gamma > 0.0) {
        const Vector next_action = dense_forward(target_actor.head(), next_actor_states[t + 1]);
        target += gamma * target_critic.evaluate(next_critic_states[t + 1], next_action);
      }
      check_finite(target, "TD target");
      const auto pass = critic_head_forward(critic.hidden(), critic.output(), states[t], tr.action);
      const double diff = pass.q - target;
      loss += diff * diff * inv_b;
      const Vector dx =
          critic_head_backward(critic.hidden(), critic.output(), pass, 2.0 * diff * inv_b, &hidden_grad, &output_grad);
      if (grad_states[t].empty()) grad_states[t].assign(state_size, 0.0);
      for (std::size_t k = 0; k < state_size; ++k) grad_states[t][k] += dx[k];
    }
    rnn_backward(critic.core(), inputs, critic_h0, states, grad_states, core_grad);
  }
  check_finite(loss, "critic loss");
  out.loss = loss;

  ParameterList views;
  append_parameters(views, "core", core_grad);
  append_parameters(views, "hidden", hidden_grad);
  append_parameters(views, "output", output_grad);
  out.gradient = GradientRecord::capture(views);
  return out;
}

void soft_update(ActorNetwork& target, ActorNetwork& online, double tau) {
  ahrl::soft_update(online.parameters(), target.parameters(), tau);
}

void soft_update(CriticNetwork& target, CriticNetwork& online, double tau) {
  ahrl::soft_update(online.parameters(), target.parameters(), tau);
}

// ---------------------------------------------------------------------------
// Training

void write_training_log(std::ostream& out, const std::vector<TrainingLogRow>& log) {
  out << "epoch,mean_reward,mean_act_0,mean_act_1,mean_act_2,mean_act_3,mean_act_4,reg_loss,actor_loss,critic_loss\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out << buf;
  };
  for (const auto& row : log) {
    out << row.epoch;
    put(row.mean_reward);
    for (double a : row.mean_action) put(a);
    put(row.reg_loss);
    put(row.actor_loss);
    put(row.critic_loss);
    out << '\n';
  }
}

TrainingResult train(Environment& env, const AffinityPrior& prior, const TrainConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t obs_size = env.observation_size();

  TrainingResult result;
  result.actor = ActorNetwork::random(obs_size, rng, config.actor_hidden);
  result.critic = CriticNetwork::random(obs_size, rng, config.critic_hidden, config.critic_core_hidden);
  result.initial_actor = result.actor;
  ActorNetwork target_actor = result.actor;
  CriticNetwork target_critic = result.critic;

  const OptimizerSettings opt_settings{config.update_rule};
  Optimizer actor_opt(opt_settings);
  Optimizer critic_opt(opt_settings);
  ReplayBuffer buffer(config.replay_capacity);
  const auto& prior_weights = prior.weights();
  ActorNetwork best_actor;
  double best_return = -INFINITY;

  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    const double sigma = config.noise_at(episode);
    auto trace = std::make_shared<ObservationTrace>();
    trace->observations.reserve(env.horizon() + 1);
    trace->observations.push_back(env.reset());
    ActorPolicy policy(result.actor);

    std::vector<Transition> pending;
    pending.reserve(env.horizon());
    TrainingLogRow row;
    row.epoch = episode;
    double reward_sum = 0.0;
    for (std::size_t t = 0; t < env.horizon(); ++t) {
      const ActionArray a = policy.act_raw(trace->observations.back(), sigma, &rng);
      auto outcome = env.step(a);
      trace->observations.push_back(std::move(outcome.observation));
      Transition tr;
      tr.step = t;
      tr.action = a;
      tr.reward = outcome.reward;
      tr.terminal = outcome.terminal;
      pending.push_back(tr);
      reward_sum += outcome.reward;
      for (std::size_t j = 0; j < kActionCount; ++j) row.mean_action[j] += a[j];
      if (outcome.terminal) break;
    }
    const std::shared_ptr<const ObservationTrace> shared = trace;
    for (auto& tr : pending) {
      tr.trace = shared;
      buffer.push(std::move(tr));
    }
    if (!pending.empty()) {
      row.mean_reward = reward_sum / static_cast<double>(pending.size());
      for (double& m : row.mean_action) m /= static_cast<double>(pending.size());
    }

    std::size_t updates = 0;
    if (buffer.size() >= config.batch_size) {
      for (std::size_t u = 0; u < config.updates_per_episode; ++u) {
        const auto batch = buffer.sample(config.batch_size, rng);
        try {
          const auto c = critic_loss(batch, result.critic, target_actor, target_critic, config.gamma);
          critic_opt.step(result.critic.parameters(), c.gradient, config.critic_lr);
          const auto a = actor_loss(batch, result.actor, result.critic, prior_weights, config.lambda);
          actor_opt.step(result.actor.parameters(), a.gradient, config.actor_lr);
          soft_update(target_critic, result.critic, config.tau);
          soft_update(target_actor, result.actor, config.tau);
          row.critic_loss += c.loss;
          row.actor_loss += a.loss;
          row.reg_loss += a.regularization;
          ++updates;
        } catch (const NumericError& e) {
          std::ostringstream snap;
          snap << "epoch=" << episode << " update=" << u << " mean_reward=" << row.mean_reward
               << " critic_loss_sum=" << row.critic_loss << " actor_loss_sum=" << row.actor_loss;
          throw DivergenceError(std::string("training diverged: ") + e.what(), snap.str());
        }
      }
    }
    if (updates > 0) {
      row.critic_loss /= static_cast<double>(updates);
      row.actor_loss /= static_cast<double>(updates);
      row.reg_loss /= static_cast<double>(updates);
    }
    result.log.push_back(row);

    if (config.eval_interval > 0 &&
        ((episode + 1) % config.eval_interval == 0 || episode + 1 == config.episodes)) {
      const double ret = rollout(result.actor, env).total_reward;
      if (ret > best_return) {
        best_return = ret;
        best_actor = result.actor;
      }
    }
  }
  if (config.eval_interval > 0 && std::isfinite(best_return)) result.actor = std::move(best_actor);
  return result;
}

Rollout rollout(const ActorNetwork& actor, Environment& env) {
  Rollout out;
  ActorPolicy policy(actor);
  Vector obs = env.reset();
  for (std::size_t t = 0; t < env.horizon(); ++t) {
    const ActionArray a = policy.act_raw(obs);
    auto outcome = env.step(a);
    out.actions.push_back(a);
    out.total_reward += outcome.reward;
    obs = std::move(outcome.observation);
    if (outcome.terminal) break;
  }
  return out;
}

ActionArray time_average(const std::vector<ActionArray>& actions) {
  ActionArray mean{};
  if (actions.empty()) return mean;
  for (const auto& a : actions)
    for (std::size_t j = 0; j < kActionCount; ++j) mean[j] += a[j];
  for (double& m : mean) m /= static_cast<double>(actions.size());
  return mean;
}

double linf_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("linf_distance: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace ahrl
