#pragma once

// Deterministic policy gradient with a prior-regularised actor objective:
//
//   J(θ) = E_D[Q(s, π_θ(s))] − λ·L,
//   L    = (1/M) Σ_j (E[a_j] − π₀_j)²
//
// where the expectation over actions is the mini-batch mean of actor outputs.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ahrl/affinity.hpp"
#include "ahrl/market.hpp"
#include "ahrl/numerics.hpp"

namespace ahrl {

inline constexpr std::size_t kActionCount = 5;
using ActionArray = std::array<double, kActionCount>;

struct TrainConfig {
  double actor_lr = 0.005;
  double critic_lr = 0.01;
  double tau = 0.05;
  double gamma = 0.95;
  double lambda = 5.0;
  std::size_t batch_size = 64;
  std::size_t episodes = 2000;
  std::size_t updates_per_episode = 8;
  std::size_t replay_capacity = 100'000;
  double noise_scale = 0.1;   // logit noise σ at the first episode
  double noise_floor = 0.01;  // σ at the last episode (linear decay)
  std::size_t actor_hidden = 3;
  std::size_t critic_core_hidden = 3;
  std::size_t critic_hidden = 1000;
  UpdateRule update_rule = UpdateRule::adam;
  std::uint64_t seed = 0;
  // Every n episodes the noise-free actor is rolled out and the best one by
  // episode return is kept. 0 keeps the final actor.
  std::size_t eval_interval = 0;

  void validate() const;
  double noise_at(std::size_t episode) const;
};

// Recurrent core (3 tanh units) followed by a 5-way softmax head.
class ActorNetwork {
 public:
  ActorNetwork() = default;
  ActorNetwork(RnnCell core, DenseLayer head);

  static ActorNetwork random(std::size_t observation_size, Rng& rng, std::size_t hidden = 3);
  static ActorNetwork zeros(std::size_t observation_size, std::size_t hidden = 3);

  std::size_t observation_size() const noexcept { return core_.input_size(); }
  std::size_t hidden_size() const noexcept { return core_.hidden_size(); }

  Vector initial_state() const { return Vector(core_.hidden_size(), 0.0); }
  // Advances `hidden` by one observation and returns the pre-softmax logits.
  Vector step_logits(std::span<const double> observation, Vector& hidden) const;

  const RnnCell& core() const noexcept { return core_; }
  const DenseLayer& head() const noexcept { return head_; }
  ParameterList parameters();

 private:
  RnnCell core_;
  DenseLayer head_;  // softmax activation
};

// Deterministic action after consuming the whole history (hidden state
// persists across the history, starting from zero).
ActionArray act(const ActorNetwork& actor, const std::vector<Vector>& history);

// Stateful wrapper used for rollouts. Optional logit noise for exploration.
class ActorPolicy : public Policy {
 public:
  explicit ActorPolicy(const ActorNetwork& actor) : actor_(&actor), hidden_(actor.initial_state()) {}
  void reset() override { hidden_ = actor_->initial_state(); }
  AllocationAction act(std::span<const double> observation) override;
  ActionArray act_raw(std::span<const double> observation, double noise_sigma = 0.0, Rng* rng = nullptr);

 private:
  const ActorNetwork* actor_;
  Vector hidden_;
};

// Recurrent state core; [h, a] → dense tanh layer → scalar linear output.
class CriticNetwork {
 public:
  CriticNetwork() = default;
  CriticNetwork(RnnCell core, DenseLayer hidden, DenseLayer output);

  static CriticNetwork random(std::size_t observation_size, Rng& rng, std::size_t hidden_units = 1000,
                              std::size_t core_hidden = 3);

  std::size_t observation_size() const noexcept { return core_.input_size(); }
  const RnnCell& core() const noexcept { return core_; }
  const DenseLayer& hidden() const noexcept { return hidden_; }
  const DenseLayer& output() const noexcept { return output_; }

  double evaluate(std::span<const double> state, std::span<const double> action) const;
  // Q for the state reached after the whole history.
  double evaluate_history(const std::vector<Vector>& history, std::span<const double> action) const;

  ParameterList parameters();

 private:
  RnnCell core_;
  DenseLayer hidden_;
  DenseLayer output_;
};

// Observation history shared by every transition of one episode:
// observations[t] is seen before acting at month t; there are T+1 entries.
struct ObservationTrace {
  std::vector<Vector> observations;
};

struct Transition {
  std::shared_ptr<const ObservationTrace> trace;
  std::size_t step = 0;
  ActionArray action{};
  double reward = 0.0;
  bool terminal = false;

  std::span<const Vector> observation_history() const { return {trace->observations.data(), step + 1}; }
  std::span<const Vector> next_observation_history() const { return {trace->observations.data(), step + 2}; }
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

  // Uniform with replacement.
  std::vector<Transition> sample(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> items_;
};

// Mean over the five action dimensions of (batch-mean action − prior)².
double regularization_loss(std::span<const ActionArray> actions, std::span<const double> prior);

struct LossEvaluation {
  double loss = 0.0;
  GradientRecord gradient;
  double regularization = 0.0;  // actor only: L
  ActionArray mean_action{};    // actor only: batch-mean π_θ(s)
};

// −mean Q(s, π(s)) + λ·L. Gradient w.r.t. the actor's parameters.
LossEvaluation actor_loss(std::span<const Transition> batch, ActorNetwork& actor, const CriticNetwork& critic,
                          std::span<const double> prior, double lambda);

// Mean squared TD error against y = r + γ·Q'(s', π'(s')) (y = r when terminal).
LossEvaluation critic_loss(std::span<const Transition> batch, CriticNetwork& critic, const ActorNetwork& target_actor,
                           const CriticNetwork& target_critic, double gamma);

void soft_update(ActorNetwork& target, ActorNetwork& online, double tau);
void soft_update(CriticNetwork& target, CriticNetwork& online, double tau);

struct TrainingLogRow {
  std::size_t epoch = 0;
  double mean_reward = 0.0;
  ActionArray mean_action{};
  double reg_loss = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;

  friend bool operator==(const TrainingLogRow&, const TrainingLogRow&) = default;
};

// Header `epoch,mean_reward,mean_act_0,...,mean_act_4,reg_loss,actor_loss,critic_loss`.
void write_training_log(std::ostream& out, const std::vector<TrainingLogRow>& log);

struct TrainingResult {
  ActorNetwork actor;
  CriticNetwork critic;
  ActorNetwork initial_actor;
  std::vector<TrainingLogRow> log;
};

// The environment supplies the reward. Deterministic for a fixed seed.
// Throws DivergenceError when a loss becomes non-finite.
TrainingResult train(Environment& env, const AffinityPrior& prior, const TrainConfig& config);

struct Rollout {
  std::vector<ActionArray> actions;
  double total_reward = 0.0;
};

// Noise-free episode; the environment keeps its own record of the trajectory.
Rollout rollout(const ActorNetwork& actor, Environment& env);

ActionArray time_average(const std::vector<ActionArray>& actions);
double linf_distance(std::span<const double> a, std::span<const double> b);

}  // namespace ahrl
