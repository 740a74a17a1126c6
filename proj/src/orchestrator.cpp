#include "ahrl/orchestrator.hpp"

#include <cstdio>
#include <ostream>

#include "ahrl/errors.hpp"

namespace ahrl {

namespace {

std::vector<const ActorNetwork*> pointers(std::span<const ActorNetwork> prototypes) {
  if (prototypes.size() != kTraitCount) throw ContractError("expected five prototype actors");
  std::vector<const ActorNetwork*> out;
  for (const auto& p : prototypes) out.push_back(&p);
  return out;
}

StrategyOutcome outcome_of(const OrchestrationEnvironment& env, const PreferenceVector& pref) {
  StrategyOutcome out;
  out.episode = env.episode();
  out.weights = env.weight_history();
  out.value = out.episode.final_value;
  out.satisfaction = out.episode.states.empty() ? 0.0 : satisfaction_index(out.episode, pref);
  return out;
}

void put(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, ",%.17g", v);
  out << buf;
}

}  // namespace

ActionArray combine_actions(std::span<const double> weights, const PrototypeActions& actions) {
  if (weights.size() != kTraitCount) throw ShapeError("combine_actions: five weights required");
  if (!on_simplex(weights, 1e-6)) throw ContractError("combine_actions: weights are off the simplex");
  ActionArray out{};
  for (std::size_t i = 0; i < kTraitCount; ++i) {
    if (!on_simplex(actions[i], 1e-6)) throw ContractError("combine_actions: prototype action is off the simplex");
    for (std::size_t j = 0; j < kActionCount; ++j) out[j] += weights[i] * actions[i][j];
  }
  return out;
}

ActionArray linear_baseline(const PersonalityVector& p, const PrototypeActions& actions) {
  return combine_actions(orchestration_prior(p).weights(), actions);
}

CustomerProfile::CustomerProfile(std::string id_, const PersonalityVector& p, Vector behavior_)
    : id(std::move(id_)),
      personality(p),
      behavior(std::move(behavior_)),
      prior(orchestration_prior(p)),
      preference(preference_vector(p)) {}

std::vector<CustomerProfile> acceptance_customers() {
  // Scaled so that orchestration_prior gives two-decimal weights:
  // A 1.2×(.22 .24 .14 .15 .25), B 2.4×(.30 .01 .23 .11 .35),
  // C 3×(.27 .04 .26 .23 .20), D 3.2×(.23 .12 .27 .25 .13).
  return {
      CustomerProfile("A", PersonalityVector({0.264, 0.288, 0.168, 0.18, 0.3})),
      CustomerProfile("B", PersonalityVector({0.72, 0.024, 0.552, 0.264, 0.84})),
      CustomerProfile("C", PersonalityVector({0.81, 0.12, 0.78, 0.69, 0.6})),
      CustomerProfile("D", PersonalityVector({0.736, 0.384, 0.864, 0.8, 0.416})),
  };
}

OrchestrationEnvironment::OrchestrationEnvironment(const PriceSeries& series,
                                                   std::vector<const ActorNetwork*> prototypes,
                                                   PreferenceVector preference, Vector behavior,
                                                   EnvironmentSettings settings)
    : inner_(series, satisfaction_reward_function(preference), settings),
      prototypes_(std::move(prototypes)),
      behavior_(std::move(behavior)) {
  if (prototypes_.size() != kTraitCount) throw ContractError("expected five prototype actors");
  for (const ActorNetwork* p : prototypes_) {
    if (p == nullptr || p->observation_size() != kMarketObservationSize) {
      throw ShapeError("prototype actors must consume market observations");
    }
    policies_.emplace_back(*p);
  }
  reset();
}

Vector OrchestrationEnvironment::with_behavior(Vector market) const {
  market.insert(market.end(), behavior_.begin(), behavior_.end());
  return market;
}

Vector OrchestrationEnvironment::reset() {
  market_obs_ = inner_.reset();
  for (auto& p : policies_) p.reset();
  weights_.clear();
  return with_behavior(market_obs_);
}

Environment::Outcome OrchestrationEnvironment::step(std::span<const double> weights) {
  if (weights.size() != kTraitCount) throw ShapeError("orchestration action must have five weights");
  PrototypeActions actions;
  for (std::size_t i = 0; i < kTraitCount; ++i) actions[i] = policies_[i].act_raw(market_obs_);
  const ActionArray combined = combine_actions(weights, actions);
  ActionArray w{};
  std::copy(weights.begin(), weights.end(), w.begin());
  weights_.push_back(w);
  auto outcome = inner_.step(combined);
  market_obs_ = outcome.observation;
  outcome.observation = with_behavior(std::move(outcome.observation));
  return outcome;
}

OrchestratorAgent train_orchestrator(const CustomerProfile& customer, std::span<const ActorNetwork> prototypes,
                                     const PriceSeries& series, const TrainConfig& config,
                                     const EnvironmentSettings& settings) {
  OrchestrationEnvironment env(series, pointers(prototypes), customer.preference, customer.behavior, settings);
  auto result = train(env, customer.prior, config);
  OrchestratorAgent agent;
  agent.customer_id = customer.id;
  agent.prior = customer.prior;
  agent.behavior = customer.behavior;
  agent.initial_average = time_average(rollout(result.initial_actor, env).actions);
  agent.actor = std::move(result.actor);
  agent.log = std::move(result.log);
  return agent;
}

StrategyOutcome evaluate_orchestrator(const ActorNetwork& orchestrator, const CustomerProfile& customer,
                                      std::span<const ActorNetwork> prototypes, const PriceSeries& series,
                                      const EnvironmentSettings& settings) {
  OrchestrationEnvironment env(series, pointers(prototypes), customer.preference, customer.behavior, settings);
  if (orchestrator.observation_size() != env.observation_size()) {
    throw ShapeError("orchestrator observation size does not match the customer's behavioural feature");
  }
  rollout(orchestrator, env);
  return outcome_of(env, customer.preference);
}

StrategyOutcome evaluate_linear(const CustomerProfile& customer, std::span<const ActorNetwork> prototypes,
                                const PriceSeries& series, const EnvironmentSettings& settings) {
  OrchestrationEnvironment env(series, pointers(prototypes), customer.preference, customer.behavior, settings);
  env.reset();
  for (std::size_t t = 0; t < env.horizon(); ++t) env.step(customer.prior.weights());
  return outcome_of(env, customer.preference);
}

Comparison compare(std::span<const CustomerProfile> customers, std::span<const ActorNetwork> orchestrators,
                   std::span<const ActorNetwork> prototypes, const PriceSeries& series,
                   const EnvironmentSettings& settings) {
  if (customers.size() != orchestrators.size()) throw ContractError("compare: one orchestrator per customer required");
  Comparison out;
  for (std::size_t i = 0; i < customers.size(); ++i) {
    auto orch = evaluate_orchestrator(orchestrators[i], customers[i], prototypes, series, settings);
    auto lin = evaluate_linear(customers[i], prototypes, series, settings);
    out.rows.push_back({customers[i].id, orch.value, orch.satisfaction, lin.value, lin.satisfaction});
    out.orchestrated.push_back(std::move(orch));
    out.linear.push_back(std::move(lin));
  }
  return out;
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << "customer_id,orch_value_nok,orch_satisfaction,linear_value_nok,linear_satisfaction\n";
  for (const auto& r : rows) {
    out << r.customer_id;
    put(out, r.orch_value_nok);
    put(out, r.orch_satisfaction);
    put(out, r.linear_value_nok);
    put(out, r.linear_satisfaction);
    out << '\n';
  }
}

void write_strategy_csv(std::ostream& out, const StrategyOutcome& outcome) {
  out << "month,act_savings,act_property,act_stocks,act_luxury,act_mortgage";
  for (Trait t : kAllTraits) out << ",w_" << trait_name(t);
  out << '\n';
  for (std::size_t t = 0; t < outcome.episode.actions.size(); ++t) {
    out << t;
    for (std::size_t j = 0; j < kActionCount; ++j) put(out, outcome.episode.actions[t][j]);
    for (double w : outcome.weights[t]) put(out, w);
    out << '\n';
  }
}

}  // namespace ahrl
