#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ahrl/affinity.hpp"
#include "ahrl/ddpg.hpp"
#include "ahrl/market.hpp"

namespace ahrl {

using PrototypeActions = std::array<ActionArray, kTraitCount>;

// Σᵢ wᵢ·aᵢ. Weights and actions must lie on the simplex.
ActionArray combine_actions(std::span<const double> weights, const PrototypeActions& actions);

// combine_actions with weights orchestration_prior(p).
ActionArray linear_baseline(const PersonalityVector& p, const PrototypeActions& actions);

struct CustomerProfile {
  std::string id;
  PersonalityVector personality;
  Vector behavior;  // optional behavioural feature, appended to observations
  AffinityPrior prior;
  PreferenceVector preference;

  CustomerProfile(std::string id, const PersonalityVector& personality, Vector behavior = {});
};

// Four synthetic customers: balanced low-magnitude, neuroticism+openness,
// openness+extraversion, extraversion+agreeableness+openness.
std::vector<CustomerProfile> acceptance_customers();

// The high-level environment. The action weights the five prototypes, each of
// which observes the shared portfolio and keeps its own recurrent state. The
// reward is the satisfaction of the state reached.
class OrchestrationEnvironment : public Environment {
 public:
  OrchestrationEnvironment(const PriceSeries& series, std::vector<const ActorNetwork*> prototypes,
                           PreferenceVector preference, Vector behavior = {}, EnvironmentSettings settings = {});

  std::size_t observation_size() const override { return kMarketObservationSize + behavior_.size(); }
  std::size_t horizon() const override { return inner_.horizon(); }
  Vector reset() override;
  Outcome step(std::span<const double> weights) override;

  EpisodeResult episode() const { return inner_.episode(); }
  const std::vector<ActionArray>& weight_history() const noexcept { return weights_; }
  const PortfolioState& state() const noexcept { return inner_.state(); }

 private:
  Vector with_behavior(Vector market) const;

  PortfolioEnvironment inner_;
  std::vector<const ActorNetwork*> prototypes_;
  std::vector<ActorPolicy> policies_;
  Vector behavior_;
  Vector market_obs_;
  std::vector<ActionArray> weights_;
};

struct OrchestratorAgent {
  std::string customer_id;
  AffinityPrior prior{{0.2, 0.2, 0.2, 0.2, 0.2}};
  Vector behavior;
  ActorNetwork actor;
  std::vector<TrainingLogRow> log;
  ActionArray initial_average{};
};

OrchestratorAgent train_orchestrator(const CustomerProfile& customer, std::span<const ActorNetwork> prototypes,
                                     const PriceSeries& series, const TrainConfig& config,
                                     const EnvironmentSettings& settings = {});

struct StrategyOutcome {
  EpisodeResult episode;
  std::vector<ActionArray> weights;
  double value = 0.0;
  double satisfaction = 0.0;
};

// Noise-free episode with the trained orchestration actor.
StrategyOutcome evaluate_orchestrator(const ActorNetwork& orchestrator, const CustomerProfile& customer,
                                      std::span<const ActorNetwork> prototypes, const PriceSeries& series,
                                      const EnvironmentSettings& settings = {});

// Fixed weights equal to the customer's prior.
StrategyOutcome evaluate_linear(const CustomerProfile& customer, std::span<const ActorNetwork> prototypes,
                                const PriceSeries& series, const EnvironmentSettings& settings = {});

struct ComparisonRow {
  std::string customer_id;
  double orch_value_nok = 0.0;
  double orch_satisfaction = 0.0;
  double linear_value_nok = 0.0;
  double linear_satisfaction = 0.0;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::vector<StrategyOutcome> orchestrated;
  std::vector<StrategyOutcome> linear;
};

// orchestrators[i] belongs to customers[i].
Comparison compare(std::span<const CustomerProfile> customers, std::span<const ActorNetwork> orchestrators,
                   std::span<const ActorNetwork> prototypes, const PriceSeries& series,
                   const EnvironmentSettings& settings = {});

// Header `customer_id,orch_value_nok,orch_satisfaction,linear_value_nok,linear_satisfaction`.
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

// Per-month combined allocation and prototype weights.
// Header `month,act_savings,...,act_mortgage,w_openness,...,w_neuroticism`.
void write_strategy_csv(std::ostream& out, const StrategyOutcome& outcome);

}  // namespace ahrl
