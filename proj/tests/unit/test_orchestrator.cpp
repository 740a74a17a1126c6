#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ahrl/errors.hpp"
#include "ahrl/orchestrator.hpp"
#include "ahrl/prototypes.hpp"
#include "unit/fixtures.hpp"

using namespace ahrl;

namespace {

// Actor whose allocation is softmax(logits) at every step.
ActorNetwork fixed_actor(const std::array<double, 5>& logits, std::size_t obs = kMarketObservationSize) {
  ActorNetwork a = ActorNetwork::zeros(obs);
  RnnCell core = a.core();
  DenseLayer head = a.head();
  for (std::size_t i = 0; i < 5; ++i) head.bias[i] = logits[i];
  return ActorNetwork(core, head);
}

std::vector<ActorNetwork> random_prototypes(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ActorNetwork> out;
  for (std::size_t i = 0; i < kTraitCount; ++i) out.push_back(ActorNetwork::random(kMarketObservationSize, rng));
  return out;
}

PriceSeries test_series(std::size_t months = 24) {
  SyntheticMarketConfig m;
  m.seed = 11;
  return generate_synthetic(m, months);
}

}  // namespace

TEST_CASE("combined actions stay on the simplex") {
  Rng rng(1);
  for (int trial = 0; trial < 10000; ++trial) {
    PrototypeActions actions;
    for (auto& a : actions) a = fixtures::random_simplex(rng);
    const auto w = fixtures::random_simplex(rng);
    const auto c = combine_actions(w, actions);
    double sum = 0.0;
    for (double v : c) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("combination arithmetic") {
  Rng rng(2);
  PrototypeActions actions;
  for (auto& a : actions) a = fixtures::random_simplex(rng);
  for (std::size_t k = 0; k < kTraitCount; ++k) {
    std::array<double, 5> w{};
    w[k] = 1.0;
    CHECK(combine_actions(w, actions) == actions[k]);
  }

  const std::array<double, 5> uniform{0.2, 0.2, 0.2, 0.2, 0.2};
  const auto mean = combine_actions(uniform, actions);
  for (std::size_t i = 0; i < 5; ++i) {
    double m = 0.0;
    for (const auto& a : actions) m += a[i];
    CHECK(mean[i] == doctest::Approx(m / 5).epsilon(1e-14));
  }

  // Scaling the personality leaves the linear baseline unchanged.
  const PersonalityVector p({0.3, 0.1, 0.6, 0.2, 0.4});
  const PersonalityVector q({0.15, 0.05, 0.3, 0.1, 0.2});
  const auto lp = linear_baseline(p, actions), lq = linear_baseline(q, actions);
  for (std::size_t i = 0; i < 5; ++i) CHECK(lp[i] == doctest::Approx(lq[i]).epsilon(1e-14));

  const std::array<double, 5> off{0.5, 0.5, 0.5, 0, 0};
  CHECK_THROWS_AS(combine_actions(off, actions), ContractError);
  const std::array<double, 4> short_w{0.25, 0.25, 0.25, 0.25};
  CHECK_THROWS_AS(combine_actions(short_w, actions), ShapeError);
}

TEST_CASE("one-hot orchestration reproduces the prototype rollout bit for bit") {
  const auto series = test_series();
  const auto protos = random_prototypes(4);
  const CustomerProfile customer("c", PersonalityVector({0.2, 0.4, 0.6, 0.8, 1.0}));
  for (std::size_t k = 0; k < kTraitCount; ++k) {
    std::array<double, 5> logits{};
    logits.fill(-1e4);
    logits[k] = 0.0;
    const auto orch = fixed_actor(logits);
    const auto out = evaluate_orchestrator(orch, customer, protos, series);

    PortfolioEnvironment env(series, profit_reward());
    const auto direct = rollout(protos[k], env);
    const auto ep = env.episode();
    REQUIRE(out.episode.states.size() == ep.states.size());
    CHECK(out.episode.actions.size() == ep.actions.size());
    for (std::size_t t = 0; t < ep.states.size(); ++t) CHECK(out.episode.states[t] == ep.states[t]);
    for (std::size_t t = 0; t < direct.actions.size(); ++t) CHECK(out.episode.actions[t].fractions() == direct.actions[t]);
    CHECK(out.value == portfolio_value(ep.states.back()));
  }
}

TEST_CASE("identical strategies score identically") {
  const auto series = test_series();
  const auto protos = random_prototypes(6);
  const CustomerProfile customer("c", PersonalityVector({0.5, 0.1, 0.3, 0.2, 0.4}));
  // An orchestrator fixed at the prior is the linear baseline.
  std::array<double, 5> logits{};
  for (std::size_t i = 0; i < 5; ++i) logits[i] = std::log(customer.prior[i]);
  const auto orch = fixed_actor(logits);
  const auto a = evaluate_orchestrator(orch, customer, protos, series);
  const auto b = evaluate_linear(customer, protos, series);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-9));
  CHECK(a.satisfaction == doctest::Approx(b.satisfaction).epsilon(1e-9));
  for (const auto& w : b.weights)
    for (std::size_t i = 0; i < 5; ++i) CHECK(w[i] == customer.prior[i]);
}

TEST_CASE("comparison output") {
  const auto series = test_series(6);
  const auto protos = random_prototypes(8);
  const auto customers = acceptance_customers();
  std::vector<ActorNetwork> orchs(customers.size(), ActorNetwork::zeros(kMarketObservationSize));
  const auto cmp = compare(customers, orchs, protos, series);
  REQUIRE(cmp.rows.size() == 4);
  CHECK(cmp.rows[0].customer_id == customers[0].id);
  for (const auto& row : cmp.rows) {
    CHECK(std::isfinite(row.orch_value_nok));
    CHECK(std::isfinite(row.linear_satisfaction));
  }

  std::ostringstream out;
  write_comparison_csv(out, cmp.rows);
  CHECK(out.str().rfind("customer_id,orch_value_nok,orch_satisfaction,linear_value_nok,linear_satisfaction\n", 0) == 0);

  std::ostringstream strat;
  write_strategy_csv(strat, cmp.orchestrated[0]);
  CHECK(strat.str().rfind("month,act_savings,act_property,act_stocks,act_luxury,act_mortgage,w_openness,", 0) == 0);

  const auto none = compare({}, {}, protos, series);
  CHECK(none.rows.empty());
  std::ostringstream header_only;
  write_comparison_csv(header_only, none.rows);
  CHECK(header_only.str() == "customer_id,orch_value_nok,orch_satisfaction,linear_value_nok,linear_satisfaction\n");

  CHECK_THROWS(compare(customers, std::span<const ActorNetwork>(orchs).first(2), protos, series));
}

TEST_CASE("orchestrator training with behavior features") {
  const auto series = test_series(8);
  const auto protos = random_prototypes(9);
  const CustomerProfile customer("b", PersonalityVector({0.1, 0.2, 0.3, 0.4, 0.5}), Vector{0.1, -0.2, 0.3});
  TrainConfig config;
  config.episodes = 3;
  config.batch_size = 4;
  config.updates_per_episode = 1;
  config.critic_hidden = 8;
  const auto a = train_orchestrator(customer, protos, series, config);
  const auto b = train_orchestrator(customer, protos, series, config);
  CHECK(a.customer_id == "b");
  CHECK(a.behavior == customer.behavior);
  CHECK(a.actor.observation_size() == kMarketObservationSize + 3);
  CHECK(a.log == b.log);
  CHECK(a.log.size() == 3);
}
