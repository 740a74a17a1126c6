#include "ahrl/prototypes.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <ostream>
#include <thread>

#include "ahrl/errors.hpp"

namespace ahrl {

std::uint64_t prototype_seed(const TrainConfig& config, Trait trait) {
  return config.seed + static_cast<std::uint64_t>(index(trait));
}

std::vector<ActionArray> strategy_schedule(const ActorNetwork& actor, const PriceSeries& series,
                                           const EnvironmentSettings& settings) {
  PortfolioEnvironment env(series, profit_reward(), settings);
  return rollout(actor, env).actions;
}

PrototypeAgent train_prototype(Trait trait, const PriceSeries& series, const TrainConfig& config,
                               const EnvironmentSettings& settings) {
  TrainConfig local = config;
  local.seed = prototype_seed(config, trait);
  PrototypeAgent agent;
  agent.trait = trait;
  agent.prior = prototype_prior(trait);
  PortfolioEnvironment env(series, profit_reward(), settings);
  auto result = train(env, agent.prior, local);
  agent.initial_average = time_average(strategy_schedule(result.initial_actor, series, settings));
  agent.actor = std::move(result.actor);
  agent.log = std::move(result.log);
  agent.schedule = strategy_schedule(agent.actor, series, settings);
  return agent;
}

std::vector<PrototypeAgent> train_all_prototypes(const PriceSeries& series, const TrainConfig& config,
                                                 std::size_t threads, const EnvironmentSettings& settings) {
  std::vector<PrototypeAgent> agents(kTraitCount);
  std::vector<std::exception_ptr> errors(kTraitCount);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < kTraitCount; i = next++) {
      try {
        agents[i] = train_prototype(kAllTraits[i], series, config, settings);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(threads, 1, kTraitCount);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return agents;
}

void write_schedule_csv(std::ostream& out, const std::vector<ActionArray>& schedule) {
  out << "month,act_savings,act_property,act_stocks,act_luxury,act_mortgage\n";
  char buf[32];
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    out << t;
    for (double a : schedule[t]) {
      std::snprintf(buf, sizeof buf, ",%.17g", a);
      out << buf;
    }
    out << '\n';
  }
}

void export_schedule(std::ostream& out, const PrototypeAgent& agent, const PriceSeries& series,
                     const EnvironmentSettings& settings) {
  write_schedule_csv(out, strategy_schedule(agent.actor, series, settings));
}

}  // namespace ahrl
