#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "ahrl/affinity.hpp"
#include "ahrl/ddpg.hpp"
#include "ahrl/market.hpp"

namespace ahrl {

// One low-level agent per trait: profit reward, prior from the trait's
// coefficient column.
struct PrototypeAgent {
  Trait trait = Trait::openness;
  AffinityPrior prior{{0.2, 0.2, 0.2, 0.2, 0.2}};
  ActorNetwork actor;
  std::vector<ActionArray> schedule;  // noise-free rollout on the training series
  std::vector<TrainingLogRow> log;
  ActionArray initial_average{};      // time-averaged allocation before training

  ActionArray average() const { return time_average(schedule); }
};

// Seed actually used for a trait: config.seed + trait index, so single-trait
// and all-trait runs agree.
std::uint64_t prototype_seed(const TrainConfig& config, Trait trait);

PrototypeAgent train_prototype(Trait trait, const PriceSeries& series, const TrainConfig& config,
                               const EnvironmentSettings& settings = {});

// Trains the five prototypes on up to `threads` workers. Result order follows kAllTraits.
std::vector<PrototypeAgent> train_all_prototypes(const PriceSeries& series, const TrainConfig& config,
                                                 std::size_t threads = 1, const EnvironmentSettings& settings = {});

// Noise-free rollout of `actor` on `series`.
std::vector<ActionArray> strategy_schedule(const ActorNetwork& actor, const PriceSeries& series,
                                           const EnvironmentSettings& settings = {});

// Header `month,act_savings,act_property,act_stocks,act_luxury,act_mortgage`.
void write_schedule_csv(std::ostream& out, const std::vector<ActionArray>& schedule);
void export_schedule(std::ostream& out, const PrototypeAgent& agent, const PriceSeries& series,
                     const EnvironmentSettings& settings = {});

}  // namespace ahrl
