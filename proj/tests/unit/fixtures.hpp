#pragma once

#include <memory>
#include <random>
#include <vector>

#include "ahrl/ddpg.hpp"

namespace fixtures {

inline ahrl::ActionArray random_simplex(ahrl::Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  ahrl::ActionArray a{};
  double s = 0.0;
  for (double& v : a) s += (v = e(rng));
  for (double& v : a) v /= s;
  return a;
}

inline std::shared_ptr<ahrl::ObservationTrace> random_trace(std::size_t obs_size, std::size_t steps, ahrl::Rng& rng) {
  std::normal_distribution<double> n(0.0, 0.5);
  auto trace = std::make_shared<ahrl::ObservationTrace>();
  for (std::size_t t = 0; t <= steps; ++t) {
    ahrl::Vector o(obs_size);
    for (double& v : o) v = n(rng);
    trace->observations.push_back(o);
  }
  return trace;
}

// Transitions spread over a few traces, mixing terminal and non-terminal steps.
inline std::vector<ahrl::Transition> random_batch(std::size_t obs_size, std::size_t count, ahrl::Rng& rng,
                                                  std::size_t traces = 3, std::size_t steps = 6) {
  std::vector<std::shared_ptr<const ahrl::ObservationTrace>> pool;
  for (std::size_t i = 0; i < traces; ++i) pool.push_back(random_trace(obs_size, steps, rng));
  std::uniform_int_distribution<std::size_t> pick_trace(0, traces - 1), pick_step(0, steps - 1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<ahrl::Transition> out;
  for (std::size_t i = 0; i < count; ++i) {
    ahrl::Transition t;
    t.trace = pool[pick_trace(rng)];
    t.step = pick_step(rng);
    t.terminal = t.step == steps - 1;
    t.action = random_simplex(rng);
    t.reward = n(rng);
    out.push_back(t);
  }
  return out;
}

}  // namespace fixtures
