#include "ahrl/ahrl.h"

#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "ahrl/affinity.hpp"
#include "ahrl/checkpoint.hpp"
#include "ahrl/config.hpp"
#include "ahrl/errors.hpp"
#include "ahrl/market.hpp"
#include "ahrl/orchestrator.hpp"
#include "ahrl/prototypes.hpp"
#include "ahrl/statespace.hpp"

struct ahrl_config {
  ahrl::RunConfig config;
};

struct ahrl_series {
  ahrl::PriceSeries series;
};

struct ahrl_agent {
  ahrl::Checkpoint checkpoint;
  std::vector<ahrl::TrainingLogRow> log;
};

struct ahrl_customers {
  std::vector<ahrl::CustomerProfile> profiles;
};

struct ahrl_comparison {
  ahrl::Comparison comparison;
};

struct ahrl_personality {
  ahrl::PersonalityRnn model;
};

namespace {

thread_local std::string g_last_error;

enum class Context { call, data };

// Runs `fn`, translating exceptions into status codes. In a data context
// (reading files) contract and shape violations count as malformed data.
template <class Fn>
ahrl_status guarded(Context context, Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return AHRL_OK;
  } catch (const ahrl::DivergenceError& e) {
    g_last_error = std::string(e.what()) + "\n" + e.snapshot();
    return AHRL_NUMERIC;
  } catch (const ahrl::NumericError& e) {
    g_last_error = e.what();
    return AHRL_NUMERIC;
  } catch (const ahrl::StateError& e) {
    g_last_error = e.what();
    return AHRL_STATE;
  } catch (const ahrl::IoError& e) {
    g_last_error = e.what();
    return AHRL_DATA;
  } catch (const ahrl::ParseError& e) {
    g_last_error = e.what();
    return AHRL_DATA;
  } catch (const ahrl::ShapeError& e) {
    g_last_error = e.what();
    return context == Context::data ? AHRL_DATA : AHRL_INVALID_ARGUMENT;
  } catch (const ahrl::ContractError& e) {
    g_last_error = e.what();
    return context == Context::data ? AHRL_DATA : AHRL_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return AHRL_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AHRL_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return AHRL_INTERNAL;
  }
}

template <class Fn>
ahrl_status guarded(Fn&& fn) {
  return guarded(Context::call, std::forward<Fn>(fn));
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw ahrl::ContractError(std::string(what) + " is NULL");
}

void copy_out(const std::string& s, char* buffer, std::size_t capacity, std::size_t* needed) {
  if (needed != nullptr) *needed = s.size();
  if (buffer == nullptr || capacity == 0) return;
  const std::size_t n = std::min(s.size(), capacity - 1);
  std::memcpy(buffer, s.data(), n);
  buffer[n] = '\0';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ahrl::IoError("cannot write '" + path + "'");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw ahrl::IoError("write failed for '" + path + "'");
}

const ahrl::Checkpoint& prototype_checkpoint(const ahrl_agent* agent, ahrl::Trait trait) {
  require(agent, "prototype");
  const auto& c = agent->checkpoint;
  if (c.kind != "prototype" || c.label != ahrl::trait_name(trait)) {
    throw ahrl::ContractError(std::string("expected the ") + ahrl::trait_name(trait) + " prototype, got " + c.kind +
                              " '" + c.label + "'");
  }
  return c;
}

std::vector<ahrl::ActorNetwork> prototype_actors(ahrl_agent* const prototypes[AHRL_TRAITS]) {
  require(prototypes, "prototypes");
  std::vector<ahrl::ActorNetwork> actors;
  for (const auto t : ahrl::kAllTraits) actors.push_back(prototype_checkpoint(prototypes[index(t)], t).actor);
  return actors;
}

ahrl_agent* new_prototype(const ahrl::PrototypeAgent& agent, const ahrl::TrainConfig& config) {
  auto* out = new ahrl_agent;
  out->checkpoint = {"prototype", ahrl::trait_name(agent.trait), agent.prior, {}, config, agent.actor};
  out->log = agent.log;
  return out;
}

}  // namespace

extern "C" {

const char* ahrl_version(void) { return "1.0.0"; }

const char* ahrl_status_name(ahrl_status status) {
  switch (status) {
    case AHRL_OK: return "ok";
    case AHRL_INVALID_ARGUMENT: return "invalid argument";
    case AHRL_DATA: return "data error";
    case AHRL_NUMERIC: return "numeric error";
    case AHRL_STATE: return "state error";
    case AHRL_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ahrl_last_error(void) { return g_last_error.c_str(); }

// ---------------------------------------------------------------------------
// Config

ahrl_status ahrl_config_create(ahrl_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new ahrl_config;
  });
}

void ahrl_config_free(ahrl_config* config) { delete config; }

ahrl_status ahrl_config_merge_file(ahrl_config* config, const char* path) {
  return guarded(Context::data, [&] {
    require(config, "config");
    require(path, "path");
    config->config.merge_file(path);
  });
}

ahrl_status ahrl_config_set(ahrl_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->config.set(key, value);
  });
}

ahrl_status ahrl_config_get(const ahrl_config* config, const char* key, char* buffer, size_t capacity,
                            size_t* needed) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    copy_out(config->config.get(key), buffer, capacity, needed);
  });
}

ahrl_status ahrl_config_dump(const ahrl_config* config, char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] {
    require(config, "config");
    copy_out(config->config.to_string(), buffer, capacity, needed);
  });
}

// ---------------------------------------------------------------------------
// Series

ahrl_status ahrl_series_generate(const ahrl_config* config, ahrl_series** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    const auto& c = config->config;
    auto series = ahrl::generate_synthetic(c.market_config(), c.get_count("months"));
    *out = new ahrl_series{std::move(series)};
  });
}

ahrl_status ahrl_series_load(const char* path, ahrl_series** out) {
  return guarded(Context::data, [&] {
    require(path, "path");
    require(out, "out");
    auto series = ahrl::load_price_csv(path);
    *out = new ahrl_series{std::move(series)};
  });
}

ahrl_status ahrl_series_save(const ahrl_series* series, const char* path) {
  return guarded([&] {
    require(series, "series");
    require(path, "path");
    ahrl::save_price_csv(path, series->series);
  });
}

size_t ahrl_series_months(const ahrl_series* series) { return series == nullptr ? 0 : series->series.months(); }

void ahrl_series_free(ahrl_series* series) { delete series; }

// ---------------------------------------------------------------------------
// Agents

ahrl_status ahrl_prototype_train(const ahrl_config* config, const ahrl_series* series, const char* trait,
                                 ahrl_agent** out) {
  return guarded([&] {
    require(config, "config");
    require(series, "series");
    require(trait, "trait");
    require(out, "out");
    const auto t = ahrl::trait_from_name(trait);
    if (!t) throw ahrl::ContractError(std::string("unknown trait '") + trait + "'");
    const auto tc = config->config.train_config();
    const auto agent = ahrl::train_prototype(*t, series->series, tc, config->config.environment());
    *out = new_prototype(agent, tc);
  });
}

ahrl_status ahrl_prototype_train_all(const ahrl_config* config, const ahrl_series* series,
                                     ahrl_agent* out[AHRL_TRAITS]) {
  return guarded([&] {
    require(config, "config");
    require(series, "series");
    require(out, "out");
    const auto tc = config->config.train_config();
    const auto agents = ahrl::train_all_prototypes(series->series, tc, config->config.get_count("threads"),
                                                   config->config.environment());
    for (std::size_t i = 0; i < agents.size(); ++i) out[i] = new_prototype(agents[i], tc);
  });
}

ahrl_status ahrl_agent_load(const char* path, ahrl_agent** out) {
  return guarded(Context::data, [&] {
    require(path, "path");
    require(out, "out");
    auto c = ahrl::load_checkpoint(path);
    *out = new ahrl_agent{std::move(c), {}};
  });
}

ahrl_status ahrl_agent_save(const ahrl_agent* agent, const char* path) {
  return guarded([&] {
    require(agent, "agent");
    require(path, "path");
    ahrl::save_checkpoint(path, agent->checkpoint);
  });
}

ahrl_status ahrl_agent_write_log(const ahrl_agent* agent, const char* path) {
  return guarded([&] {
    require(agent, "agent");
    require(path, "path");
    if (agent->log.empty()) throw ahrl::StateError("agent has no training log (loaded from a checkpoint)");
    auto out = open_out(path);
    ahrl::write_training_log(out, agent->log);
    finish(out, path);
  });
}

ahrl_status ahrl_agent_write_schedule(const ahrl_agent* agent, const ahrl_series* series, const ahrl_config* config,
                                      const char* path) {
  return guarded([&] {
    require(agent, "agent");
    require(series, "series");
    require(config, "config");
    require(path, "path");
    if (agent->checkpoint.kind != "prototype") throw ahrl::StateError("schedules are exported for prototypes only");
    const auto schedule =
        ahrl::strategy_schedule(agent->checkpoint.actor, series->series, config->config.environment());
    auto out = open_out(path);
    ahrl::write_schedule_csv(out, schedule);
    finish(out, path);
  });
}

ahrl_status ahrl_agent_label(const ahrl_agent* agent, char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] {
    require(agent, "agent");
    copy_out(agent->checkpoint.label, buffer, capacity, needed);
  });
}

ahrl_status ahrl_agent_prior(const ahrl_agent* agent, double out[AHRL_TRAITS]) {
  return guarded([&] {
    require(agent, "agent");
    require(out, "out");
    for (std::size_t i = 0; i < AHRL_TRAITS; ++i) out[i] = agent->checkpoint.prior[i];
  });
}

void ahrl_agent_free(ahrl_agent* agent) { delete agent; }

// ---------------------------------------------------------------------------
// Customers

ahrl_status ahrl_customers_load(const char* path, ahrl_customers** out) {
  return guarded(Context::data, [&] {
    require(path, "path");
    require(out, "out");
    auto* c = new ahrl_customers;
    for (const auto& r : ahrl::load_customers_csv(path)) c->profiles.emplace_back(r.id, r.personality);
    *out = c;
  });
}

ahrl_status ahrl_customers_acceptance(ahrl_customers** out) {
  return guarded([&] {
    require(out, "out");
    *out = new ahrl_customers{ahrl::acceptance_customers()};
  });
}

size_t ahrl_customers_count(const ahrl_customers* customers) {
  return customers == nullptr ? 0 : customers->profiles.size();
}

ahrl_status ahrl_customers_id(const ahrl_customers* customers, size_t index, char* buffer, size_t capacity,
                              size_t* needed) {
  return guarded([&] {
    require(customers, "customers");
    if (index >= customers->profiles.size()) throw ahrl::ContractError("customer index out of range");
    copy_out(customers->profiles[index].id, buffer, capacity, needed);
  });
}

ahrl_status ahrl_customers_attach_behavior(ahrl_customers* customers, const ahrl_personality* model,
                                           const ahrl_config* config) {
  return guarded([&] {
    require(customers, "customers");
    require(model, "model");
    require(config, "config");
    const auto seed = config->config.get_count("behavior_seed");
    std::vector<ahrl::CustomerProfile> updated;
    for (std::size_t i = 0; i < customers->profiles.size(); ++i) {
      const auto& p = customers->profiles[i];
      const auto history = ahrl::synth_transactions(p.personality, seed + i).history;
      auto behavior = ahrl::extract_trajectory(model->model, history).states.back();
      updated.emplace_back(p.id, p.personality, std::move(behavior));
    }
    customers->profiles = std::move(updated);
  });
}

void ahrl_customers_free(ahrl_customers* customers) { delete customers; }

// ---------------------------------------------------------------------------
// Orchestration

ahrl_status ahrl_orchestrator_train(const ahrl_config* config, const ahrl_series* series,
                                    const ahrl_customers* customers, size_t index,
                                    ahrl_agent* const prototypes[AHRL_TRAITS], ahrl_agent** out) {
  return guarded([&] {
    require(config, "config");
    require(series, "series");
    require(customers, "customers");
    require(out, "out");
    if (index >= customers->profiles.size()) throw ahrl::ContractError("customer index out of range");
    const auto actors = prototype_actors(prototypes);
    const auto& customer = customers->profiles[index];
    const auto tc = config->config.orchestrator_config();
    auto agent = ahrl::train_orchestrator(customer, actors, series->series, tc, config->config.environment());
    auto* a = new ahrl_agent;
    a->checkpoint = {"orchestrator", customer.id, agent.prior, agent.behavior, tc, std::move(agent.actor)};
    a->log = std::move(agent.log);
    *out = a;
  });
}

ahrl_status ahrl_compare(const ahrl_config* config, const ahrl_series* series, const ahrl_customers* customers,
                         ahrl_agent* const* orchestrators, ahrl_agent* const prototypes[AHRL_TRAITS],
                         ahrl_comparison** out) {
  return guarded([&] {
    require(config, "config");
    require(series, "series");
    require(customers, "customers");
    require(out, "out");
    const auto actors = prototype_actors(prototypes);
    const auto n = customers->profiles.size();
    if (n > 0) require(orchestrators, "orchestrators");
    // Each customer is evaluated with the behavioural feature its orchestrator was trained on.
    std::vector<ahrl::CustomerProfile> profiles;
    std::vector<ahrl::ActorNetwork> orch;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = customers->profiles[i];
      require(orchestrators[i], "orchestrator");
      const auto& c = orchestrators[i]->checkpoint;
      if (c.kind != "orchestrator" || c.label != p.id) {
        throw ahrl::ContractError("expected the orchestrator for customer '" + p.id + "', got " + c.kind + " '" +
                                  c.label + "'");
      }
      profiles.emplace_back(p.id, p.personality, c.behavior);
      orch.push_back(c.actor);
    }
    auto result = ahrl::compare(profiles, orch, actors, series->series, config->config.environment());
    *out = new ahrl_comparison{std::move(result)};
  });
}

size_t ahrl_comparison_count(const ahrl_comparison* comparison) {
  return comparison == nullptr ? 0 : comparison->comparison.rows.size();
}

ahrl_status ahrl_comparison_row(const ahrl_comparison* comparison, size_t index, double out[4]) {
  return guarded([&] {
    require(comparison, "comparison");
    require(out, "out");
    const auto& rows = comparison->comparison.rows;
    if (index >= rows.size()) throw ahrl::ContractError("comparison row out of range");
    const auto& r = rows[index];
    out[0] = r.orch_value_nok;
    out[1] = r.orch_satisfaction;
    out[2] = r.linear_value_nok;
    out[3] = r.linear_satisfaction;
  });
}

ahrl_status ahrl_comparison_write(const ahrl_comparison* comparison, const char* path) {
  return guarded([&] {
    require(comparison, "comparison");
    require(path, "path");
    auto out = open_out(path);
    ahrl::write_comparison_csv(out, comparison->comparison.rows);
    finish(out, path);
  });
}

ahrl_status ahrl_comparison_write_strategy(const ahrl_comparison* comparison, size_t index, const char* path) {
  return guarded([&] {
    require(comparison, "comparison");
    require(path, "path");
    const auto& orch = comparison->comparison.orchestrated;
    if (index >= orch.size()) throw ahrl::ContractError("comparison row out of range");
    auto out = open_out(path);
    ahrl::write_strategy_csv(out, orch[index]);
    finish(out, path);
  });
}

void ahrl_comparison_free(ahrl_comparison* comparison) { delete comparison; }

// ---------------------------------------------------------------------------
// Personality model

ahrl_status ahrl_personality_train_synthetic(const ahrl_config* config, ahrl_personality** out,
                                             double* test_accuracy) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    const auto& c = config->config;
    const auto pc = c.personality_config();
    const auto train = ahrl::synth_dataset(c.get_count("personality_samples"), pc.seed);
    auto result = ahrl::train_personality_rnn(train, pc);
    if (test_accuracy != nullptr) {
      const auto test = ahrl::synth_dataset(c.get_count("personality_test_samples"), pc.seed + 1);
      *test_accuracy = ahrl::dominant_accuracy(result.model, test);
    }
    *out = new ahrl_personality{std::move(result.model)};
  });
}

ahrl_status ahrl_personality_load(const char* path, ahrl_personality** out) {
  return guarded(Context::data, [&] {
    require(path, "path");
    require(out, "out");
    auto model = ahrl::load_personality_model(path);
    *out = new ahrl_personality{std::move(model)};
  });
}

ahrl_status ahrl_personality_save(const ahrl_personality* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    ahrl::save_personality_model(path, model->model);
  });
}

ahrl_status ahrl_attractors_export(const ahrl_personality* model, const ahrl_config* config,
                                   const char* attractor_path, const char* trajectory_path, double* labeling_rate) {
  return guarded([&] {
    require(model, "model");
    require(config, "config");
    require(attractor_path, "attractor_path");
    require(trajectory_path, "trajectory_path");
    const auto& c = config->config;
    const auto test = ahrl::synth_dataset(c.get_count("personality_test_samples"), c.get_count("seed") + 1);
    auto options = c.attractor_options();
    for (const auto& h : test) options.probes.push_back(h.history);
    const auto set = ahrl::estimate_attractors(model->model, options);

    auto traj = open_out(trajectory_path);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      std::ostringstream id;
      id << "test_" << i;
      ahrl::write_trajectory_csv(traj, id.str(), ahrl::extract_trajectory(model->model, test[i].history), i == 0);
      const auto converged = ahrl::converge_trajectory(model->model, test[i].history, options.repeats);
      hits += set.nearest(converged.states.back()) == index(test[i].dominant);
    }
    if (test.empty()) ahrl::write_trajectory_csv(traj, "", {}, true);
    finish(traj, trajectory_path);

    auto attr = open_out(attractor_path);
    ahrl::write_attractor_csv(attr, set);
    finish(attr, attractor_path);

    if (labeling_rate != nullptr) {
      *labeling_rate = test.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(test.size());
    }
  });
}

void ahrl_personality_free(ahrl_personality* model) { delete model; }

}  // extern "C"
