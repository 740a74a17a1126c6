// Command-line front end over the C API.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ahrl/ahrl.h"

namespace fs = std::filesystem;

namespace {

constexpr const char* kTraits[AHRL_TRAITS] = {"openness", "conscientiousness", "extraversion", "agreeableness",
                                              "neuroticism"};

// Carries a library status out of a command.
struct Failure : std::runtime_error {
  ahrl_status status;
  Failure(ahrl_status s, const std::string& what) : std::runtime_error(what), status(s) {}
};

void check(ahrl_status s, const std::string& context) {
  if (s != AHRL_OK) throw Failure(s, context + ": " + ahrl_last_error());
}

int exit_code(ahrl_status s) {
  switch (s) {
    case AHRL_OK: return 0;
    case AHRL_INVALID_ARGUMENT: return 1;
    case AHRL_NUMERIC: return 3;
    default: return 2;
  }
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Config = std::unique_ptr<ahrl_config, Deleter<ahrl_config, ahrl_config_free>>;
using Series = std::unique_ptr<ahrl_series, Deleter<ahrl_series, ahrl_series_free>>;
using Agent = std::unique_ptr<ahrl_agent, Deleter<ahrl_agent, ahrl_agent_free>>;
using Customers = std::unique_ptr<ahrl_customers, Deleter<ahrl_customers, ahrl_customers_free>>;
using Comparison = std::unique_ptr<ahrl_comparison, Deleter<ahrl_comparison, ahrl_comparison_free>>;
using Personality = std::unique_ptr<ahrl_personality, Deleter<ahrl_personality, ahrl_personality_free>>;

struct Options {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::string> seed, market_seed, months, episodes, threads;

  std::string out, out_dir, prices, trait, customers, proto_dir, orch_dir, strategy_dir, behavior_model, model;
  bool all = false;
  bool synth = false;
};

std::string dump(const ahrl_config* c) {
  std::size_t n = 0;
  check(ahrl_config_dump(c, nullptr, 0, &n), "config");
  std::string s(n, '\0');
  check(ahrl_config_dump(c, s.data(), n + 1, &n), "config");
  return s;
}

std::string customer_id(const ahrl_customers* c, std::size_t i) {
  std::size_t n = 0;
  check(ahrl_customers_id(c, i, nullptr, 0, &n), "customers");
  std::string s(n, '\0');
  check(ahrl_customers_id(c, i, s.data(), n + 1, &n), "customers");
  if (s.empty() || s.find_first_of("/\\") != std::string::npos || s[0] == '.') {
    throw Failure(AHRL_DATA, "customer id '" + s + "' cannot be used in a file name");
  }
  return s;
}

Config resolve(const Options& o) {
  ahrl_config* raw = nullptr;
  check(ahrl_config_create(&raw), "config");
  Config c(raw);
  if (!o.config_file.empty()) check(ahrl_config_merge_file(c.get(), o.config_file.c_str()), "config");
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Failure(AHRL_INVALID_ARGUMENT, "--set expects key=value, got '" + kv + "'");
    check(ahrl_config_set(c.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "--set " + kv);
  }
  const std::pair<const char*, const std::optional<std::string>*> named[] = {
      {"seed", &o.seed}, {"market_seed", &o.market_seed}, {"months", &o.months},
      {"episodes", &o.episodes}, {"threads", &o.threads}};
  for (const auto& [key, value] : named) {
    if (*value) check(ahrl_config_set(c.get(), key, (*value)->c_str()), std::string("--") + key);
  }
  return c;
}

// Every output gets `<file>.cfg`: the command and the resolved configuration.
void write_sidecar(const std::string& path, const std::string& command, const ahrl_config* c) {
  const std::string side = path + ".cfg";
  std::ofstream out(side, std::ios::binary);
  out << "# ahrl " << ahrl_version() << ' ' << command << '\n' << dump(c);
  out.flush();
  if (!out) throw Failure(AHRL_DATA, "cannot write '" + side + "'");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure(AHRL_DATA, "cannot create directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

Series load_series(const std::string& path) {
  ahrl_series* raw = nullptr;
  check(ahrl_series_load(path.c_str(), &raw), "prices");
  return Series(raw);
}

Customers load_customers(const std::string& path) {
  ahrl_customers* raw = nullptr;
  check(ahrl_customers_load(path.c_str(), &raw), "customers");
  return Customers(raw);
}

Agent load_agent(const std::string& path) {
  ahrl_agent* raw = nullptr;
  check(ahrl_agent_load(path.c_str(), &raw), "checkpoint");
  return Agent(raw);
}

std::vector<Agent> load_prototypes(const std::string& dir) {
  std::vector<Agent> out;
  for (const char* t : kTraits) out.push_back(load_agent(join(dir, std::string("proto_") + t + ".json")));
  return out;
}

std::array<ahrl_agent*, AHRL_TRAITS> raw(const std::vector<Agent>& agents) {
  std::array<ahrl_agent*, AHRL_TRAITS> out{};
  for (std::size_t i = 0; i < AHRL_TRAITS; ++i) out[i] = agents[i].get();
  return out;
}

// ---------------------------------------------------------------------------

void market_gen(const Options& o) {
  const auto c = resolve(o);
  ahrl_series* raw_series = nullptr;
  check(ahrl_series_generate(c.get(), &raw_series), "market");
  Series s(raw_series);
  check(ahrl_series_save(s.get(), o.out.c_str()), "market");
  write_sidecar(o.out, "market-gen", c.get());
  std::printf("wrote %zu months to %s\n", ahrl_series_months(s.get()), o.out.c_str());
}

void save_prototype(const ahrl_agent* agent, const ahrl_series* series, const ahrl_config* c, const std::string& dir) {
  std::size_t n = 0;
  check(ahrl_agent_label(agent, nullptr, 0, &n), "agent");
  std::string trait(n, '\0');
  check(ahrl_agent_label(agent, trait.data(), n + 1, &n), "agent");
  const std::string base = join(dir, "proto_" + trait);
  check(ahrl_agent_save(agent, (base + ".json").c_str()), "checkpoint");
  check(ahrl_agent_write_schedule(agent, series, c, (base + "_schedule.csv").c_str()), "schedule");
  check(ahrl_agent_write_log(agent, (base + "_log.csv").c_str()), "log");
  for (const char* suffix : {".json", "_schedule.csv", "_log.csv"}) write_sidecar(base + suffix, "train-proto", c);
  std::printf("trained %s prototype -> %s.json\n", trait.c_str(), base.c_str());
}

void train_proto(const Options& o) {
  if (o.all == !o.trait.empty()) throw Failure(AHRL_INVALID_ARGUMENT, "give exactly one of --trait or --all");
  const auto c = resolve(o);
  const auto series = load_series(o.prices);
  ensure_dir(o.out_dir);
  if (o.all) {
    ahrl_agent* agents[AHRL_TRAITS] = {};
    check(ahrl_prototype_train_all(c.get(), series.get(), agents), "train");
    std::vector<Agent> owned;
    for (auto* a : agents) owned.emplace_back(a);
    for (const auto& a : owned) save_prototype(a.get(), series.get(), c.get(), o.out_dir);
  } else {
    ahrl_agent* raw_agent = nullptr;
    check(ahrl_prototype_train(c.get(), series.get(), o.trait.c_str(), &raw_agent), "train");
    Agent a(raw_agent);
    save_prototype(a.get(), series.get(), c.get(), o.out_dir);
  }
}

void attach_behavior(const Options& o, ahrl_customers* customers, const ahrl_config* c) {
  if (o.behavior_model.empty()) return;
  ahrl_personality* raw_model = nullptr;
  check(ahrl_personality_load(o.behavior_model.c_str(), &raw_model), "behavior model");
  Personality model(raw_model);
  check(ahrl_customers_attach_behavior(customers, model.get(), c), "behavior");
}

void train_orchestrate(const Options& o) {
  const auto c = resolve(o);
  const auto series = load_series(o.prices);
  const auto customers = load_customers(o.customers);
  const auto protos = load_prototypes(o.proto_dir);
  attach_behavior(o, customers.get(), c.get());
  ensure_dir(o.out_dir);
  const auto p = raw(protos);
  for (std::size_t i = 0; i < ahrl_customers_count(customers.get()); ++i) {
    const auto id = customer_id(customers.get(), i);
    ahrl_agent* raw_agent = nullptr;
    check(ahrl_orchestrator_train(c.get(), series.get(), customers.get(), i, p.data(), &raw_agent), "train " + id);
    Agent a(raw_agent);
    const std::string base = join(o.out_dir, "orch_" + id);
    check(ahrl_agent_save(a.get(), (base + ".json").c_str()), "checkpoint");
    check(ahrl_agent_write_log(a.get(), (base + "_log.csv").c_str()), "log");
    for (const char* suffix : {".json", "_log.csv"}) write_sidecar(base + suffix, "train-orchestrate", c.get());
    std::printf("trained orchestrator for %s -> %s.json\n", id.c_str(), base.c_str());
  }
}

void compare(const Options& o) {
  const auto c = resolve(o);
  const auto series = load_series(o.prices);
  const auto customers = load_customers(o.customers);
  const auto protos = load_prototypes(o.proto_dir);
  const std::size_t n = ahrl_customers_count(customers.get());
  std::vector<Agent> orch;
  std::vector<ahrl_agent*> orch_raw;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back(customer_id(customers.get(), i));
    orch.push_back(load_agent(join(o.orch_dir, "orch_" + ids.back() + ".json")));
    orch_raw.push_back(orch.back().get());
  }
  const auto p = raw(protos);
  ahrl_comparison* raw_cmp = nullptr;
  check(ahrl_compare(c.get(), series.get(), customers.get(), orch_raw.data(), p.data(), &raw_cmp), "compare");
  Comparison cmp(raw_cmp);
  check(ahrl_comparison_write(cmp.get(), o.out.c_str()), "report");
  write_sidecar(o.out, "compare", c.get());
  if (!o.strategy_dir.empty()) {
    ensure_dir(o.strategy_dir);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string path = join(o.strategy_dir, "strategy_" + ids[i] + ".csv");
      check(ahrl_comparison_write_strategy(cmp.get(), i, path.c_str()), "strategy");
      write_sidecar(path, "compare", c.get());
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double row[4];
    check(ahrl_comparison_row(cmp.get(), i, row), "compare");
    std::printf("%s  orchestrated %.4f (%.0f NOK)  linear %.4f (%.0f NOK)\n", ids[i].c_str(), row[1], row[0], row[3],
                row[2]);
  }
}

void attractors(const Options& o) {
  if (o.synth == !o.model.empty()) throw Failure(AHRL_INVALID_ARGUMENT, "give exactly one of --synth or --model");
  const auto c = resolve(o);
  ensure_dir(o.out_dir);
  ahrl_personality* raw_model = nullptr;
  if (o.synth) {
    double accuracy = 0.0;
    check(ahrl_personality_train_synthetic(c.get(), &raw_model, &accuracy), "personality model");
    Personality owned(raw_model);
    const std::string path = join(o.out_dir, "personality_model.json");
    check(ahrl_personality_save(owned.get(), path.c_str()), "personality model");
    write_sidecar(path, "attractors", c.get());
    std::printf("personality model test accuracy %.4f\n", accuracy);
    raw_model = owned.release();
  } else {
    check(ahrl_personality_load(o.model.c_str(), &raw_model), "personality model");
  }
  Personality model(raw_model);
  const std::string attr = join(o.out_dir, "attractors.csv");
  const std::string traj = join(o.out_dir, "trajectories.csv");
  double rate = 0.0;
  check(ahrl_attractors_export(model.get(), c.get(), attr.c_str(), traj.c_str(), &rate), "attractors");
  write_sidecar(attr, "attractors", c.get());
  write_sidecar(traj, "attractors", c.get());
  std::printf("nearest-attractor labelling rate %.4f\n", rate);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affinity-regularized hierarchical RL for personalised portfolio allocation"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;

  app.add_option("--config", o.config_file, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", o.sets, "override one configuration key (key=value), repeatable");
  app.add_option("--seed", o.seed, "training seed");
  app.add_option("--market-seed", o.market_seed, "synthetic market seed");
  app.add_option("--months", o.months, "horizon in months");
  app.add_option("--episodes", o.episodes, "training episodes");
  app.add_option("--threads", o.threads, "worker threads");

  auto* gen = app.add_subcommand("market-gen", "generate a synthetic price CSV");
  gen->add_option("--out", o.out, "output CSV")->required();

  auto* proto = app.add_subcommand("train-proto", "train prototypical agents");
  proto->add_option("--prices", o.prices, "price CSV")->required();
  proto->add_option("--trait", o.trait, "trait to train");
  proto->add_flag("--all", o.all, "train all five traits");
  proto->add_option("--out-dir", o.out_dir, "output directory")->required();

  auto* orch = app.add_subcommand("train-orchestrate", "train one orchestrator per customer");
  orch->add_option("--customers", o.customers, "personality CSV")->required();
  orch->add_option("--prices", o.prices, "price CSV")->required();
  orch->add_option("--proto-dir", o.proto_dir, "directory with proto_<trait>.json")->required();
  orch->add_option("--out-dir", o.out_dir, "output directory")->required();
  orch->add_option("--behavior-model", o.behavior_model, "personality model supplying behavioural features");

  auto* cmp = app.add_subcommand("compare", "orchestrated vs linear-combination report");
  cmp->add_option("--customers", o.customers, "personality CSV")->required();
  cmp->add_option("--prices", o.prices, "price CSV")->required();
  cmp->add_option("--proto-dir", o.proto_dir, "directory with proto_<trait>.json")->required();
  cmp->add_option("--orch-dir", o.orch_dir, "directory with orch_<customer>.json")->required();
  cmp->add_option("--out", o.out, "report CSV")->required();
  cmp->add_option("--strategy-dir", o.strategy_dir, "per-customer strategy CSVs");

  auto* attr = app.add_subcommand("attractors", "personality state-space attractors");
  attr->add_flag("--synth", o.synth, "train a personality model on synthetic data");
  attr->add_option("--model", o.model, "personality model JSON");
  attr->add_option("--out-dir", o.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) market_gen(o);
    else if (*proto) train_proto(o);
    else if (*orch) train_orchestrate(o);
    else if (*cmp) compare(o);
    else if (*attr) attractors(o);
  } catch (const Failure& f) {
    std::fprintf(stderr, "ahrl: %s\n", f.what());
    return exit_code(f.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ahrl: %s\n", e.what());
    return 2;
  }
  return 0;
}
