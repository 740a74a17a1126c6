// Acceptance suite. Prints one PASS/FAIL line per criterion.
//
//   ahrl_acceptance <ahrl cli> <customers csv> [criterion ...]

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ahrl/affinity.hpp"
#include "ahrl/config.hpp"
#include "ahrl/ddpg.hpp"
#include "ahrl/market.hpp"
#include "ahrl/orchestrator.hpp"
#include "ahrl/prototypes.hpp"
#include "ahrl/statespace.hpp"

namespace fs = std::filesystem;
using namespace ahrl;

namespace {

constexpr std::size_t kPrototypeEpisodes = 300;
constexpr std::size_t kOrchestratorEpisodes = 300;
constexpr std::size_t kContrastEpisodes = 300;
constexpr std::array<std::uint64_t, 3> kDominanceSeeds = {1, 2, 3};

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string vec(std::span<const double> v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt("%.4f", v[i]);
  return s + ")";
}

std::string cli_path;
std::string customers_csv;

// Prototypes from criterion 5, reused by criterion 7.
std::vector<PrototypeAgent> trained_prototypes;

TrainConfig default_training() { return RunConfig().train_config(); }

PriceSeries default_market(std::uint64_t seed) {
  SyntheticMarketConfig m;
  m.seed = seed;
  return generate_synthetic(m, kDefaultHorizon);
}

// ---------------------------------------------------------------------------

Verdict gradients() {
  Rng rng(2024);
  double worst = 0.0;
  std::string parts;
  auto track = [&](const char* name, double err) {
    worst = std::max(worst, err);
    parts += std::string(parts.empty() ? "" : ", ") + name + " " + fmt("%.2e", err);
  };

  const std::size_t obs = kMarketObservationSize;
  std::vector<std::shared_ptr<const ObservationTrace>> traces;
  std::normal_distribution<double> n(0.0, 0.5);
  for (int k = 0; k < 3; ++k) {
    auto trace = std::make_shared<ObservationTrace>();
    for (int t = 0; t <= 6; ++t) {
      Vector o(obs);
      for (double& v : o) v = n(rng);
      trace->observations.push_back(o);
    }
    traces.push_back(trace);
  }
  std::vector<Transition> batch;
  std::exponential_distribution<double> e(1.0);
  for (int i = 0; i < 16; ++i) {
    Transition tr;
    tr.trace = traces[static_cast<std::size_t>(i % 3)];
    tr.step = static_cast<std::size_t>(i % 6);
    tr.terminal = tr.step == 5;
    double s = 0.0;
    for (double& v : tr.action) s += (v = e(rng));
    for (double& v : tr.action) v /= s;
    tr.reward = n(rng);
    batch.push_back(tr);
  }

  auto actor = ActorNetwork::random(obs, rng);
  auto critic = CriticNetwork::random(obs, rng, 32);
  const auto target_actor = ActorNetwork::random(obs, rng);
  const auto target_critic = CriticNetwork::random(obs, rng, 32);
  const auto prior = prototype_prior(Trait::openness).weights();

  track("actor", finite_diff_check(actor.parameters(), [&](GradientRecord* g) {
    const auto r = actor_loss(batch, actor, critic, prior, 5.0);
    if (g) *g = r.gradient;
    return r.loss;
  }, 1e-6));
  track("critic", finite_diff_check(critic.parameters(), [&](GradientRecord* g) {
    const auto r = critic_loss(batch, critic, target_actor, target_critic, 0.95);
    if (g) *g = r.gradient;
    return r.loss;
  }, 1e-6));

  const auto data = synth_dataset(8, 5);
  auto personality = PersonalityRnn::random(rng);
  track("personality", finite_diff_check(personality.parameters(), [&](GradientRecord* g) {
    return personality_loss(personality, data, g);
  }, 1e-6));
  return {worst < 1e-4, "max error " + fmt("%.2e", worst) + " [" + parts + "]"};
}

Verdict prior_arithmetic() {
  // Shift by the column minimum and normalise, computed here from the literal table.
  const double columns[5][5] = {{-0.11, -0.15, 0.82, 0.16, -0.72},
                                {0.08, 0.32, -0.61, -0.51, 0.72},
                                {-0.15, -0.22, 0.95, -0.07, -0.52},
                                {0.51, -0.36, 0.42, -0.80, 0.23},
                                {0.68, -0.24, 0.12, -0.81, 0.25}};
  double worst = 0.0;
  bool shape = true;
  for (Trait t : kAllTraits) {
    const auto& col = columns[index(t)];
    const double lo = *std::min_element(std::begin(col), std::end(col));
    double total = 0.0;
    for (double v : col) total += v - lo;
    const auto prior = prototype_prior(t).weights();
    double sum = 0.0, mn = 1.0;
    for (std::size_t i = 0; i < 5; ++i) {
      worst = std::max(worst, std::abs(prior[i] - (col[i] - lo) / total));
      sum += prior[i];
      mn = std::min(mn, prior[i]);
    }
    shape = shape && mn == 0.0 && std::abs(sum - 1.0) < 1e-12;
  }
  const auto open = prototype_prior(Trait::openness).weights();
  const std::array<double, 5> quoted{0.16944, 0.15833, 0.42778, 0.24444, 0.0};
  bool rounded = true;
  for (std::size_t i = 0; i < 5; ++i) rounded = rounded && std::abs(open[i] - quoted[i]) < 5e-6;
  return {shape && rounded && worst < 1e-12, "max deviation " + fmt("%.1e", worst) + ", openness " + vec(open)};
}

Verdict annuity() {
  const auto series = PriceSeries::constant(360, {1.005, 1.0, 0.0});
  ConstantPolicy policy(AllocationAction::only(Asset::stocks));
  const auto ep = run_episode(policy, series);
  const double closed = 10000.0 * (std::pow(1.005, 360) - 1.0) / 0.005;
  const double rel = std::abs(ep.final_value - closed) / closed;
  return {rel < 1e-6, "simulated " + fmt("%.2f", ep.final_value) + ", closed form " + fmt("%.2f", closed) +
                          ", relative error " + fmt("%.1e", rel)};
}

Verdict cash_conservation() {
  const auto flat = PriceSeries::constant(360, {1.0, 1.0, 0.0});
  bool all = true;
  std::string detail;
  const std::vector<AllocationAction> actions = {AllocationAction({0.25, 0.25, 0.25, 0.125, 0.125}),
                                                 AllocationAction::only(Asset::luxury),
                                                 AllocationAction::only(Asset::mortgage), AllocationAction()};
  for (const auto& a : actions) {
    ConstantPolicy p(a);
    const auto ep = run_episode(p, flat);
    const double total = ep.final_value + ep.states.back().cumulative_luxury;
    all = all && total == 3'600'000.0;
    detail += (detail.empty() ? "" : ", ") + fmt("%.1f", total);
  }
  return {all, "value + luxury = " + detail};
}

Verdict regularizer_pull() {
  const auto series = default_market(0);
  TrainConfig config = default_training();
  config.episodes = kPrototypeEpisodes;
  config.lambda = 5.0;
  trained_prototypes = train_all_prototypes(series, config);
  bool all = true;
  std::string detail;
  for (const auto& p : trained_prototypes) {
    const auto avg = p.average();
    const double d = linf_distance(avg, p.prior.weights());
    const double d0 = linf_distance(p.initial_average, p.prior.weights());
    all = all && d <= 0.2 && d < d0;
    detail += std::string(detail.empty() ? "" : "; ") + trait_name(p.trait) + " " + fmt("%.3f", d) + " (init " +
              fmt("%.3f", d0) + ")";
  }
  return {all, std::to_string(kPrototypeEpisodes) + " episodes, L∞ to prior: " + detail};
}

Verdict regularizer_contrast() {
  // Reward is the stock holding alone, so all-stocks is the greedy optimum.
  const auto series = PriceSeries::constant(kDefaultHorizon, {1.002, 1.0, 0.0});
  const RewardFunction stock_reward = [](const PortfolioState&, const AllocationAction&, const PortfolioState& after) {
    return after.stocks * kRewardUnit;
  };
  TrainConfig config = default_training();
  config.episodes = kContrastEpisodes;
  const auto prior = prototype_prior(Trait::conscientiousness);

  auto average = [&](const ActorNetwork& actor) {
    PortfolioEnvironment env(series, stock_reward);
    return time_average(rollout(actor, env).actions);
  };

  config.lambda = 0.0;
  PortfolioEnvironment free_env(series, stock_reward);
  const double stocks = average(train(free_env, prior, config).actor)[index(Asset::stocks)];

  config.lambda = 1000.0;
  PortfolioEnvironment pinned_env(series, stock_reward);
  const double d = linf_distance(average(train(pinned_env, prior, config).actor), prior.weights());
  return {stocks > 0.9 && d < 0.05,
          "λ=0 mean stocks " + fmt("%.4f", stocks) + "; λ=1000 L∞ to prior " + fmt("%.4f", d)};
}

Verdict dominance() {
  if (trained_prototypes.size() != kTraitCount) {
    TrainConfig config = default_training();
    config.episodes = kPrototypeEpisodes;
    trained_prototypes = train_all_prototypes(default_market(0), config);
  }
  std::vector<ActorNetwork> actors;
  for (const auto& p : trained_prototypes) actors.push_back(p.actor);

  const auto customers = acceptance_customers();
  std::vector<double> gains;
  bool all = true;
  std::string detail;
  for (std::uint64_t seed : kDominanceSeeds) {
    const auto series = default_market(seed);
    TrainConfig config = RunConfig().orchestrator_config();
    config.episodes = kOrchestratorEpisodes;
    config.seed = seed;
    for (const auto& c : customers) {
      const auto orch = train_orchestrator(c, actors, series, config);
      const auto o = evaluate_orchestrator(orch.actor, c, actors, series);
      const auto l = evaluate_linear(c, actors, series);
      const double gain = (o.satisfaction - l.satisfaction) / std::abs(l.satisfaction);
      all = all && o.satisfaction >= l.satisfaction - 0.01 * std::abs(l.satisfaction);
      gains.push_back(gain);
      detail += (detail.empty() ? "" : " ") + c.id + "/" + std::to_string(seed) + " " + fmt("%+.1f%%", 100 * gain);
    }
  }
  std::vector<double> sorted = gains;
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
  return {all && median > 0.0, "median " + fmt("%+.1f%%", 100 * median) + "; " + detail};
}

Verdict one_hot() {
  const auto series = default_market(0);
  Rng rng(17);
  std::vector<ActorNetwork> actors;
  if (trained_prototypes.size() == kTraitCount) {
    for (const auto& p : trained_prototypes) actors.push_back(p.actor);
  } else {
    for (std::size_t i = 0; i < kTraitCount; ++i) actors.push_back(ActorNetwork::random(kMarketObservationSize, rng));
  }
  bool all = true;
  std::size_t months = 0;
  for (Trait t : kAllTraits) {
    const CustomerProfile c(std::string(trait_name(t)), PersonalityVector::one_hot(t));
    const auto linear = evaluate_linear(c, actors, series);
    PortfolioEnvironment env(series, profit_reward());
    rollout(actors[index(t)], env);
    const auto direct = env.episode();
    bool same = linear.episode.states.size() == direct.states.size();
    for (std::size_t m = 0; same && m < direct.states.size(); ++m)
      same = linear.episode.states[m] == direct.states[m] && linear.episode.actions[m] == direct.actions[m];
    same = same && linear.value == portfolio_value(direct.states.back());
    all = all && same;
    months += direct.states.size();
  }
  return {all, std::to_string(months) + " prototype months compared bit for bit"};
}

Verdict attractors() {
  // Inputs e_j drive a contractive cell to a fixed point near e_j; the
  // identity head maps each output extreme back to e_j.
  RnnCell core(3, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    core.input_weights(i, i) = 3.0;
    core.recurrent_weights(i, i) = 0.5;
  }
  core.recurrent_weights(0, 1) = 0.02;
  core.recurrent_weights(2, 0) = -0.02;
  DenseLayer head(3, 3, Activation::identity);
  head.weights = Matrix::identity(3);
  const PersonalityRnn constructed(core, head);
  const auto set = estimate_attractors(constructed);
  double worst = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    Vector x(3, 0.0);
    x[j] = 1.0;
    const auto traj = converge_trajectory(constructed, TransactionHistory{{x}}, 100);
    const auto& end = traj.states.back();
    double d = 0.0;
    for (std::size_t k = 0; k < 3; ++k) d += std::pow(end[k] - set.attractors[j].location[k], 2);
    worst = std::max(worst, std::sqrt(d));
  }

  RunConfig cfg;
  cfg.set("personality_epochs", "20");
  const auto pcfg = cfg.personality_config();
  const auto train = synth_dataset(cfg.get_count("personality_samples"), pcfg.seed);
  const auto test = synth_dataset(cfg.get_count("personality_test_samples"), pcfg.seed + 1);
  const auto model = train_personality_rnn(train, pcfg).model;
  auto options = cfg.attractor_options();
  for (const auto& s : test) options.probes.push_back(s.history);
  const auto learned = estimate_attractors(model, options);
  std::size_t hits = 0;
  for (const auto& s : test) {
    const auto traj = converge_trajectory(model, s.history, options.repeats);
    hits += learned.nearest(traj.states.back()) == index(s.dominant);
  }
  const double rate = static_cast<double>(hits) / static_cast<double>(test.size());
  return {worst < 0.1 && rate >= 0.8, "constructed fixed points within L2 " + fmt("%.4f", worst) +
                                          "; trained model labelling " + fmt("%.3f", rate) + " of " +
                                          std::to_string(test.size())};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "ahrl_acceptance_determinism";
  fs::remove_all(root);
  const std::string common = " --seed 4 --market-seed 9 --months 24 --episodes 3 --set critic_hidden=16"
                             " --set batch_size=8 --set updates_per_episode=2 --set personality_samples=60"
                             " --set personality_test_samples=20 --set personality_epochs=3";
  auto run_all = [&](const fs::path& dir) {
    fs::create_directories(dir);
    const std::string d = dir.string();
    const std::vector<std::string> commands = {
        "market-gen --out " + d + "/prices.csv",
        "train-proto --prices " + d + "/prices.csv --all --out-dir " + d + "/proto",
        "attractors --synth --out-dir " + d + "/personality",
        "train-orchestrate --customers " + customers_csv + " --prices " + d + "/prices.csv --proto-dir " + d +
            "/proto --out-dir " + d + "/orch --behavior-model " + d + "/personality/personality_model.json",
        "compare --customers " + customers_csv + " --prices " + d + "/prices.csv --proto-dir " + d +
            "/proto --orch-dir " + d + "/orch --out " + d + "/comparison.csv --strategy-dir " + d + "/strategy",
    };
    for (const auto& c : commands) {
      const std::string line = "\"" + cli_path + "\"" + common + " " + c + " > /dev/null";
      if (std::system(line.c_str()) != 0) return false;
    }
    return true;
  };
  const fs::path a = root / "a", b = root / "b";
  if (!run_all(a) || !run_all(b)) return {false, "a CLI command failed"};

  std::set<fs::path> files;
  for (const auto& dir : {a, b})
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file()) files.insert(fs::relative(e.path(), dir));
  std::size_t differing = 0;
  std::string first;
  for (const auto& f : files) {
    const std::string x = fs::exists(a / f) ? slurp(a / f) : "\x01missing";
    const std::string y = fs::exists(b / f) ? slurp(b / f) : "\x02missing";
    if (x != y && differing++ == 0) first = f.string();
  }
  fs::remove_all(root);
  return {differing == 0 && files.size() > 20,
          std::to_string(files.size()) + " files compared, " + std::to_string(differing) + " differ" +
              (first.empty() ? "" : " (first: " + first + ")")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: ahrl_acceptance <ahrl cli> <customers csv> [criterion ...]\n";
    return 2;
  }
  cli_path = argv[1];
  customers_csv = argv[2];
  std::set<int> only;
  for (int i = 3; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"gradient suite", gradients},
      {"prior arithmetic", prior_arithmetic},
      {"annuity oracle", annuity},
      {"cash conservation", cash_conservation},
      {"regularizer pull", regularizer_pull},
      {"regularizer off/on contrast", regularizer_contrast},
      {"dominance over the linear combination", dominance},
      {"one-hot equivalence", one_hot},
      {"attractor recovery", attractors},
      {"determinism", determinism},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << number << " " << criteria[i].first << ": "
              << v.detail << " [" << fmt("%.1f", secs) << " s]" << std::endl;
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
