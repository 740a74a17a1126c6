#include "ahrl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "ahrl/errors.hpp"

namespace ahrl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const ConfigKey& key_info(const std::string& key) {
  for (const auto& k : config_keys())
    if (key == k.name) return k;
  throw ContractError("config: unknown key '" + key + "'");
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ContractError("config: '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ContractError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", ConfigKind::count, "0", "training seed"},
      {"months", ConfigKind::count, "360", "investment horizon in months"},
      {"contribution", ConfigKind::real, "10000", "monthly contribution in NOK"},
      {"mortgage_principal", ConfigKind::real, "2000000", "initial mortgage principal in NOK"},
      {"market_seed", ConfigKind::count, "0", "synthetic market seed"},
      {"stock_drift", ConfigKind::real, "0.006", "monthly log drift of the stock index"},
      {"stock_volatility", ConfigKind::real, "0.04", "monthly volatility of the stock index"},
      {"property_drift", ConfigKind::real, "0.004", "monthly log drift of the property index"},
      {"property_volatility", ConfigKind::real, "0.015", "monthly volatility of the property index"},
      {"interest_mean", ConfigKind::real, "0.002", "long-run monthly interest rate"},
      {"interest_reversion", ConfigKind::real, "0.1", "interest mean-reversion speed"},
      {"interest_volatility", ConfigKind::real, "0.0005", "interest rate noise"},
      {"actor_lr", ConfigKind::real, "0.005", "actor learning rate"},
      {"critic_lr", ConfigKind::real, "0.01", "critic learning rate"},
      {"tau", ConfigKind::real, "0.05", "target network update rate"},
      {"gamma", ConfigKind::real, "0.95", "discount factor"},
      {"lambda", ConfigKind::real, "5", "regularisation scale"},
      {"batch_size", ConfigKind::count, "64", "replay mini-batch size"},
      {"episodes", ConfigKind::count, "2000", "training episodes"},
      {"updates_per_episode", ConfigKind::count, "8", "gradient updates after each episode"},
      {"replay_capacity", ConfigKind::count, "100000", "replay buffer capacity"},
      {"noise_scale", ConfigKind::real, "0.1", "initial logit noise"},
      {"noise_floor", ConfigKind::real, "0.01", "final logit noise"},
      {"actor_hidden", ConfigKind::count, "3", "actor recurrent units"},
      {"critic_core_hidden", ConfigKind::count, "3", "critic recurrent units"},
      {"critic_hidden", ConfigKind::count, "1000", "critic dense units"},
      {"update_rule", ConfigKind::choice, "adam", "adam or plain"},
      {"orchestrator_eval_interval", ConfigKind::count, "10",
       "episodes between noise-free evaluations of an orchestrator; the best is kept (0 keeps the last)"},
      {"threads", ConfigKind::count, "1", "worker threads for multi-agent training"},
      {"behavior_seed", ConfigKind::count, "0", "seed for synthetic transaction histories of customers"},
      {"personality_samples", ConfigKind::count, "1000", "synthetic training customers for the personality model"},
      {"personality_test_samples", ConfigKind::count, "200", "synthetic test customers for attractor labelling"},
      {"personality_epochs", ConfigKind::count, "100", "personality model epochs"},
      {"personality_lr", ConfigKind::real, "0.01", "personality model learning rate"},
      {"personality_batch_size", ConfigKind::count, "32", "personality model mini-batch size"},
      {"grid_points", ConfigKind::count, "1008", "state-space grid size K (8 corners plus random points)"},
      {"repeats", ConfigKind::count, "100", "first-step repeats for converged trajectories"},
      {"line_ratio", ConfigKind::real, "5", "principal spread ratio above which an attractor is a line"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

void RunConfig::merge(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected 'key = value'", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set(key, value);
    } catch (const ContractError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
}

RunConfig RunConfig::parse(std::istream& in) {
  RunConfig c;
  c.merge(in);
  return c;
}

void RunConfig::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  try {
    merge(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

RunConfig RunConfig::load(const std::string& path) {
  RunConfig c;
  c.merge_file(path);
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (value.empty()) throw ContractError("config: empty value for '" + key + "'");
  switch (key_info(key).kind) {
    case ConfigKind::count: parse_count(key, value); break;
    case ConfigKind::real: parse_real(key, value); break;
    case ConfigKind::choice:
      if (value != "adam" && value != "plain") throw ContractError("config: update_rule must be adam or plain");
      break;
  }
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ContractError("config: unknown key '" + key + "'");
  return it->second;
}

double RunConfig::get_real(const std::string& key) const { return parse_real(key, get(key)); }
std::uint64_t RunConfig::get_count(const std::string& key) const { return parse_count(key, get(key)); }

std::string RunConfig::to_string() const {
  std::ostringstream out;
  for (const auto& k : config_keys()) out << k.name << " = " << values_.at(k.name) << '\n';
  return out.str();
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.actor_lr = get_real("actor_lr");
  c.critic_lr = get_real("critic_lr");
  c.tau = get_real("tau");
  c.gamma = get_real("gamma");
  c.lambda = get_real("lambda");
  c.batch_size = get_count("batch_size");
  c.episodes = get_count("episodes");
  c.updates_per_episode = get_count("updates_per_episode");
  c.replay_capacity = get_count("replay_capacity");
  c.noise_scale = get_real("noise_scale");
  c.noise_floor = get_real("noise_floor");
  c.actor_hidden = get_count("actor_hidden");
  c.critic_core_hidden = get_count("critic_core_hidden");
  c.critic_hidden = get_count("critic_hidden");
  c.update_rule = get("update_rule") == "adam" ? UpdateRule::adam : UpdateRule::plain;
  c.seed = get_count("seed");
  c.validate();
  return c;
}

TrainConfig RunConfig::orchestrator_config() const {
  TrainConfig c = train_config();
  c.eval_interval = get_count("orchestrator_eval_interval");
  return c;
}

SyntheticMarketConfig RunConfig::market_config() const {
  SyntheticMarketConfig m;
  m.stock_drift = get_real("stock_drift");
  m.stock_volatility = get_real("stock_volatility");
  m.property_drift = get_real("property_drift");
  m.property_volatility = get_real("property_volatility");
  m.interest_mean = get_real("interest_mean");
  m.interest_reversion = get_real("interest_reversion");
  m.interest_volatility = get_real("interest_volatility");
  m.seed = get_count("market_seed");
  return m;
}

EnvironmentSettings RunConfig::environment() const {
  EnvironmentSettings s;
  s.contribution = get_real("contribution");
  s.mortgage_principal = get_real("mortgage_principal");
  if (s.contribution < 0.0 || s.mortgage_principal < 0.0) {
    throw ContractError("config: contribution and mortgage_principal must be non-negative");
  }
  return s;
}

PersonalityTrainConfig RunConfig::personality_config() const {
  PersonalityTrainConfig c;
  c.epochs = get_count("personality_epochs");
  c.learning_rate = get_real("personality_lr");
  c.batch_size = get_count("personality_batch_size");
  c.update_rule = get("update_rule") == "adam" ? UpdateRule::adam : UpdateRule::plain;
  c.seed = get_count("seed");
  return c;
}

AttractorOptions RunConfig::attractor_options() const {
  AttractorOptions o;
  o.grid_points = get_count("grid_points");
  o.seed = get_count("seed");
  o.repeats = get_count("repeats");
  o.line_ratio = get_real("line_ratio");
  return o;
}

}  // namespace ahrl
