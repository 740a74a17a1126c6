#pragma once

// Flat key=value run configuration. Lines are `key = value`; `#` starts a
// comment. Every key has a documented default; unknown keys are rejected.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ahrl/ddpg.hpp"
#include "ahrl/market.hpp"
#include "ahrl/statespace.hpp"

namespace ahrl {

enum class ConfigKind { count, real, choice };

struct ConfigKey {
  const char* name;
  ConfigKind kind;
  const char* default_value;
  const char* help;
};

// All recognised keys in output order.
const std::vector<ConfigKey>& config_keys();

class RunConfig {
 public:
  RunConfig();  // every key at its default

  static RunConfig parse(std::istream& in);
  static RunConfig load(const std::string& path);
  // Merges `key = value` lines over the current values.
  void merge(std::istream& in);
  void merge_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  double get_real(const std::string& key) const;
  std::uint64_t get_count(const std::string& key) const;

  // Resolved configuration, one `key = value` line per key in config_keys() order.
  std::string to_string() const;

  TrainConfig train_config() const;
  // train_config plus best-snapshot selection.
  TrainConfig orchestrator_config() const;
  SyntheticMarketConfig market_config() const;
  EnvironmentSettings environment() const;
  PersonalityTrainConfig personality_config() const;
  AttractorOptions attractor_options() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ahrl
