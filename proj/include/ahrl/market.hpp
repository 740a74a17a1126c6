#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ahrl/numerics.hpp"

namespace ahrl {

inline constexpr std::size_t kAssetCount = 5;

enum class Asset : std::size_t { savings = 0, property = 1, stocks = 2, luxury = 3, mortgage = 4 };

const char* asset_name(Asset a);
inline constexpr std::size_t index(Asset a) { return static_cast<std::size_t>(a); }

// A point on the 5-simplex. Validated on construction.
class AllocationAction {
 public:
  AllocationAction();  // uniform
  explicit AllocationAction(const std::array<double, kAssetCount>& fractions, double tolerance = 1e-9);

  static AllocationAction only(Asset a);

  double operator[](std::size_t i) const { return fractions_[i]; }
  double operator[](Asset a) const { return fractions_[index(a)]; }
  const std::array<double, kAssetCount>& fractions() const noexcept { return fractions_; }
  double sum() const;

  friend bool operator==(const AllocationAction&, const AllocationAction&) = default;

 private:
  std::array<double, kAssetCount> fractions_;
};

// True when every entry is in [0,1] and entries sum to 1 within `tolerance`.
bool on_simplex(std::span<const double> v, double tolerance = 1e-9);

struct MarketMonth {
  double stock_factor = 1.0;
  double property_factor = 1.0;
  double interest_rate = 0.0;
};

class PriceSeries {
 public:
  PriceSeries() = default;
  PriceSeries(std::vector<double> stock, std::vector<double> property, std::vector<double> interest);

  static PriceSeries constant(std::size_t months, MarketMonth m);

  std::size_t months() const noexcept { return stock_.size(); }
  MarketMonth at(std::size_t month) const;
  const std::vector<double>& stock_factors() const noexcept { return stock_; }
  const std::vector<double>& property_factors() const noexcept { return property_; }
  const std::vector<double>& interest_rates() const noexcept { return interest_; }

  friend bool operator==(const PriceSeries&, const PriceSeries&) = default;

 private:
  std::vector<double> stock_;
  std::vector<double> property_;
  std::vector<double> interest_;
};

struct SyntheticMarketConfig {
  double stock_drift = 0.006;
  double stock_volatility = 0.04;
  double property_drift = 0.004;
  double property_volatility = 0.015;
  double interest_mean = 0.002;
  double interest_reversion = 0.1;
  double interest_volatility = 0.0005;
  std::uint64_t seed = 0;
};

// Log-normal growth factors log g = μ − σ²/2 + σZ; mean-reverting interest
// r_{t+1} = max(0, r_t + κ(r̄ − r_t) + σ_r Z) starting at r̄.
PriceSeries generate_synthetic(const SyntheticMarketConfig& config, std::size_t months);

// Schema: header `month,stock_factor,property_factor,interest_rate`.
PriceSeries load_price_csv(const std::string& path);
PriceSeries parse_price_csv(std::istream& in);
void write_price_csv(std::ostream& out, const PriceSeries& series);
void save_price_csv(const std::string& path, const PriceSeries& series);

inline constexpr double kDefaultContribution = 10'000.0;
inline constexpr double kDefaultMortgagePrincipal = 2'000'000.0;
inline constexpr std::size_t kDefaultHorizon = 360;

struct PortfolioState {
  double savings = 0.0;
  double property = 0.0;
  double stocks = 0.0;
  double mortgage_outstanding = 0.0;
  double mortgage_principal_repaid = 0.0;
  double cumulative_luxury = 0.0;
  std::size_t month = 0;

  static PortfolioState initial(double mortgage_principal = kDefaultMortgagePrincipal);

  // (savings, property, stocks, cumulative_luxury, mortgage_principal_repaid)
  std::array<double, kAssetCount> holdings() const;

  friend bool operator==(const PortfolioState&, const PortfolioState&) = default;
};

// Growth first (balances and mortgage), then the contribution is split by the
// action; mortgage overpayment is rerouted to savings. Month increments.
PortfolioState step(const PortfolioState& state, const AllocationAction& action, const MarketMonth& prices,
                    double contribution);

// savings + property + stocks + mortgage_principal_repaid
double portfolio_value(const PortfolioState& state);

struct EpisodeResult {
  std::vector<PortfolioState> states;  // state after each month
  std::vector<AllocationAction> actions;
  double final_value = 0.0;

  std::size_t months() const noexcept { return actions.size(); }
  std::array<double, kAssetCount> mean_action() const;
};

void write_episode_csv(std::ostream& out, const EpisodeResult& episode);

// Observation features for month t (before acting): five holdings normalised
// by cumulative contributions, outstanding mortgage relative to the initial
// principal, t/T, and the month's three market factors (scaled).
inline constexpr std::size_t kMarketObservationSize = 10;

struct EnvironmentSettings {
  double contribution = kDefaultContribution;
  double mortgage_principal = kDefaultMortgagePrincipal;
};

Vector observe(const PortfolioState& state, const PriceSeries& series, const EnvironmentSettings& settings);

// Maps the portfolio transition to a scalar reward.
using RewardFunction =
    std::function<double(const PortfolioState& before, const AllocationAction& action, const PortfolioState& after)>;

// Generic episodic environment over the 5-simplex consumed by the trainer.
class Environment {
 public:
  struct Outcome {
    Vector observation;
    double reward = 0.0;
    bool terminal = false;
  };

  virtual ~Environment() = default;
  virtual std::size_t observation_size() const = 0;
  virtual std::size_t horizon() const = 0;
  virtual Vector reset() = 0;
  virtual Outcome step(std::span<const double> action) = 0;
};

// The investment environment: one month per step.
class PortfolioEnvironment : public Environment {
 public:
  PortfolioEnvironment(const PriceSeries& series, RewardFunction reward, EnvironmentSettings settings = {});

  std::size_t observation_size() const override { return kMarketObservationSize; }
  std::size_t horizon() const override { return series_->months(); }
  Vector reset() override;
  Outcome step(std::span<const double> action) override;

  const PortfolioState& state() const noexcept { return state_; }
  const PriceSeries& series() const noexcept { return *series_; }
  const EnvironmentSettings& settings() const noexcept { return settings_; }
  // Trajectory since the last reset.
  EpisodeResult episode() const;

 private:
  const PriceSeries* series_;
  RewardFunction reward_;
  EnvironmentSettings settings_;
  PortfolioState state_;
  EpisodeResult record_;
};

// A (possibly stateful) mapping from the observation stream to allocations.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset() {}
  virtual AllocationAction act(std::span<const double> observation) = 0;
};

class ConstantPolicy : public Policy {
 public:
  explicit ConstantPolicy(AllocationAction action) : action_(action) {}
  AllocationAction act(std::span<const double>) override { return action_; }

 private:
  AllocationAction action_;
};

EpisodeResult run_episode(Policy& policy, const PriceSeries& series, EnvironmentSettings settings = {});

// Reward conventions (millions of NOK).
inline constexpr double kRewardUnit = 1e-6;
RewardFunction profit_reward();

}  // namespace ahrl
