#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ahrl/market.hpp"

namespace ahrl {

inline constexpr std::size_t kTraitCount = 5;

enum class Trait : std::size_t { openness = 0, conscientiousness = 1, extraversion = 2, agreeableness = 3, neuroticism = 4 };

inline constexpr std::array<Trait, kTraitCount> kAllTraits = {Trait::openness, Trait::conscientiousness,
                                                               Trait::extraversion, Trait::agreeableness,
                                                               Trait::neuroticism};

const char* trait_name(Trait t);
std::optional<Trait> trait_from_name(const std::string& name);
inline constexpr std::size_t index(Trait t) { return static_cast<std::size_t>(t); }

// Degrees of membership in the five traits, each in [0,1], not all zero.
class PersonalityVector {
 public:
  explicit PersonalityVector(const std::array<double, kTraitCount>& values);
  static PersonalityVector one_hot(Trait t);

  double operator[](std::size_t i) const { return values_[i]; }
  double operator[](Trait t) const { return values_[index(t)]; }
  const std::array<double, kTraitCount>& values() const noexcept { return values_; }
  double sum() const;
  Trait dominant() const;

 private:
  std::array<double, kTraitCount> values_;
};

// Rows are asset classes (savings, property, stocks, luxury, mortgage);
// columns are traits.
using TraitAssetCoefficients = std::array<std::array<double, kTraitCount>, kAssetCount>;

// Rows are properties (expected returns, liquidity, low capital prerequisite,
// low risk, novelty); columns are traits. Entries in {-2..2}.
using AssetPropertyAssociations = std::array<std::array<int, kTraitCount>, 5>;

const TraitAssetCoefficients& canonical_coefficients();
const AssetPropertyAssociations& canonical_associations();

// Non-negative, unit-sum weights over five items: asset classes for a
// prototype prior, prototypical agents for an orchestration prior.
class AffinityPrior {
 public:
  explicit AffinityPrior(const std::array<double, 5>& weights);

  double operator[](std::size_t i) const { return weights_[i]; }
  const std::array<double, 5>& weights() const noexcept { return weights_; }
  std::size_t argmax() const;

 private:
  std::array<double, 5> weights_;
};

// Column shifted so its minimum is zero, then divided by its sum.
AffinityPrior prototype_prior(const TraitAssetCoefficients& coefficients, Trait trait);
AffinityPrior prototype_prior(Trait trait);

// p / sum(p)
AffinityPrior orchestration_prior(const PersonalityVector& p);

using PreferenceVector = std::array<double, kAssetCount>;

PreferenceVector preference_vector(const PersonalityVector& p,
                                   const TraitAssetCoefficients& coefficients = canonical_coefficients());

// Holdings in millions of NOK (savings, property, stocks, cumulative luxury,
// principal repaid) dotted with the preference vector.
double satisfaction_reward(const PortfolioState& state, const PreferenceVector& pref);

// The reported metric: satisfaction_reward at the final month.
double satisfaction_index(const EpisodeResult& episode, const PreferenceVector& pref);

// rankings: asset × property, entries in [0,1]. Returns rankings·assoc scaled
// into [-1,1] by its largest magnitude. Illustrative only.
TraitAssetCoefficients compose_coefficients(const AssetPropertyAssociations& assoc,
                                            const std::array<std::array<double, 5>, kAssetCount>& rankings);

RewardFunction satisfaction_reward_function(const PreferenceVector& pref);

struct CustomerRecord {
  std::string id;
  PersonalityVector personality;
};

// Header `customer_id,openness,conscientiousness,extraversion,agreeableness,neuroticism`.
std::vector<CustomerRecord> load_customers_csv(const std::string& path);
std::vector<CustomerRecord> parse_customers_csv(std::istream& in);

}  // namespace ahrl
