#include "ahrl/affinity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "ahrl/errors.hpp"

namespace ahrl {

namespace {

constexpr TraitAssetCoefficients kCoefficients = {{
    // open.  cons.  extra. agree. neuro.
    {-0.11, 0.08, -0.15, 0.51, 0.68},    // savings account
    {-0.15, 0.32, -0.22, -0.36, -0.24},  // property funds
    {0.82, -0.61, 0.95, 0.42, 0.12},     // stock portfolio
    {0.16, -0.51, -0.07, -0.80, -0.81},  // luxury expenses
    {-0.72, 0.72, -0.52, 0.23, 0.25},    // mortgage repayments
}};

constexpr AssetPropertyAssociations kAssociations = {{
    {1, 1, 2, 1, 1},     // expected returns
    {2, -1, 2, 1, 2},    // liquidity
    {0, -1, 1, 1, 1},    // low capital prerequisite
    {-1, 2, -1, 1, 2},   // low risk
    {2, 0, 2, 0, -1},    // novelty
}};

constexpr const char* kCustomerHeader = "customer_id,openness,conscientiousness,extraversion,agreeableness,neuroticism";

}  // namespace

const char* trait_name(Trait t) {
  switch (t) {
    case Trait::openness: return "openness";
    case Trait::conscientiousness: return "conscientiousness";
    case Trait::extraversion: return "extraversion";
    case Trait::agreeableness: return "agreeableness";
    case Trait::neuroticism: return "neuroticism";
  }
  return "?";
}

std::optional<Trait> trait_from_name(const std::string& name) {
  for (Trait t : kAllTraits)
    if (name == trait_name(t)) return t;
  return std::nullopt;
}

PersonalityVector::PersonalityVector(const std::array<double, kTraitCount>& values) : values_(values) {
  bool any = false;
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("personality components must lie in [0,1]");
    any = any || v > 0.0;
  }
  if (!any) throw DegeneratePriorError("personality vector must not be all zero");
}

PersonalityVector PersonalityVector::one_hot(Trait t) {
  std::array<double, kTraitCount> v{};
  v[index(t)] = 1.0;
  return PersonalityVector(v);
}

double PersonalityVector::sum() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s;
}

Trait PersonalityVector::dominant() const {
  return static_cast<Trait>(std::max_element(values_.begin(), values_.end()) - values_.begin());
}

const TraitAssetCoefficients& canonical_coefficients() { return kCoefficients; }
const AssetPropertyAssociations& canonical_associations() { return kAssociations; }

AffinityPrior::AffinityPrior(const std::array<double, 5>& weights) : weights_(weights) {
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("prior weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("prior weights must sum to one");
}

std::size_t AffinityPrior::argmax() const {
  return static_cast<std::size_t>(std::max_element(weights_.begin(), weights_.end()) - weights_.begin());
}

AffinityPrior prototype_prior(const TraitAssetCoefficients& coefficients, Trait trait) {
  const std::size_t col = index(trait);
  if (col >= kTraitCount) throw ContractError("trait index out of range");
  double lo = coefficients[0][col];
  for (const auto& row : coefficients) lo = std::min(lo, row[col]);
  std::array<double, 5> shifted{};
  double total = 0.0;
  for (std::size_t a = 0; a < kAssetCount; ++a) {
    shifted[a] = coefficients[a][col] - lo;
    total += shifted[a];
  }
  if (!(total > 0.0)) throw DegeneratePriorError(std::string("constant coefficient column for ") + trait_name(trait));
  for (double& s : shifted) s /= total;
  return AffinityPrior(shifted);
}

AffinityPrior prototype_prior(Trait trait) { return prototype_prior(canonical_coefficients(), trait); }

AffinityPrior orchestration_prior(const PersonalityVector& p) {
  const double total = p.sum();
  if (!(total > 0.0)) throw DegeneratePriorError("personality vector sums to zero");
  std::array<double, 5> w{};
  for (std::size_t i = 0; i < kTraitCount; ++i) w[i] = p[i] / total;
  return AffinityPrior(w);
}

PreferenceVector preference_vector(const PersonalityVector& p, const TraitAssetCoefficients& coefficients) {
  PreferenceVector pref{};
  for (std::size_t a = 0; a < kAssetCount; ++a)
    for (std::size_t t = 0; t < kTraitCount; ++t) pref[a] += coefficients[a][t] * p[t];
  return pref;
}

double satisfaction_reward(const PortfolioState& state, const PreferenceVector& pref) {
  const auto h = state.holdings();
  double s = 0.0;
  for (std::size_t a = 0; a < kAssetCount; ++a) s += h[a] * kRewardUnit * pref[a];
  return s;
}

double satisfaction_index(const EpisodeResult& episode, const PreferenceVector& pref) {
  if (episode.states.empty()) throw ContractError("satisfaction_index: empty episode");
  return satisfaction_reward(episode.states.back(), pref);
}

TraitAssetCoefficients compose_coefficients(const AssetPropertyAssociations& assoc,
                                            const std::array<std::array<double, 5>, kAssetCount>& rankings) {
  TraitAssetCoefficients out{};
  double peak = 0.0;
  for (std::size_t a = 0; a < kAssetCount; ++a) {
    for (std::size_t t = 0; t < kTraitCount; ++t) {
      double s = 0.0;
      for (std::size_t p = 0; p < 5; ++p) {
        const double r = rankings[a][p];
        if (!(r >= 0.0 && r <= 1.0)) throw ContractError("asset property rankings must lie in [0,1]");
        s += r * assoc[p][t];
      }
      out[a][t] = s;
      peak = std::max(peak, std::abs(s));
    }
  }
  if (peak > 0.0)
    for (auto& row : out)
      for (double& v : row) v /= peak;
  return out;
}

RewardFunction satisfaction_reward_function(const PreferenceVector& pref) {
  return [pref](const PortfolioState&, const AllocationAction&, const PortfolioState& after) {
    return satisfaction_reward(after, pref);
  };
}

std::vector<CustomerRecord> parse_customers_csv(std::istream& in) {
  std::vector<CustomerRecord> out;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
      if (line != kCustomerHeader) throw ParseError("expected header '" + std::string(kCustomerHeader) + "'", line_no);
      have_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6) throw ParseError("expected 6 fields", line_no);
    std::array<double, kTraitCount> v{};
    for (std::size_t i = 0; i < kTraitCount; ++i) {
      const std::string& f = fields[i + 1];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v[i]);
      if (ec != std::errc() || ptr != f.data() + f.size()) throw ParseError("malformed trait value '" + f + "'", line_no);
    }
    try {
      out.push_back({fields[0], PersonalityVector(v)});
    } catch (const ContractError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (!have_header) throw ParseError("empty input: no header row", line_no);
  return out;
}

std::vector<CustomerRecord> load_customers_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open customer file '" + path + "'");
  try {
    return parse_customers_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

}  // namespace ahrl
