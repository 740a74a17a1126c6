#include "ahrl/market.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "ahrl/errors.hpp"

namespace ahrl {

namespace {

constexpr const char* kPriceHeader = "month,stock_factor,property_factor,interest_rate";
constexpr const char* kEpisodeHeader =
    "month,savings,property,stocks,luxury_cum,mortgage_outstanding,act_savings,act_property,act_stocks,"
    "act_luxury,act_mortgage";

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

double parse_real(std::string_view text, std::size_t line, const char* column) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ParseError(std::string("malformed ") + column + " '" + std::string(text) + "'", line);
  }
  return value;
}

}  // namespace

const char* asset_name(Asset a) {
  switch (a) {
    case Asset::savings: return "savings";
    case Asset::property: return "property";
    case Asset::stocks: return "stocks";
    case Asset::luxury: return "luxury";
    case Asset::mortgage: return "mortgage";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// AllocationAction

bool on_simplex(std::span<const double> v, double tolerance) {
  double total = 0.0;
  for (double x : v) {
    if (!(x >= 0.0) || x > 1.0) return false;
    total += x;
  }
  return std::abs(total - 1.0) <= tolerance;
}

AllocationAction::AllocationAction() { fractions_.fill(1.0 / static_cast<double>(kAssetCount)); }

AllocationAction::AllocationAction(const std::array<double, kAssetCount>& fractions, double tolerance)
    : fractions_(fractions) {
  if (!on_simplex(fractions_, tolerance)) {
    std::ostringstream msg;
    msg << "allocation is not on the simplex: (";
    for (std::size_t i = 0; i < kAssetCount; ++i) msg << (i ? ", " : "") << fractions_[i];
    msg << ")";
    throw ContractError(msg.str());
  }
}

AllocationAction AllocationAction::only(Asset a) {
  std::array<double, kAssetCount> f{};
  f[index(a)] = 1.0;
  return AllocationAction(f);
}

double AllocationAction::sum() const {
  double s = 0.0;
  for (double f : fractions_) s += f;
  return s;
}

// ---------------------------------------------------------------------------
// PriceSeries

PriceSeries::PriceSeries(std::vector<double> stock, std::vector<double> property, std::vector<double> interest)
    : stock_(std::move(stock)), property_(std::move(property)), interest_(std::move(interest)) {
  if (stock_.size() != property_.size() || stock_.size() != interest_.size()) {
    throw ShapeError("PriceSeries: column lengths differ");
  }
  for (std::size_t t = 0; t < stock_.size(); ++t) {
    if (!(stock_[t] > 0.0) || !(property_[t] > 0.0) || !std::isfinite(stock_[t]) || !std::isfinite(property_[t])) {
      throw ContractError("PriceSeries: growth factors must be positive (month " + std::to_string(t) + ")");
    }
    if (!(interest_[t] >= 0.0) || !std::isfinite(interest_[t])) {
      throw ContractError("PriceSeries: interest rate must be non-negative (month " + std::to_string(t) + ")");
    }
  }
}

PriceSeries PriceSeries::constant(std::size_t months, MarketMonth m) {
  return PriceSeries(std::vector<double>(months, m.stock_factor), std::vector<double>(months, m.property_factor),
                     std::vector<double>(months, m.interest_rate));
}

MarketMonth PriceSeries::at(std::size_t month) const {
  if (month >= months()) throw ContractError("PriceSeries: month " + std::to_string(month) + " out of range");
  return {stock_[month], property_[month], interest_[month]};
}

PriceSeries generate_synthetic(const SyntheticMarketConfig& c, std::size_t months) {
  if (c.stock_volatility < 0 || c.property_volatility < 0 || c.interest_volatility < 0 || c.interest_mean < 0) {
    throw ContractError("SyntheticMarketConfig: volatilities and mean interest must be non-negative");
  }
  Rng rng(c.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> stock(months), property(months), interest(months);
  double rate = c.interest_mean;
  for (std::size_t t = 0; t < months; ++t) {
    const double zs = normal(rng);
    const double zp = normal(rng);
    const double zr = normal(rng);
    stock[t] = std::exp(c.stock_drift - 0.5 * c.stock_volatility * c.stock_volatility + c.stock_volatility * zs);
    property[t] = std::exp(c.property_drift - 0.5 * c.property_volatility * c.property_volatility +
                           c.property_volatility * zp);
    interest[t] = rate;
    rate = std::max(0.0, rate + c.interest_reversion * (c.interest_mean - rate) + c.interest_volatility * zr);
  }
  return PriceSeries(std::move(stock), std::move(property), std::move(interest));
}

PriceSeries parse_price_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<double> stock, property, interest;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
      if (line != kPriceHeader) throw ParseError("expected header '" + std::string(kPriceHeader) + "'", line_no);
      have_header = true;
      continue;
    }
    const auto fields = split_commas(line);
    if (fields.size() != 4) throw ParseError("expected 4 fields, got " + std::to_string(fields.size()), line_no);
    const double month = parse_real(fields[0], line_no, "month");
    if (month != static_cast<double>(stock.size())) {
      throw ParseError("month index out of sequence (expected " + std::to_string(stock.size()) + ")", line_no);
    }
    const double gs = parse_real(fields[1], line_no, "stock_factor");
    const double gp = parse_real(fields[2], line_no, "property_factor");
    const double r = parse_real(fields[3], line_no, "interest_rate");
    if (!(gs > 0.0)) throw ParseError("stock_factor must be positive", line_no);
    if (!(gp > 0.0)) throw ParseError("property_factor must be positive", line_no);
    if (!(r >= 0.0)) throw ParseError("interest_rate must be non-negative", line_no);
    stock.push_back(gs);
    property.push_back(gp);
    interest.push_back(r);
  }
  if (!have_header) throw ParseError("empty input: no header row", line_no);
  return PriceSeries(std::move(stock), std::move(property), std::move(interest));
}

PriceSeries load_price_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open price file '" + path + "'");
  try {
    return parse_price_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

void write_price_csv(std::ostream& out, const PriceSeries& series) {
  out << kPriceHeader << '\n';
  for (std::size_t t = 0; t < series.months(); ++t) {
    const auto m = series.at(t);
    out << t << ',' << format_real(m.stock_factor) << ',' << format_real(m.property_factor) << ','
        << format_real(m.interest_rate) << '\n';
  }
}

void save_price_csv(const std::string& path, const PriceSeries& series) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write price file '" + path + "'");
  write_price_csv(out, series);
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Portfolio dynamics

PortfolioState PortfolioState::initial(double mortgage_principal) {
  PortfolioState s;
  s.mortgage_outstanding = mortgage_principal;
  return s;
}

std::array<double, kAssetCount> PortfolioState::holdings() const {
  return {savings, property, stocks, cumulative_luxury, mortgage_principal_repaid};
}

PortfolioState step(const PortfolioState& state, const AllocationAction& action, const MarketMonth& prices,
                    double contribution) {
  if (!on_simplex(action.fractions(), 1e-6)) throw ContractError("step: action is off the simplex");
  PortfolioState next = state;
  next.savings *= 1.0 + prices.interest_rate;
  next.property *= prices.property_factor;
  next.stocks *= prices.stock_factor;
  next.mortgage_outstanding *= 1.0 + prices.interest_rate;

  next.savings += contribution * action[Asset::savings];
  next.property += contribution * action[Asset::property];
  next.stocks += contribution * action[Asset::stocks];
  next.cumulative_luxury += contribution * action[Asset::luxury];

  const double payment = contribution * action[Asset::mortgage];
  const double repaid = std::min(payment, next.mortgage_outstanding);
  next.mortgage_outstanding -= repaid;
  next.mortgage_principal_repaid += repaid;
  next.savings += payment - repaid;

  next.month = state.month + 1;
  return next;
}

double portfolio_value(const PortfolioState& s) {
  return s.savings + s.property + s.stocks + s.mortgage_principal_repaid;
}

std::array<double, kAssetCount> EpisodeResult::mean_action() const {
  std::array<double, kAssetCount> mean{};
  if (actions.empty()) return mean;
  for (const auto& a : actions)
    for (std::size_t i = 0; i < kAssetCount; ++i) mean[i] += a[i];
  for (double& m : mean) m /= static_cast<double>(actions.size());
  return mean;
}

void write_episode_csv(std::ostream& out, const EpisodeResult& episode) {
  out << kEpisodeHeader << '\n';
  for (std::size_t t = 0; t < episode.actions.size(); ++t) {
    const auto& s = episode.states[t];
    const auto& a = episode.actions[t];
    out << t << ',' << format_real(s.savings) << ',' << format_real(s.property) << ',' << format_real(s.stocks)
        << ',' << format_real(s.cumulative_luxury) << ',' << format_real(s.mortgage_outstanding);
    for (std::size_t i = 0; i < kAssetCount; ++i) out << ',' << format_real(a[i]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Environment

Vector observe(const PortfolioState& s, const PriceSeries& series, const EnvironmentSettings& settings) {
  const std::size_t horizon = series.months();
  const double invested = settings.contribution * static_cast<double>(std::max<std::size_t>(s.month, 1));
  const double scale = invested > 0.0 ? 1.0 / invested : 0.0;
  Vector obs;
  obs.reserve(kMarketObservationSize);
  for (double h : s.holdings()) obs.push_back(h * scale);
  obs.push_back(settings.mortgage_principal > 0.0 ? s.mortgage_outstanding / settings.mortgage_principal : 0.0);
  obs.push_back(horizon > 0 ? static_cast<double>(s.month) / static_cast<double>(horizon) : 0.0);
  MarketMonth m;
  if (horizon > 0) m = series.at(std::min(s.month, horizon - 1));
  obs.push_back((m.stock_factor - 1.0) * 10.0);
  obs.push_back((m.property_factor - 1.0) * 10.0);
  obs.push_back(m.interest_rate * 100.0);
  return obs;
}

PortfolioEnvironment::PortfolioEnvironment(const PriceSeries& series, RewardFunction reward,
                                           EnvironmentSettings settings)
    : series_(&series), reward_(std::move(reward)), settings_(settings) {
  reset();
}

Vector PortfolioEnvironment::reset() {
  state_ = PortfolioState::initial(settings_.mortgage_principal);
  record_ = {};
  record_.states.reserve(series_->months());
  record_.actions.reserve(series_->months());
  return observe(state_, *series_, settings_);
}

Environment::Outcome PortfolioEnvironment::step(std::span<const double> action) {
  if (state_.month >= series_->months()) throw ContractError("PortfolioEnvironment: episode already finished");
  if (action.size() != kAssetCount) throw ShapeError("PortfolioEnvironment: action must have 5 entries");
  std::array<double, kAssetCount> f{};
  std::copy(action.begin(), action.end(), f.begin());
  const AllocationAction a(f, 1e-6);
  const PortfolioState before = state_;
  state_ = ahrl::step(state_, a, series_->at(before.month), settings_.contribution);
  record_.states.push_back(state_);
  record_.actions.push_back(a);
  record_.final_value = portfolio_value(state_);

  Outcome out;
  out.reward = reward_ ? reward_(before, a, state_) : 0.0;
  out.terminal = state_.month >= series_->months();
  out.observation = observe(state_, *series_, settings_);
  return out;
}

EpisodeResult PortfolioEnvironment::episode() const { return record_; }

EpisodeResult run_episode(Policy& policy, const PriceSeries& series, EnvironmentSettings settings) {
  PortfolioEnvironment env(series, nullptr, settings);
  policy.reset();
  Vector obs = env.reset();
  for (std::size_t t = 0; t < series.months(); ++t) {
    const AllocationAction a = policy.act(obs);
    obs = env.step(a.fractions()).observation;
  }
  return env.episode();
}

RewardFunction profit_reward() {
  return [](const PortfolioState& before, const AllocationAction&, const PortfolioState& after) {
    return (portfolio_value(after) - portfolio_value(before)) * kRewardUnit;
  };
}

}  // namespace ahrl
