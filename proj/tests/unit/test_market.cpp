#include <doctest.h>

#include <bit>
#include <cmath>
#include <sstream>

#include "ahrl/errors.hpp"
#include "ahrl/market.hpp"
#include "unit/fixtures.hpp"

using namespace ahrl;

namespace {

// Replays a fixed list of actions.
class ScheduledPolicy : public Policy {
 public:
  explicit ScheduledPolicy(std::vector<AllocationAction> actions) : actions_(std::move(actions)) {}
  void reset() override { t_ = 0; }
  AllocationAction act(std::span<const double>) override { return actions_[t_++ % actions_.size()]; }

 private:
  std::vector<AllocationAction> actions_;
  std::size_t t_ = 0;
};

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  AllocationAction act(std::span<const double>) override { return AllocationAction(fixtures::random_simplex(rng_)); }

 private:
  Rng rng_;
};

}  // namespace

TEST_CASE("allocation actions are validated") {
  CHECK_NOTHROW(AllocationAction({0.1, 0.2, 0.3, 0.2, 0.2}));
  CHECK_THROWS_AS(AllocationAction({0.5, 0.5, 0.5, 0.0, 0.0}), ContractError);
  CHECK_THROWS_AS(AllocationAction({1.2, -0.2, 0.0, 0.0, 0.0}), ContractError);
  CHECK(AllocationAction() == AllocationAction({0.2, 0.2, 0.2, 0.2, 0.2}));
  CHECK(AllocationAction::only(Asset::stocks)[Asset::stocks] == 1.0);
}

TEST_CASE("step follows the growth-then-contribution convention") {
  PortfolioState s;
  s.savings = 100000;
  const auto next = step(s, AllocationAction::only(Asset::savings), {1.0, 1.0, 0.002}, 10000);
  CHECK(next.savings == doctest::Approx(110200).epsilon(1e-15));
  CHECK(next.month == 1);

  PortfolioState rich;
  rich.savings = 5;
  rich.property = 6;
  rich.stocks = 7;
  rich.cumulative_luxury = 8;
  rich.mortgage_outstanding = 9;
  rich.mortgage_principal_repaid = 10;
  auto same = step(rich, AllocationAction(), {1.0, 1.0, 0.0}, 0.0);
  CHECK(same.month == 1);
  same.month = 0;
  CHECK(same == rich);

  PortfolioState grow = rich;
  grow = step(grow, AllocationAction(), {1.5, 2.0, 0.1}, 0.0);
  CHECK(grow.stocks == doctest::Approx(10.5));
  CHECK(grow.property == doctest::Approx(12.0));
  CHECK(grow.savings == doctest::Approx(5.5));
  CHECK(grow.mortgage_outstanding == doctest::Approx(9.9));
}

TEST_CASE("mortgage overpayment is rerouted to savings") {
  PortfolioState s = PortfolioState::initial(500);
  const auto next = step(s, AllocationAction::only(Asset::mortgage), {1.0, 1.0, 0.0}, 10000);
  CHECK(next.mortgage_outstanding == 0.0);
  CHECK(next.mortgage_principal_repaid == 500.0);
  CHECK(next.savings == 9500.0);

  // Interest accrues before the payment.
  const auto grown = step(s, AllocationAction::only(Asset::mortgage), {1.0, 1.0, 0.01}, 10000);
  CHECK(grown.mortgage_principal_repaid == doctest::Approx(505.0));
  CHECK(grown.savings == doctest::Approx(9495.0));
}

TEST_CASE("step rejects actions off the simplex") {
  const AllocationAction loose({0.2, 0.2, 0.2, 0.2, 0.21}, 0.1);
  CHECK_THROWS_AS(step(PortfolioState{}, loose, {}, 1.0), ContractError);
}

TEST_CASE("portfolio value excludes luxury") {
  PortfolioState s;
  CHECK(portfolio_value(s) == 0.0);
  s.savings = 1e6;
  CHECK(portfolio_value(s) == 1e6);
  s.cumulative_luxury = 5e5;
  s.mortgage_principal_repaid = 2e5;
  s.mortgage_outstanding = 3e5;
  CHECK(portfolio_value(s) == 1.2e6);
}

TEST_CASE("constant all-stocks policy matches the annuity future value") {
  const auto series = PriceSeries::constant(360, {1.005, 1.0, 0.0});
  ConstantPolicy policy(AllocationAction::only(Asset::stocks));
  const auto ep = run_episode(policy, series);
  const double annuity = (std::pow(1.005, 360) - 1.0) / 0.005 * 10000.0;
  CHECK(annuity == doctest::Approx(1.00452e7).epsilon(1e-5));
  CHECK(std::abs(ep.final_value - annuity) / annuity < 1e-6);
  CHECK(ep.months() == 360);
  CHECK(ep.states.size() == 360);
}

TEST_CASE("invested cash is conserved on a flat market") {
  const auto flat = PriceSeries::constant(360, {1.0, 1.0, 0.0});
  ScheduledPolicy dyadic({AllocationAction({0.25, 0.25, 0.25, 0.125, 0.125}),
                          AllocationAction({0.5, 0.0, 0.0, 0.25, 0.25}), AllocationAction::only(Asset::mortgage)});
  const auto ep = run_episode(dyadic, flat);
  CHECK(ep.final_value + ep.states.back().cumulative_luxury == 3'600'000.0);

  // Mortgage fully repaid part way through: the surplus flows to savings.
  EnvironmentSettings small{10000, 50000};
  ConstantPolicy all_mortgage(AllocationAction::only(Asset::mortgage));
  const auto ep2 = run_episode(all_mortgage, flat, small);
  CHECK(ep2.final_value == 3'600'000.0);
  CHECK(ep2.states.back().mortgage_principal_repaid == 50000.0);

  RandomPolicy random(4);
  const auto ep3 = run_episode(random, flat);
  CHECK(ep3.final_value + ep3.states.back().cumulative_luxury == doctest::Approx(3'600'000.0).epsilon(1e-12));
}

TEST_CASE("earlier mortgage repayment never loses to later repayment of the same total") {
  // Exhaustive over 12-month schedules: month t is either all-mortgage or all-savings.
  constexpr std::size_t T = 12;
  std::vector<double> rates;
  for (std::size_t t = 0; t < T; ++t) rates.push_back(0.001 + 0.0005 * static_cast<double>(t % 3));
  const PriceSeries series(std::vector<double>(T, 1.0), std::vector<double>(T, 1.0), rates);

  // principal repaid minus interest paid, with interest tracked independently
  auto net = [&](unsigned mask) {
    PortfolioState s = PortfolioState::initial();
    double interest = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      interest += s.mortgage_outstanding * rates[t];
      const bool pay = (mask >> t) & 1U;
      s = step(s, AllocationAction::only(pay ? Asset::mortgage : Asset::savings), series.at(t), 10000);
    }
    return s.mortgage_principal_repaid - interest;
  };

  std::vector<double> value(1U << T);
  for (unsigned m = 0; m < value.size(); ++m) value[m] = net(m);

  // a repays no later than b when every prefix of a contains at least as many payments.
  auto earlier = [&](unsigned a, unsigned b) {
    int pa = 0, pb = 0;
    for (std::size_t t = 0; t < T; ++t) {
      pa += (a >> t) & 1U;
      pb += (b >> t) & 1U;
      if (pa < pb) return false;
    }
    return true;
  };

  std::size_t pairs = 0;
  for (unsigned a = 0; a < value.size(); ++a)
    for (unsigned b = 0; b < value.size(); ++b) {
      if (a == b || std::popcount(a) != std::popcount(b) || !earlier(a, b)) continue;
      ++pairs;
      if (value[a] < value[b] - 1e-9) FAIL("schedule " << a << " repays earlier than " << b << " but loses");
    }
  CHECK(pairs > 100000);
}

TEST_CASE("synthetic market: noise-free, deterministic, clipped") {
  SyntheticMarketConfig c;
  c.stock_volatility = c.property_volatility = c.interest_volatility = 0.0;
  const auto s = generate_synthetic(c, 24);
  for (double g : s.stock_factors()) CHECK(g == std::exp(0.006));
  for (double g : s.property_factors()) CHECK(g == std::exp(0.004));
  for (double r : s.interest_rates()) CHECK(r == 0.002);

  SyntheticMarketConfig d;
  d.seed = 42;
  CHECK(generate_synthetic(d, 360) == generate_synthetic(d, 360));
  d.seed = 43;
  CHECK_FALSE(generate_synthetic(d, 360) == generate_synthetic(SyntheticMarketConfig{}, 360));

  SyntheticMarketConfig wild;
  wild.interest_volatility = 0.05;
  for (double r : generate_synthetic(wild, 2000).interest_rates()) CHECK(r >= 0.0);

  CHECK(generate_synthetic(SyntheticMarketConfig{}, 0).months() == 0);
  SyntheticMarketConfig bad;
  bad.stock_volatility = -1;
  CHECK_THROWS_AS(generate_synthetic(bad, 5), ContractError);
}

TEST_CASE("log stock factors obey the law of large numbers") {
  SyntheticMarketConfig c;
  c.seed = 7;
  constexpr std::size_t N = 100000;
  const auto s = generate_synthetic(c, N);
  double mean = 0.0;
  for (double g : s.stock_factors()) mean += std::log(g);
  mean /= N;
  const double expected = c.stock_drift - c.stock_volatility * c.stock_volatility / 2;
  const double se = c.stock_volatility / std::sqrt(static_cast<double>(N));
  CHECK(std::abs(mean - expected) < 3 * se);
}

TEST_CASE("price CSV parsing and round trip") {
  std::istringstream two("month,stock_factor,property_factor,interest_rate\n0,1.01,0.99,0.002\n1,0.98,1.003,0\n");
  const auto s = parse_price_csv(two);
  REQUIRE(s.months() == 2);
  CHECK(s.at(0).stock_factor == 1.01);
  CHECK(s.at(0).property_factor == 0.99);
  CHECK(s.at(0).interest_rate == 0.002);
  CHECK(s.at(1).stock_factor == 0.98);
  CHECK(s.at(1).interest_rate == 0.0);

  SyntheticMarketConfig c;
  c.seed = 3;
  const auto gen = generate_synthetic(c, 360);
  std::stringstream buf;
  write_price_csv(buf, gen);
  const auto back = parse_price_csv(buf);
  REQUIRE(back.months() == 360);
  for (std::size_t t = 0; t < 360; ++t) {
    CHECK(std::abs(back.at(t).stock_factor - gen.at(t).stock_factor) <= 1e-12);
    CHECK(std::abs(back.at(t).interest_rate - gen.at(t).interest_rate) <= 1e-12);
  }
  CHECK(back == gen);
}

TEST_CASE("price CSV errors carry line numbers") {
  auto parse_error_line = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      parse_price_csv(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string header = "month,stock_factor,property_factor,interest_rate\n";
  CHECK(parse_error_line(header + "0,1.0,1.0,0\n1,0,1.0,0\n") == 3);
  CHECK(parse_error_line(header + "0,1.0,abc,0\n") == 2);
  CHECK(parse_error_line(header + "0,1.0,1.0\n") == 2);
  CHECK(parse_error_line(header + "0,1.0,1.0,-0.1\n") == 2);
  CHECK(parse_error_line(header + "5,1.0,1.0,0\n") == 2);
  CHECK(parse_error_line("month,stock,property,interest\n") == 1);
  std::istringstream empty("");
  CHECK_THROWS_AS(parse_price_csv(empty), ParseError);
  CHECK_THROWS_AS(load_price_csv("/nonexistent/prices.csv"), IoError);
}

TEST_CASE("episodes: empty series, determinism, simplex-valued records") {
  ConstantPolicy p(AllocationAction::only(Asset::stocks));
  const auto empty = run_episode(p, PriceSeries::constant(0, {}));
  CHECK(empty.months() == 0);
  CHECK(empty.states.empty());
  CHECK(empty.final_value == 0.0);

  const auto series = generate_synthetic(SyntheticMarketConfig{}, 120);
  RandomPolicy r1(9), r2(9);
  const auto a = run_episode(r1, series);
  const auto b = run_episode(r2, series);
  CHECK(a.states == b.states);
  CHECK(a.actions == b.actions);
  CHECK(a.final_value == b.final_value);
  for (const auto& act : a.actions) CHECK(on_simplex(act.fractions(), 1e-9));

  std::ostringstream csv;
  write_episode_csv(csv, a);
  std::istringstream lines(csv.str());
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(first ==
        "month,savings,property,stocks,luxury_cum,mortgage_outstanding,act_savings,act_property,act_stocks,"
        "act_luxury,act_mortgage");
  CHECK(second.rfind("0,", 0) == 0);
}

TEST_CASE("observations have the documented layout") {
  const auto series = PriceSeries::constant(10, {1.02, 0.99, 0.003});
  PortfolioState s = PortfolioState::initial();
  s.month = 4;
  s.stocks = 20000;
  const auto obs = observe(s, series, {});
  REQUIRE(obs.size() == kMarketObservationSize);
  CHECK(obs[2] == doctest::Approx(0.5));    // stocks / invested
  CHECK(obs[5] == doctest::Approx(1.0));    // outstanding / principal
  CHECK(obs[6] == doctest::Approx(0.4));    // t / T
  CHECK(obs[7] == doctest::Approx(0.2));    // (g_s − 1)·10
  CHECK(obs[9] == doctest::Approx(0.3));    // r·100
}
