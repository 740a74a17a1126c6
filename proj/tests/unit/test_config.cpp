#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ahrl/checkpoint.hpp"
#include "ahrl/config.hpp"
#include "ahrl/errors.hpp"

using namespace ahrl;

TEST_CASE("config defaults mirror the library defaults") {
  const RunConfig c;
  const TrainConfig t = c.train_config();
  const TrainConfig d;
  CHECK(t.actor_lr == d.actor_lr);
  CHECK(t.tau == d.tau);
  CHECK(t.gamma == d.gamma);
  CHECK(t.lambda == d.lambda);
  CHECK(t.episodes == d.episodes);
  CHECK(t.critic_hidden == d.critic_hidden);
  CHECK(t.update_rule == UpdateRule::adam);
  CHECK(c.market_config().stock_drift == SyntheticMarketConfig{}.stock_drift);
  CHECK(c.environment().mortgage_principal == kDefaultMortgagePrincipal);
  CHECK(c.attractor_options().grid_points == AttractorOptions{}.grid_points);
  CHECK(c.get_count("months") == 360);
  CHECK(t.eval_interval == 0);
  CHECK(c.orchestrator_config().eval_interval == 10);

  // One line per key, in key order.
  std::istringstream lines(c.to_string());
  std::string line;
  std::size_t i = 0;
  while (std::getline(lines, line)) {
    REQUIRE(i < config_keys().size());
    CHECK(line == std::string(config_keys()[i].name) + " = " + config_keys()[i].default_value);
    ++i;
  }
  CHECK(i == config_keys().size());
}

TEST_CASE("config parsing") {
  std::istringstream in(
      "# header comment\n"
      "\n"
      "seed = 12   # trailing\n"
      "  lambda=0.5\n"
      "update_rule = plain\n");
  const auto c = RunConfig::parse(in);
  CHECK(c.get_count("seed") == 12);
  CHECK(c.get_real("lambda") == 0.5);
  CHECK(c.train_config().update_rule == UpdateRule::plain);
  CHECK(c.train_config().seed == 12);

  std::istringstream round(c.to_string());
  CHECK(RunConfig::parse(round) == c);

  std::istringstream unknown("seed = 1\nbogus = 2\n");
  try {
    RunConfig::parse(unknown);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream no_eq("seed 1\n");
  CHECK_THROWS_AS(RunConfig::parse(no_eq), ParseError);

  RunConfig c2;
  CHECK_THROWS_AS(c2.set("episodes", "-3"), ContractError);
  CHECK_THROWS_AS(c2.set("episodes", "2.5"), ContractError);
  CHECK_THROWS_AS(c2.set("lambda", "abc"), ContractError);
  CHECK_THROWS_AS(c2.set("lambda", "inf"), ContractError);
  CHECK_THROWS_AS(c2.set("update_rule", "sgd"), ContractError);
  CHECK_THROWS_AS(c2.set("nope", "1"), ContractError);
  CHECK_THROWS_AS(c2.get("nope"), ContractError);
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/run.cfg"), IoError);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(3);
  Checkpoint c;
  c.kind = "orchestrator";
  c.label = "cust-1";
  c.prior = AffinityPrior({0.1, 0.2, 0.3, 0.15, 0.25});
  c.behavior = {0.1, -1.0 / 3.0, 0.7};
  c.config.seed = 77;
  c.config.eval_interval = 10;
  c.config.lambda = 1.0 / 7.0;
  c.config.update_rule = UpdateRule::plain;
  c.actor = ActorNetwork::random(kMarketObservationSize + 3, rng);

  const std::string text = checkpoint_to_string(c);
  const Checkpoint back = checkpoint_from_string(text);
  CHECK(back.kind == c.kind);
  CHECK(back.label == c.label);
  CHECK(back.prior.weights() == c.prior.weights());
  CHECK(back.behavior == c.behavior);
  CHECK(back.config.seed == 77);
  CHECK(back.config.eval_interval == 10);
  CHECK(back.config.lambda == c.config.lambda);
  CHECK(back.config.update_rule == UpdateRule::plain);
  CHECK(back.actor.core().input_weights == c.actor.core().input_weights);
  CHECK(back.actor.core().recurrent_weights == c.actor.core().recurrent_weights);
  CHECK(back.actor.head().weights == c.actor.head().weights);
  CHECK(back.actor.head().bias == c.actor.head().bias);
  CHECK(checkpoint_to_string(back) == text);

  const std::string path = "ahrl_unit_checkpoint.json";
  save_checkpoint(path, c);
  CHECK(checkpoint_to_string(load_checkpoint(path)) == text);
  std::remove(path.c_str());
}

TEST_CASE("malformed checkpoints") {
  CHECK_THROWS_AS(checkpoint_from_string(""), ContractError);
  CHECK_THROWS_AS(checkpoint_from_string("{\"format\": \"other\"}"), ContractError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/agent.json"), IoError);

  Rng rng(1);
  Checkpoint c;
  c.kind = "prototype";
  c.label = "openness";
  c.actor = ActorNetwork::random(kMarketObservationSize, rng);
  std::string text = checkpoint_to_string(c);
  const auto v = text.find("\"version\": 1");
  REQUIRE(v != std::string::npos);
  std::string wrong = text;
  wrong.replace(v, 12, "\"version\": 9");
  CHECK_THROWS_AS(checkpoint_from_string(wrong), ContractError);
  // Truncation anywhere is rejected, never half-loaded.
  CHECK_THROWS(checkpoint_from_string(text.substr(0, text.size() / 2)));
}
