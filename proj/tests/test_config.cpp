#include <string>

#include "bmilearn/config.hpp"
#include "doctest.h"

using namespace bmilearn;

TEST_CASE("defaults") {
  const ExperimentConfig c;
  CHECK(c.n_in == 4);
  CHECK(c.n == 50);
  CHECK(c.n_out == 2);
  CHECK(c.tau == 10.0);
  CHECK(c.sigma2_in == 0.0);
  CHECK(c.sigma2_rec == 0.25);
  CHECK(c.sigma2_bmi == 0.01);
  CHECK(c.eta_rec == 0.1);
  CHECK(c.g == 1.5);
  CHECK(c.trial_len == 20);
  CHECK(c.pretrain_trials == 2500);
  CHECK(c.block_size == 500);
  CHECK(c.seeds.size() == 4);
  CHECK(c.effective_train_trials() == 1500);
  ExperimentConfig rl;
  rl.rule = TrainRule::rl;
  CHECK(rl.effective_train_trials() == 15000);
  CHECK(c.effective_pretrain_eta() == 0.1);
}

TEST_CASE("minimal config parses") {
  const ExperimentConfig c = parse_config(R"({"schema_version": 1, "rule": "rl", "alignment": 0.7})");
  CHECK(c.rule == TrainRule::rl);
  CHECK(c.alignment == 0.7);
  CHECK(c.n == 50);
}

TEST_CASE("missing field is named") {
  try {
    parse_config(R"({"schema_version": 1})");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field == "rule");
    CHECK(std::string(e.what()).find("rule") != std::string::npos);
  }
}

TEST_CASE("errors carry field and line") {
  const std::string text = "{\n  \"schema_version\": 1,\n  \"rule\": \"sl_rflo\",\n  \"tau\": -3\n}";
  try {
    parse_config(text);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field == "tau");
    CHECK(e.line == 4);
  }
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "rule": "sl_rflo", "bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "rule": "nope"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "rule": "sl_rflo", "n": "fifty"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 2, "rule": "sl_rflo"})"), ConfigError);
  try {
    parse_config("{\n  \"schema_version\": 1,\n  \"rule\": \n}");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line >= 3);
  }
}

TEST_CASE("serialised config round-trips") {
  ExperimentConfig c = preset("estimate_m_rl");
  c.seed = 77;
  const ExperimentConfig back = parse_config(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.pretrain_eta.value() == 1.0);
  CHECK(back.seed == 77);
}

TEST_CASE("every preset validates") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    CHECK_NOTHROW(preset(name).validate());
  }
  CHECK_THROWS_AS(preset("missing"), ConfigError);
  CHECK(preset("main_rl").rule == TrainRule::rl);
  CHECK(preset("low_rank_sl").seeds.size() == 3);
}

TEST_CASE("rule names") {
  for (TrainRule r : {TrainRule::sl_rflo, TrainRule::sl_bptt, TrainRule::rl})
    CHECK(train_rule_from_string(to_string(r)) == r);
  CHECK_FALSE(train_rule_from_string("x"));
}
