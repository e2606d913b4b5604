#include <doctest.h>

#include <random>
#include <string>

#include "beboin/document.hpp"
#include "beboin/sim.hpp"

using namespace beboin;

namespace {

bool has_issue(const ConfigError& e, const std::string& field) {
  for (const auto& i : e.issues())
    if (i.field == field) return true;
  return false;
}

// A simulated trial under a randomly chosen scenario, mode and config.
TrialState random_trial(std::mt19937_64& pick, std::uint64_t index) {
  const auto lib = scenario_library();
  Scenario s = lib[pick() % lib.size()];
  const auto variants = sensitivity_variants(s);
  if (pick() % 2) s = variants[pick() % variants.size()];
  const DesignMode mode = std::array{DesignMode::BeBoin, DesignMode::TiteBoin, DesignMode::BfBoin}[pick() % 3];
  DesignConfig cfg;
  if (pick() % 3 == 0) cfg.backfill_strategy = BackfillStrategy::RandomizeEligible;
  if (pick() % 4 == 0) cfg.stage2_per_arm = 5;
  Rng rng = replicate_rng(777, index);
  return run_trial(cfg, s, mode, rng).final_state;
}

}  // namespace

TEST_CASE("trial states serialize, replay and re-serialize byte-identically") {
  std::mt19937_64 pick(4242);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const TrialState state = random_trial(pick, i);
    const std::string text = dump_state(state);
    const TrialState back = parse_state(text);
    INFO("run " << i);
    REQUIRE(back == state);
    REQUIRE(dump_state(back) == text);
  }
}

TEST_CASE("edited derived fields are detected") {
  std::mt19937_64 pick(9);
  const TrialState state = random_trial(pick, 0);
  const Json doc = state_to_json(state);

  Json wrong_dose = doc;
  wrong_dose["current_dose"] = state.current_dose == 1 ? 2 : 1;
  CHECK_THROWS_AS(state_from_json(wrong_dose), DomainError);

  Json wrong_clock = doc;
  wrong_clock["clock_months"] = state.clock + 1.0;
  CHECK_THROWS_AS(state_from_json(wrong_clock), DomainError);

  Json wrong_schema = doc;
  wrong_schema["schema_version"] = 99;
  CHECK_THROWS_AS(state_from_json(wrong_schema), DomainError);

  Json no_events = doc;
  no_events.erase("events");
  CHECK_THROWS_AS(state_from_json(no_events), DomainError);

  CHECK_THROWS_AS(parse_state("{ not json"), DomainError);
  CHECK_THROWS_AS(parse_state("[]"), DomainError);
}

TEST_CASE("design configs round-trip and resolve defaults") {
  DesignConfig c;
  c.target_dlt_rate = 0.3;
  c.num_doses = 4;
  c.max_sample_n = 30;
  c.backfill_strategy = BackfillStrategy::RandomizeEligible;
  c.efficacy_assess_time = 1.5;
  c.rules.stagger_de = true;
  CHECK(config_from_json(to_json(c)) == c);
  CHECK(config_from_json(Json::object()) == DesignConfig{});
  CHECK(config_from_json(parse_json(R"({"target_dlt_rate": 0.3})")).target_dlt_rate == 0.3);
}

TEST_CASE("config errors name every offending field") {
  try {
    config_from_json(parse_json(R"({"target_dlt_rate": "high", "colour": 1, "cohort_size": 2.5})"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(has_issue(e, "target_dlt_rate"));
    CHECK(has_issue(e, "colour"));
    CHECK(has_issue(e, "cohort_size"));
  }
  try {
    config_from_json(parse_json(R"({"phi1_factor": 1.2, "num_doses": 0})"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.issues().size() >= 2);
  }
  CHECK_THROWS_AS(config_from_json(Json::array()), ConfigError);
  CHECK_THROWS_AS(config_from_json(parse_json(R"({"rules": {"backfill": 1}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(parse_json(R"({"utility_scores": [1, 2]})")), ConfigError);
}

TEST_CASE("scenario documents") {
  const Scenario s = find_scenario("s6-uniform");
  const Json j = to_json(s);
  CHECK(j["tte_model"] == "uniform");
  CHECK(scenario_from_json(j) == s);
  Json bad = j;
  bad["p_tox"] = "0.1";
  CHECK_THROWS_AS(scenario_from_json(bad), DomainError);
  bad = j;
  bad["accrual"]["kind"] = "bursty";
  CHECK_THROWS_AS(scenario_from_json(bad), DomainError);
}

TEST_CASE("decisions and events round-trip") {
  std::mt19937_64 pick(31);
  const TrialState state = random_trial(pick, 5);
  for (const auto& e : state.events) {
    const Json j = to_json(e);
    CHECK(to_json(event_from_json(j)) == j);
  }
  CHECK_THROWS_AS(event_from_json(parse_json(R"({"type": "teleport"})")), DomainError);
}
