#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "beboin/cli.hpp"
#include "beboin/document.hpp"
#include "beboin/tablegen.hpp"
#include "support/oracles.hpp"

using namespace beboin;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_file(const std::string& stem) {
  std::random_device rd;
  return fs::temp_directory_path() / ("beboin-cli-" + std::to_string(rd()) + "-" + stem);
}

void write(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

// Dose 1 with three patients enrolled at time 0, none resolved, clock at `clock`.
std::string fresh_cohort(double clock) {
  TrialState s = new_trial(DesignConfig{});
  for (int i = 1; i <= 3; ++i) s = advance(std::move(s), EnrollEvent{"P" + std::to_string(i), 1, Origin::DoseEscalation, 0.0});
  s = advance(std::move(s), ClockEvent{clock});
  return dump_state(s);
}

}  // namespace

TEST_CASE("table subcommand reproduces the golden table") {
  const Run r = cli({"table", "--phi", "0.25", "--cohort", "3", "--nmax", "9", "--format", "md"});
  REQUIRE(r.code == kExitOk);
  const auto expected = oracle::latex_rows_to_markdown(
      oracle::read_text(std::string(BEBOIN_GOLDEN_DIR) + "/decision_table_phi025.tex"));
  CHECK(oracle::markdown_body(r.out) == expected);
  CHECK(r.err.find("config: ") == 0);

  const Run csv = cli({"table", "--format", "csv"});
  CHECK(csv.out == render_table(generate_table(DesignConfig{}, 9), TableFormat::Csv));
  CHECK(cli({"table", "--format", "json"}).code == kExitOk);
}

TEST_CASE("exit codes") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"table", "--nmax", "nine"}).code == kExitUsage);
  CHECK(cli({"table", "--format", "pdf"}).code == kExitUsage);
  CHECK(cli({"boundaries", "--phi", "1.5"}).code == kExitUsage);
  const Run bad = cli({"boundaries", "--phi", "1.5"});
  CHECK(bad.err.find("error[config]: target_dlt_rate") != std::string::npos);
  CHECK(cli({"decide", "--state", "/nonexistent/state.json"}).code == kExitUsage);
  CHECK(cli({"simulate", "--scenario", "s99"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);

  // A table that cannot fit the cohort size is a domain error.
  CHECK(cli({"table", "--cohort", "3", "--nmax", "2"}).code == kExitDomain);

  // A state that the rules reject.
  const fs::path path = temp_file("state.json");
  write(path, fresh_cohort(0.5));
  const Run early = cli({"decide", "--state", path.string(), "--at", "0.1"});
  CHECK(early.code == kExitUsage);
  const Run combo = cli({"decide", "--state", path.string(), "--phi", "0.3"});
  CHECK(combo.code == kExitUsage);
  fs::remove(path);
}

TEST_CASE("boundaries subcommand") {
  const Run r = cli({"boundaries", "--format", "json"});
  REQUIRE(r.code == kExitOk);
  const Json j = parse_json(r.out);
  CHECK(j["lambda_e"].get<double>() == doctest::Approx(0.1968).epsilon(5e-4 / 0.1968));
  CHECK(j["lambda_d"].get<double>() == doctest::Approx(0.2984).epsilon(5e-4 / 0.2984));
  CHECK(cli({"boundaries"}).out.find("0.196801,0.298392") != std::string::npos);
}

TEST_CASE("estimate subcommand") {
  const Run r = cli({"estimate", "--n", "6", "--y", "1", "--pending", "0.9", "--format", "json"});
  REQUIRE(r.code == kExitOk);
  const Json j = parse_json(r.out);
  CHECK(j[0]["m_pending"] == 1);
  CHECK(j[0]["tf"].get<double>() == doctest::Approx(0.3));
  const double pt = (0.125 + 1) / 6.0;
  CHECK(j[0]["estimate"]["p_hat"].get<double>() == doctest::Approx((1 + pt / (1 - pt) * 0.7) / 6));
  CHECK(cli({"estimate"}).code == kExitUsage);
}

TEST_CASE("decide: a fresh cohort suspends under Rule 1") {
  const fs::path path = temp_file("state.json");
  write(path, fresh_cohort(2.0));
  const Run r = cli({"decide", "--state", path.string(), "--format", "csv"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out == "verdict,from_dose,next_dose,eliminated_from,reason\nsuspend,1,1,0,rule1_insufficient_observed\n");

  const Run md = cli({"decide", "--state", path.string(), "--format", "md"});
  CHECK(md.out.find("| rule1 |") != std::string::npos);

  // Once the windows close without DLTs the cohort escalates, and --apply
  // emits a state that parses and re-serializes identically.
  const Run applied = cli({"decide", "--state", path.string(), "--at", "3", "--apply"});
  REQUIRE(applied.code == kExitOk);
  const TrialState next = parse_state(applied.out);
  CHECK(next.current_dose == 2);
  CHECK(dump_state(next) == applied.out);
  fs::remove(path);
}

TEST_CASE("select subcommand on a completed simulated trial") {
  Rng rng = replicate_rng(3, 0);
  const TrialResult t = run_trial(DesignConfig{}, find_scenario("s3"), DesignMode::BeBoin, rng);
  REQUIRE(t.mtd.has_value());
  const fs::path path = temp_file("done.json");
  write(path, dump_state(t.final_state));
  const Run r = cli({"select", "--state", path.string(), "--format", "json"});
  REQUIRE(r.code == kExitOk);
  const Json j = parse_json(r.out);
  CHECK(j["mtd"] == *t.mtd);
  CHECK(j["obd"] == *t.obd);
  CHECK(j["utilities"].size() >= 1);
  fs::remove(path);
}

TEST_CASE("simulate is deterministic and honours the seed") {
  const std::vector<std::string> args{"simulate", "--scenario", "2", "--reps", "40", "--seed", "5", "--mode", "all"};
  const Run a = cli(args);
  const Run b = cli(args);
  REQUIRE(a.code == kExitOk);
  CHECK(a.out == b.out);
  CHECK(std::count(a.out.begin(), a.out.end(), '\n') == 4);
  auto other = args;
  other[6] = "6";
  CHECK(cli(other).out != a.out);

  const std::string file = std::string(BEBOIN_SOURCE_DIR) + "/scenarios/s2.json";
  auto from_file = args;
  from_file[2] = file;
  CHECK(cli(from_file).out == a.out);
}

TEST_CASE("checked-in scenario files match the built-in library") {
  for (const auto& s : scenario_library()) {
    const std::string path = std::string(BEBOIN_SOURCE_DIR) + "/scenarios/" + s.name + ".json";
    INFO(path);
    CHECK(scenario_from_json(parse_json(oracle::read_text(path))) == s);
  }
  const Run r = cli({"scenarios"});
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 9);
}
