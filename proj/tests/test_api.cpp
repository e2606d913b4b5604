#include <doctest.h>

#include <httplib.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "beboin/api.hpp"
#include "beboin/sim.hpp"
#include "support/api_support.hpp"

using namespace beboin;
namespace fs = std::filesystem;
using apitest::call;
using apitest::drive;
using apitest::TempDir;

namespace {

std::string create(TrialService& svc, const Json& config = Json::object()) {
  const auto r = call(svc, "POST", "/trials", Json{{"config", config}});
  REQUIRE(r.status == 201);
  return r.json()["trial_id"].get<std::string>();
}

ApiResponse enroll(TrialService& svc, const std::string& id, int dose, double t, const std::string& pid) {
  return call(svc, "POST", "/trials/" + id + "/patients",
              Json{{"dose", dose}, {"enroll_time", t}, {"patient_id", pid}});
}

ApiResponse outcome(TrialService& svc, const std::string& id, const std::string& pid, const std::string& tox,
                    double t) {
  return call(svc, "POST", "/trials/" + id + "/outcomes",
              Json{{"patient_id", pid}, {"tox_status", tox}, {"time", t}});
}

Json state_of(TrialService& svc, const std::string& id) {
  const auto r = call(svc, "GET", "/trials/" + id);
  REQUIRE(r.status == 200);
  return r.json();
}

}  // namespace

TEST_CASE("creating and reading a trial") {
  TempDir dir;
  TrialService svc(dir.path());
  const auto r = call(svc, "POST", "/trials", Json{{"config", {{"target_dlt_rate", 0.3}}}});
  CHECK(r.status == 201);
  CHECK(r.version == 1);
  const std::string id = r.json()["trial_id"];
  const Json got = state_of(svc, id);
  CHECK(got["version"] == 1);
  CHECK(got["state"]["config"]["target_dlt_rate"] == 0.3);
  CHECK(got["state"]["phase"] == "stage_one_accruing");

  CHECK(call(svc, "GET", "/trials/T999999").status == 404);
  CHECK(call(svc, "GET", "/nowhere").status == 404);
  CHECK(call(svc, "DELETE", "/trials/" + id).status == 405);
  CHECK(call(svc, "GET", "/trials").status == 405);

  const auto bad = call(svc, "POST", "/trials", Json{{"config", {{"target_dlt_rate", 2.0}, {"bogus", 1}}}});
  CHECK(bad.status == 400);
  CHECK(bad.json()["error"]["code"] == "invalid_config");
  std::set<std::string> fields;
  const Json bad_doc = bad.json();
  for (const auto& issue : bad_doc["error"]["details"]) fields.insert(issue["field"].get<std::string>());
  CHECK(fields.count("target_dlt_rate") == 1);
  CHECK(fields.count("bogus") == 1);
  CHECK(call(svc, "POST", "/trials", Json{{"cfg", 1}}).status == 400);
  ApiRequest torn{"POST", "/trials", {}, "{\"config\": ", {}};
  CHECK(svc.handle(torn).status == 400);
}

TEST_CASE("worked example: a pending patient with enough follow-up allows escalation") {
  TempDir dir;
  TrialService svc(dir.path());
  const std::string id = create(svc);
  for (int i = 1; i <= 3; ++i) CHECK(enroll(svc, id, 1, 0.0, "P" + std::to_string(i)).status == 201);
  CHECK(outcome(svc, id, "P1", "dlt", 1.0).status == 200);
  CHECK(outcome(svc, id, "P2", "no_dlt", 3.0).status == 200);
  CHECK(outcome(svc, id, "P3", "no_dlt", 3.0).status == 200);

  // 1/3 observed exceeds lambda_d, and dose 1 has nowhere lower to go.
  auto d = call(svc, "GET", "/trials/" + id + "/decision", nullptr, {{"at", "3"}});
  REQUIRE(d.status == 200);
  CHECK(d.json()["verdict"] == "stay");
  CHECK(d.json()["actionable"] == true);
  CHECK(call(svc, "POST", "/trials/" + id + "/advance", Json{{"accept_decision", true}, {"at", 3.0}}).status == 200);

  CHECK(enroll(svc, id, 1, 3.0, "P4").status == 201);
  CHECK(enroll(svc, id, 1, 3.0, "P5").status == 201);
  CHECK(enroll(svc, id, 1, 5.1, "P6").status == 201);
  CHECK(outcome(svc, id, "P4", "no_dlt", 6.0).status == 200);
  CHECK(outcome(svc, id, "P5", "no_dlt", 6.0).status == 200);

  // n = 6, one DLT, P6 pending at 0.9 of 3 months: tf = mf = 0.3.
  d = call(svc, "GET", "/trials/" + id + "/decision", nullptr, {{"at", "6"}});
  REQUIRE(d.status == 200);
  const Json j = d.json();
  CHECK(j["verdict"] == "escalate");
  CHECK(j["next_dose"] == 2);
  bool saw_tf = false, saw_rule2 = false;
  for (const auto& step : j["trace"]) {
    for (const auto& v : step["values"]) {
      if (v["name"] == "tf_threshold") {
        saw_tf = true;
        CHECK(v["value"].get<double>() == doctest::Approx(0.216511).epsilon(1e-5));
      }
    }
    if (step["rule"] == "rule2") saw_rule2 = true;
  }
  CHECK(saw_tf);
  CHECK(saw_rule2);
  const Json dose1 = j["summaries"][0];
  CHECK(dose1["n"] == 6);
  CHECK(dose1["m_pending"] == 1);
  CHECK(dose1["tf"].get<double>() == doctest::Approx(0.3));

  // The recorded outcomes moved the clock to 6, so earlier times are refused.
  d = call(svc, "GET", "/trials/" + id + "/decision", nullptr, {{"at", "5.7"}});
  CHECK(d.status == 422);

  const auto adv = call(svc, "POST", "/trials/" + id + "/advance", Json{{"accept_decision", true}, {"at", 6.0}});
  CHECK(adv.status == 200);
  CHECK(adv.json()["current_dose"] == 2);
}

TEST_CASE("version checks and rule violations") {
  TempDir dir;
  TrialService svc(dir.path());
  const std::string id = create(svc);
  const auto first = call(svc, "POST", "/trials/" + id + "/patients", Json{{"dose", 1}, {"version", 1}});
  CHECK(first.status == 201);
  CHECK(first.version == 2);
  // Stale body version and stale If-Match.
  auto stale = call(svc, "POST", "/trials/" + id + "/patients", Json{{"dose", 1}, {"version", 1}});
  CHECK(stale.status == 409);
  CHECK(stale.json()["error"]["code"] == "version_conflict");
  CHECK(stale.json()["error"]["details"]["current_version"] == 2);
  CHECK(call(svc, "POST", "/trials/" + id + "/patients", Json{{"dose", 1}}, {}, 1).status == 409);
  CHECK(call(svc, "POST", "/trials/" + id + "/patients", Json{{"dose", 1}}, {}, 2).status == 201);

  // The cohort is still open, so there is nothing to advance.
  CHECK(call(svc, "POST", "/trials/" + id + "/advance", Json{{"accept_decision", true}}).status == 409);
  CHECK(call(svc, "POST", "/trials/" + id + "/advance", Json{{"accept_decision", false}}).status == 400);
  CHECK(call(svc, "GET", "/trials/" + id + "/selection").status == 409);

  CHECK(outcome(svc, id, "P999", "dlt", 0.5).status == 404);
  CHECK(outcome(svc, id, "P001", "maybe", 0.5).status == 400);
  CHECK(call(svc, "POST", "/trials/" + id + "/outcomes", Json{{"patient_id", "P001"}}).status == 400);
  CHECK(call(svc, "POST", "/trials/" + id + "/patients", Json{{"dose", "one"}}).status == 400);
  CHECK(call(svc, "POST", "/trials/" + id + "/patients", Json{{"dose", 9}}).status == 422);
  CHECK(call(svc, "POST", "/trials/" + id + "/patients", Json{{"dose", 1}, {"origin", "stage_two"}}).status == 409);

  // Time never runs backwards.
  CHECK(call(svc, "POST", "/trials/" + id + "/advance", Json{{"clock_months", 2.0}}).status == 200);
  CHECK(enroll(svc, id, 1, 1.0, "P010").status == 422);
  const Json s = state_of(svc, id);
  CHECK(s["version"] == 4);
}

TEST_CASE("decision table endpoint") {
  TempDir dir;
  TrialService svc(dir.path());
  const auto md = call(svc, "GET", "/decision-table", nullptr, {{"phi", "0.25"}, {"cohort", "3"}, {"nmax", "9"}});
  CHECK(md.status == 200);
  CHECK(md.body == render_table(generate_table(DesignConfig{}, 9), TableFormat::Markdown));
  const auto js = call(svc, "GET", "/decision-table", nullptr, {{"format", "json"}});
  CHECK(js.json()["rows"].size() == 25);
  CHECK(call(svc, "GET", "/decision-table", nullptr, {{"format", "pdf"}}).status == 400);
  CHECK(call(svc, "GET", "/decision-table", nullptr, {{"phi", "x"}}).status == 400);
  CHECK(call(svc, "GET", "/decision-table", nullptr, {{"phi", "0.9"}}).status == 400);
}

TEST_CASE("simulation jobs") {
  TempDir dir;
  TrialService svc(dir.path());
  const auto sub = call(svc, "POST", "/simulations",
                        Json{{"scenario", "s2"}, {"mode", "be-boin"}, {"reps", 50}, {"seed", 9}});
  REQUIRE(sub.status == 202);
  const std::string job = sub.json()["job_id"];
  svc.wait_for_jobs();
  const auto done = call(svc, "GET", "/simulations/" + job);
  REQUIRE(done.status == 200);
  const Json expected = to_json(run_oc(DesignConfig{}, find_scenario("s2"), DesignMode::BeBoin, 50, 9));
  CHECK(done.json()["result"] == expected);

  CHECK(call(svc, "GET", "/simulations/J999").status == 404);
  CHECK(call(svc, "POST", "/simulations", Json{{"scenario", "s42"}}).status == 400);
  CHECK(call(svc, "POST", "/simulations", Json{{"scenario", "s1"}, {"mode", "crm"}}).status == 400);
  CHECK(call(svc, "POST", "/simulations", Json{{"scenario", "s1"}, {"reps", 0}}).status == 400);
  CHECK(call(svc, "POST", "/simulations", Json{{"mode", "be-boin"}}).status == 400);
}

TEST_CASE("simulated trials driven through the API match the simulator") {
  TempDir dir;
  TrialService svc(dir.path(), 5);
  std::vector<std::pair<std::string, TrialState>> runs;
  int r = 0;
  for (const auto& s : scenario_library()) {
    for (auto mode : {DesignMode::BeBoin, DesignMode::TiteBoin, DesignMode::BfBoin}) {
      Rng rng = replicate_rng(31, static_cast<std::uint64_t>(r++));
      const TrialResult t = run_trial(DesignConfig{}, s, mode, rng);
      const std::string id = create(svc, to_json(t.final_state.config));
      const auto failure = drive(svc, id, t.final_state);
      INFO(failure.value_or(""));
      REQUIRE_FALSE(failure);
      const Json got = state_of(svc, id);
      INFO(s.name << " " << to_string(mode));
      CHECK(got["state"] == state_to_json(t.final_state));
      runs.emplace_back(id, t.final_state);
    }
  }
  // Selection is served once the trial has ended.
  for (const auto& [id, st] : runs) {
    const auto sel = call(svc, "GET", "/trials/" + id + "/selection");
    REQUIRE(sel.status == 200);
    CHECK(sel.json()["mtd"] == (st.mtd ? Json(*st.mtd) : Json(nullptr)));
    CHECK(sel.json()["obd"] == (st.obd ? Json(*st.obd) : Json(nullptr)));
  }
}

TEST_CASE("restart and crash recovery replay the event log") {
  TempDir dir;
  std::vector<std::string> ids;
  std::map<std::string, Json> before;
  {
    TrialService svc(dir.path(), 4);
    int r = 0;
    for (const char* key : {"s1", "s4", "s7"}) {
      Rng rng = replicate_rng(55, static_cast<std::uint64_t>(r++));
      const TrialResult t = run_trial(DesignConfig{}, find_scenario(key), DesignMode::BeBoin, rng);
      const std::string id = create(svc);
      const auto failure = drive(svc, id, t.final_state);
      INFO(failure.value_or(""));
      REQUIRE_FALSE(failure);
      ids.push_back(id);
      before[id] = state_of(svc, id);
    }
    // A trial mid-way through stage one.
    const std::string id = create(svc);
    enroll(svc, id, 1, 0.0, "P1");
    enroll(svc, id, 1, 0.2, "P2");
    outcome(svc, id, "P1", "dlt", 0.7);
    ids.push_back(id);
    before[id] = state_of(svc, id);
  }

  {
    TrialService svc(dir.path(), 4);
    for (const auto& id : ids) CHECK(state_of(svc, id) == before[id]);
  }

  // Simulate a crash during an append: a partial line at the end of a log.
  const std::string live = ids.back();
  {
    std::ofstream log(dir.path() / live / "events.ndjson", std::ios::app | std::ios::binary);
    log << R"({"version": 5, "events": [{"type": "enroll", "patient_)";
  }
  {
    TrialService svc(dir.path(), 4);
    CHECK(state_of(svc, live) == before[live]);
    // The torn line is gone and appends continue from the last good version.
    const auto next = enroll(svc, live, 1, 0.9, "P3");
    CHECK(next.status == 201);
    CHECK(next.version == 5);
    const auto again = state_of(svc, live);
    CHECK(again["state"]["patients"].size() == 3);
    // A new trial after restart does not reuse an id.
    const std::string fresh = create(svc);
    CHECK(std::find(ids.begin(), ids.end(), fresh) == ids.end());
  }
  {
    TrialService svc(dir.path(), 4);
    CHECK(state_of(svc, live)["version"] == 5);
  }
}

TEST_CASE("a corrupted log is reported, not silently accepted") {
  TempDir dir;
  std::string id;
  {
    TrialService svc(dir.path());
    id = create(svc);
    enroll(svc, id, 1, 0.0, "P1");
    enroll(svc, id, 1, 0.0, "P2");
  }
  {
    std::ofstream log(dir.path() / id / "events.ndjson", std::ios::app | std::ios::binary);
    log << R"({"version": 9, "events": []})" << "\n";
  }
  CHECK_THROWS_AS(TrialService(dir.path()), StoreError);
}

TEST_CASE("HTTP transport") {
  TempDir dir;
  TrialService svc(dir.path());
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread loop([&] { server.listen(); });

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(std::chrono::seconds(5));
  httplib::Result created;
  for (int attempt = 0; attempt < 50 && !created; ++attempt) {
    created = client.Post("/trials", R"({"config": {}})", "application/json");
    if (!created) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  REQUIRE(created);
  CHECK(created->status == 201);
  CHECK(created->get_header_value("ETag") == "\"1\"");
  const std::string id = parse_json(created->body)["trial_id"];

  httplib::Headers stale{{"If-Match", "\"7\""}};
  auto conflict = client.Post("/trials/" + id + "/patients", stale, R"({"dose": 1})", "application/json");
  REQUIRE(conflict);
  CHECK(conflict->status == 409);
  httplib::Headers current{{"If-Match", "\"1\""}};
  auto ok = client.Post("/trials/" + id + "/patients", current, R"({"dose": 1})", "application/json");
  REQUIRE(ok);
  CHECK(ok->status == 201);
  CHECK(ok->get_header_value("ETag") == "\"2\"");

  auto table = client.Get("/decision-table?phi=0.25&cohort=3&nmax=9&format=csv");
  REQUIRE(table);
  CHECK(table->status == 200);
  CHECK(table->body == render_table(generate_table(DesignConfig{}, 9), TableFormat::Csv));

  auto del = client.Delete("/trials/" + id);
  REQUIRE(del);
  CHECK(del->status == 405);

  httplib::Headers garbage{{"If-Match", "abc"}};
  auto bad = client.Post("/trials/" + id + "/patients", garbage, R"({"dose": 1})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);

  server.stop();
  loop.join();
}
