#include "beboin/api.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <regex>

#include "beboin/boundaries.hpp"
#include "beboin/engine.hpp"
#include "beboin/estimator.hpp"
#include "beboin/sim.hpp"
#include "beboin/tablegen.hpp"

namespace beboin {

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string message;
  Json details = nullptr;
};

[[noreturn]] void fail(int status, std::string code, std::string message, Json details = nullptr) {
  throw HttpError{status, std::move(code), std::move(message), std::move(details)};
}

ApiResponse json_response(int status, const Json& body, std::optional<std::int64_t> version = {}) {
  ApiResponse r;
  r.status = status;
  r.body = body.dump(2) + "\n";
  r.version = version;
  return r;
}

ApiResponse error_response(const HttpError& e) {
  Json err;
  err["code"] = e.code;
  err["message"] = e.message;
  if (!e.details.is_null()) err["details"] = e.details;
  return json_response(e.status, Json{{"error", err}});
}

Json parse_body(const std::string& body) {
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) return Json::object();
  Json doc;
  try {
    doc = Json::parse(body);
  } catch (const Json::parse_error& e) {
    fail(400, "malformed_json", e.what());
  }
  if (!doc.is_object()) fail(400, "invalid_body", "request body must be a JSON object");
  return doc;
}

std::optional<double> opt_number(const Json& body, const char* key) {
  if (!body.contains(key) || body.at(key).is_null()) return std::nullopt;
  if (!body.at(key).is_number()) fail(400, "invalid_field", std::string(key) + " must be a number");
  return body.at(key).get<double>();
}

std::optional<int> opt_int(const Json& body, const char* key) {
  if (!body.contains(key) || body.at(key).is_null()) return std::nullopt;
  if (!body.at(key).is_number_integer()) fail(400, "invalid_field", std::string(key) + " must be an integer");
  return body.at(key).get<int>();
}

std::optional<std::string> opt_string(const Json& body, const char* key) {
  if (!body.contains(key) || body.at(key).is_null()) return std::nullopt;
  if (!body.at(key).is_string()) fail(400, "invalid_field", std::string(key) + " must be a string");
  return body.at(key).get<std::string>();
}

Json issues_json(const std::vector<ConfigIssue>& issues) {
  Json arr = Json::array();
  for (const auto& i : issues) arr.push_back(Json{{"field", i.field}, {"message", i.message}});
  return arr;
}

double query_number(const std::map<std::string, std::string>& query, const std::string& key,
                    double fallback) {
  auto it = query.find(key);
  if (it == query.end() || it->second.empty()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    fail(400, "invalid_query", key + " must be a number");
  }
}

bool trial_ended(const TrialState& s) {
  return s.phase == Phase::Completed || s.phase == Phase::TerminatedAllDosesToxic;
}

// FNV-1a; seeds the routing generator so that randomized backfill allocation
// is reproducible from the trial id and version.
std::uint64_t routing_seed(const std::string& id, std::int64_t version) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : id) h = (h ^ ch) * 1099511628211ULL;
  return h ^ static_cast<std::uint64_t>(version);
}

Json summaries_json(const TrialState& state, double at) {
  Json arr = Json::array();
  for (const auto& s : summarize_all(state, at)) arr.push_back(to_json(s));
  return arr;
}

Json estimates_json(const TrialState& state, double at) {
  Json arr = Json::array();
  for (const auto& s : summarize_all(state, at)) {
    if (s.n == 0) continue;
    Json e = to_json(imputed_dlt_rate(s, state.config.target_dlt_rate));
    e["dose"] = s.dose;
    arr.push_back(e);
  }
  return arr;
}

std::string next_patient_id(const TrialState& state) {
  for (std::size_t k = state.patients.size() + 1;; ++k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "P%03zu", k);
    if (!state.find_patient(buf)) return buf;
  }
}

struct Mutation {
  std::vector<TrialEvent> events;
  int status = 200;
  Json payload = Json::object();
};

}  // namespace

TrialService::TrialService(std::filesystem::path data_dir, int snapshot_every)
    : store_(std::move(data_dir), snapshot_every) {
  for (auto& t : store_.load_all()) {
    auto entry = std::make_shared<Entry>();
    entry->snapshot = std::make_shared<const Snapshot>(Snapshot{t.version, std::move(t.state)});
    trials_[t.id] = entry;
    if (t.id.size() > 1 && t.id[0] == 'T') {
      try {
        next_trial_ = std::max<std::int64_t>(next_trial_, std::stoll(t.id.substr(1)) + 1);
      } catch (const std::exception&) {
      }
    }
  }
}

TrialService::~TrialService() { wait_for_jobs(); }

void TrialService::wait_for_jobs() {
  std::vector<std::shared_future<Json>> pending;
  {
    std::lock_guard lock(jobs_mutex_);
    for (auto& [_, job] : jobs_) pending.push_back(job.result);
  }
  for (auto& f : pending) f.wait();
}

std::shared_ptr<TrialService::Entry> TrialService::find(const std::string& id) const {
  std::shared_lock lock(trials_mutex_);
  auto it = trials_.find(id);
  if (it == trials_.end()) fail(404, "unknown_trial", "no trial with id '" + id + "'");
  return it->second;
}

std::shared_ptr<const TrialService::Snapshot> TrialService::read(const std::string& id) const {
  return find(id)->load();
}

ApiResponse TrialService::handle(const ApiRequest& req) {
  static const std::regex trial_route(R"(^/trials/([A-Za-z0-9_-]+)(/(patients|outcomes|decision|advance|selection))?/?$)");
  static const std::regex job_route(R"(^/simulations/([A-Za-z0-9_-]+)/?$)");
  try {
    std::smatch m;
    const auto& p = req.path;
    if (p == "/trials" || p == "/trials/") {
      if (req.method == "POST") return create_trial(parse_body(req.body));
      fail(405, "method_not_allowed", req.method + " " + p);
    }
    if (std::regex_match(p, m, trial_route)) {
      const std::string id = m[1];
      const std::string sub = m[3];
      if (sub.empty() && req.method == "GET") return get_trial(id);
      if (sub == "patients" && req.method == "POST") return add_patient(id, parse_body(req.body), req.if_match);
      if (sub == "outcomes" && req.method == "POST") return record_outcome(id, parse_body(req.body), req.if_match);
      if (sub == "decision" && req.method == "GET") return get_decision(id, req.query);
      if (sub == "advance" && req.method == "POST") return advance_trial(id, parse_body(req.body), req.if_match);
      if (sub == "selection" && req.method == "GET") return get_selection(id);
      fail(405, "method_not_allowed", req.method + " " + p);
    }
    if (p == "/decision-table") {
      if (req.method == "GET") return decision_table(req.query);
      fail(405, "method_not_allowed", req.method + " " + p);
    }
    if (p == "/simulations" || p == "/simulations/") {
      if (req.method == "POST") return submit_simulation(parse_body(req.body));
      fail(405, "method_not_allowed", req.method + " " + p);
    }
    if (std::regex_match(p, m, job_route)) {
      if (req.method == "GET") return get_simulation(m[1]);
      fail(405, "method_not_allowed", req.method + " " + p);
    }
    fail(404, "not_found", "no route for " + p);
  } catch (const HttpError& e) {
    return error_response(e);
  } catch (const ConfigError& e) {
    return error_response({400, "invalid_config", e.what(), issues_json(e.issues())});
  } catch (const StoreError& e) {
    return error_response({500, "storage_error", e.what()});
  } catch (const StateError& e) {
    return error_response({422, "rule_violation", e.what()});
  } catch (const DomainError& e) {
    return error_response({422, "domain_error", e.what()});
  } catch (const std::exception& e) {
    return error_response({500, "internal_error", e.what()});
  }
}

template <class Fn>
ApiResponse TrialService::mutate(const std::string& id, const Json& body,
                                 std::optional<std::int64_t> if_match, Fn&& fn) {
  auto entry = find(id);
  std::lock_guard lock(entry->write);
  const auto snap = entry->load();

  std::optional<std::int64_t> expected = if_match;
  if (body.contains("version") && !body.at("version").is_null()) {
    if (!body.at("version").is_number_integer()) fail(400, "invalid_field", "version must be an integer");
    expected = body.at("version").get<std::int64_t>();
  }
  if (expected && *expected != snap->version)
    fail(409, "version_conflict",
         "expected version " + std::to_string(*expected) + " but the trial is at " +
             std::to_string(snap->version),
         Json{{"current_version", snap->version}});

  Mutation mutation = fn(*snap);
  TrialState next = snap->state;
  for (const auto& e : mutation.events) next = advance(std::move(next), e);

  const std::int64_t version = snap->version + 1;
  store_.append(id, version, mutation.events, next);
  auto published = std::make_shared<const Snapshot>(Snapshot{version, std::move(next)});
  std::atomic_store(&entry->snapshot, published);

  Json out;
  out["trial_id"] = id;
  out["version"] = version;
  out["phase"] = to_string(published->state.phase);
  out["current_dose"] = published->state.current_dose;
  out["clock_months"] = published->state.clock;
  for (auto& [k, v] : mutation.payload.items()) out[k] = v;
  return json_response(mutation.status, out, version);
}

ApiResponse TrialService::create_trial(const Json& body) {
  Json config_doc = body.contains("config") ? body.at("config") : Json::object();
  for (const auto& [k, _] : body.items())
    if (k != "config") fail(400, "invalid_field", "unknown field '" + k + "'");
  const DesignConfig config = config_from_json(config_doc);

  std::unique_lock lock(trials_mutex_);
  char buf[32];
  std::snprintf(buf, sizeof buf, "T%06lld", static_cast<long long>(next_trial_++));
  const std::string id = buf;
  auto stored = store_.create(id, config);
  auto entry = std::make_shared<Entry>();
  entry->snapshot = std::make_shared<const Snapshot>(Snapshot{stored.version, std::move(stored.state)});
  trials_[id] = entry;
  return json_response(201, Json{{"trial_id", id}, {"version", stored.version}}, stored.version);
}

ApiResponse TrialService::get_trial(const std::string& id) {
  const auto snap = read(id);
  Json out;
  out["trial_id"] = id;
  out["version"] = snap->version;
  out["state"] = state_to_json(snap->state);
  return json_response(200, out, snap->version);
}

ApiResponse TrialService::add_patient(const std::string& id, const Json& body,
                                      std::optional<std::int64_t> if_match) {
  const auto dose = opt_int(body, "dose");
  const auto origin_text = opt_string(body, "origin");
  const auto enroll_time = opt_number(body, "enroll_time");
  const auto patient_id = opt_string(body, "patient_id");
  for (const auto& [k, _] : body.items())
    if (k != "dose" && k != "origin" && k != "enroll_time" && k != "patient_id" && k != "version")
      fail(400, "invalid_field", "unknown field '" + k + "'");
  std::optional<Origin> origin;
  if (origin_text) {
    try {
      origin = origin_from_string(*origin_text);
    } catch (const std::exception&) {
      fail(400, "invalid_field", "origin must be dose_escalation, backfill or stage_two");
    }
  }

  return mutate(id, body, if_match, [&](const Snapshot& snap) {
    const TrialState& st = snap.state;
    if (trial_ended(st)) fail(409, "phase_conflict", "trial has ended (phase " + to_string(st.phase) + ")");
    const double t = enroll_time.value_or(st.clock);
    if (t < st.clock - kTimeEps)
      fail(422, "rule_violation", "enroll_time precedes the trial clock");

    Mutation m;
    int chosen_dose = 0;
    Origin chosen_origin = Origin::DoseEscalation;
    if (!dose) {
      if (st.stage_one()) {
        if (origin) fail(400, "invalid_field", "origin requires dose");
        Rng rng(routing_seed(id, snap.version));
        const Assignment a = route_arrival(st, t, rng);
        if (a.kind == Assignment::Kind::TurnedAway) {
          m.events.push_back(TurnedAwayEvent{t});
          m.payload["assignment"] = Json{{"kind", "turned_away"}, {"dose", nullptr}};
          return m;
        }
        chosen_dose = a.dose;
        chosen_origin = a.kind == Assignment::Kind::DoseEscalation ? Origin::DoseEscalation : Origin::Backfill;
      } else {
        // Stage two fills the arms evenly, higher arm first on ties.
        int best = 0, best_count = 0;
        for (int arm : stage_two_arms(*st.mtd)) {
          const int count = static_cast<int>(std::count_if(st.patients.begin(), st.patients.end(), [&](const auto& p) {
            return p.origin == Origin::StageTwo && p.dose == arm;
          }));
          if (count < st.config.stage2_per_arm && (best == 0 || count < best_count)) {
            best = arm;
            best_count = count;
          }
        }
        if (best == 0) fail(409, "phase_conflict", "stage-two arms are full");
        chosen_dose = best;
        chosen_origin = Origin::StageTwo;
      }
    } else {
      chosen_dose = *dose;
      if (origin) {
        chosen_origin = *origin;
      } else if (!st.stage_one()) {
        chosen_origin = Origin::StageTwo;
      } else {
        const bool de_open = st.phase == Phase::StageOneAccruing &&
                             st.cohort_enrolled < st.config.cohort_size &&
                             st.de_enrolled() < st.config.sample_size();
        chosen_origin = de_open && chosen_dose == st.current_dose ? Origin::DoseEscalation : Origin::Backfill;
      }
      if (chosen_origin == Origin::StageTwo && st.stage_one())
        fail(409, "phase_conflict", "trial is not in stage two");
      if (chosen_origin != Origin::StageTwo && !st.stage_one())
        fail(409, "phase_conflict", "stage one has ended");
    }
    const std::string pid = patient_id.value_or(next_patient_id(st));
    m.events.push_back(EnrollEvent{pid, chosen_dose, chosen_origin, t});
    m.status = 201;
    m.payload["patient_id"] = pid;
    m.payload["assignment"] = Json{{"kind", to_string(chosen_origin)}, {"dose", chosen_dose}};
    return m;
  });
}

ApiResponse TrialService::record_outcome(const std::string& id, const Json& body,
                                         std::optional<std::int64_t> if_match) {
  const auto patient_id = opt_string(body, "patient_id");
  const auto time = opt_number(body, "time");
  const auto tox = opt_string(body, "tox_status");
  const auto resp = opt_string(body, "response_status");
  for (const auto& [k, _] : body.items())
    if (k != "patient_id" && k != "time" && k != "tox_status" && k != "response_status" && k != "version")
      fail(400, "invalid_field", "unknown field '" + k + "'");
  if (!patient_id) fail(400, "missing_field", "patient_id is required");
  if (!time) fail(400, "missing_field", "time is required");
  if (tox && *tox != "dlt" && *tox != "no_dlt" && *tox != "pending")
    fail(400, "invalid_field", "tox_status must be dlt, no_dlt or pending");
  if (resp && *resp != "response" && *resp != "no_response" && *resp != "pending")
    fail(400, "invalid_field", "response_status must be response, no_response or pending");
  const bool has_tox = tox && *tox != "pending";
  const bool has_resp = resp && *resp != "pending";
  if (!has_tox && !has_resp) fail(400, "missing_field", "tox_status or response_status is required");

  return mutate(id, body, if_match, [&](const Snapshot& snap) {
    if (!snap.state.find_patient(*patient_id))
      fail(404, "unknown_patient", "no patient with id '" + *patient_id + "'");
    Mutation m;
    if (has_tox) m.events.push_back(ToxOutcomeEvent{*patient_id, *tox == "dlt", *time});
    if (has_resp) m.events.push_back(ResponseEvent{*patient_id, *resp == "response", *time});
    TrialState preview = snap.state;
    for (const auto& e : m.events) preview = advance(std::move(preview), e);
    m.payload["summaries"] = summaries_json(preview, preview.clock);
    m.payload["estimates"] = estimates_json(preview, preview.clock);
    return m;
  });
}

ApiResponse TrialService::get_decision(const std::string& id,
                                       const std::map<std::string, std::string>& query) {
  const auto snap = read(id);
  const TrialState& st = snap->state;
  double at = st.clock;
  if (auto it = query.find("at"); it != query.end() && it->second != "now")
    at = query_number(query, "at", st.clock);
  if (at < st.clock - kTimeEps) fail(422, "rule_violation", "at precedes the trial clock");
  if (!st.stage_one())
    fail(409, "phase_conflict", "no dose-escalation decision in phase " + to_string(st.phase));

  const Decision d = de_decision(st, at);
  const auto bounds = boin_boundaries(st.config);
  Json out;
  out["trial_id"] = id;
  out["version"] = snap->version;
  out["at"] = at;
  out["phase"] = to_string(st.phase);
  out["current_dose"] = st.current_dose;
  out["actionable"] = de_decision_pending(st) && !waiting_for_de_windows(st, at);
  out["verdict"] = to_string(d.verdict);
  out["next_dose"] = d.next_dose;
  out["reason"] = to_string(d.reason);
  out["trace"] = to_json(d).at("trace");
  out["boundaries"] = Json{{"lambda_e", bounds.lambda_e}, {"lambda_d", bounds.lambda_d}};
  out["summaries"] = summaries_json(st, at);
  out["estimates"] = estimates_json(st, at);
  Json elig = Json::array();
  if (st.config.rules.backfill)
    for (const auto& e : backfill_eligibility(st, at)) elig.push_back(to_json(e));
  out["backfill_eligibility"] = elig;
  out["conflict_report"] = st.config.rules.backfill ? to_json(detect_conflict(st, at)) : to_json(ConflictReport{});
  out["decision"] = to_json(d);
  return json_response(200, out, snap->version);
}

ApiResponse TrialService::advance_trial(const std::string& id, const Json& body,
                                        std::optional<std::int64_t> if_match) {
  const auto clock = opt_number(body, "clock_months");
  const auto at = opt_number(body, "at");
  std::optional<bool> accept;
  if (body.contains("accept_decision")) {
    if (!body.at("accept_decision").is_boolean()) fail(400, "invalid_field", "accept_decision must be a boolean");
    accept = body.at("accept_decision").get<bool>();
  }
  for (const auto& [k, _] : body.items())
    if (k != "clock_months" && k != "at" && k != "accept_decision" && k != "version")
      fail(400, "invalid_field", "unknown field '" + k + "'");
  if (clock && accept) fail(400, "invalid_body", "send either clock_months or accept_decision");
  if (!clock && accept != true) fail(400, "missing_field", "accept_decision must be true to apply the decision");

  return mutate(id, body, if_match, [&](const Snapshot& snap) {
    const TrialState& st = snap.state;
    Mutation m;
    if (clock) {
      if (*clock < st.clock - kTimeEps) fail(422, "rule_violation", "clock_months precedes the trial clock");
      m.events.push_back(ClockEvent{*clock});
      return m;
    }
    if (!st.stage_one())
      fail(409, "phase_conflict", "no dose-escalation decision in phase " + to_string(st.phase));
    const double t = at.value_or(st.clock);
    if (t < st.clock - kTimeEps) fail(422, "rule_violation", "at precedes the trial clock");
    if (!de_decision_pending(st)) fail(409, "phase_conflict", "the current dose-escalation cohort is still open");
    if (waiting_for_de_windows(st, t))
      fail(409, "phase_conflict", "staggered escalation: dose-escalation windows are still open");
    const Decision d = de_decision(st, t);
    m.events.push_back(DecisionEvent{d, t});
    m.payload["decision"] = to_json(d);
    return m;
  });
}

ApiResponse TrialService::get_selection(const std::string& id) {
  const auto snap = read(id);
  const TrialState& st = snap->state;
  if (st.stage_one()) fail(409, "phase_conflict", "selection is available once stage one has ended");

  TrialState stage_one = st;
  std::erase_if(stage_one.patients, [](const PatientRecord& p) { return p.origin == Origin::StageTwo; });
  const auto sel = select_stage_one(stage_one);
  Json out;
  out["trial_id"] = id;
  out["version"] = snap->version;
  out["phase"] = to_string(st.phase);
  out["isotonic_fit"] = to_json(sel.fit);
  out["eliminated_doses"] = st.eliminated_doses();
  out["mtd"] = st.mtd ? Json(*st.mtd) : Json(nullptr);
  if (st.mtd) {
    const auto two = select_stage_two(st, *st.mtd);
    Json utilities = Json::array();
    Json hi = to_json(two.high_utility);
    hi["dose"] = two.high.dose;
    utilities.push_back(hi);
    if (two.low_utility) {
      Json lo = to_json(*two.low_utility);
      lo["dose"] = two.low->dose;
      utilities.push_back(lo);
    }
    out["utilities"] = utilities;
  } else {
    out["utilities"] = Json::array();
  }
  out["obd"] = st.obd ? Json(*st.obd) : Json(nullptr);
  return json_response(200, out, snap->version);
}

ApiResponse TrialService::decision_table(const std::map<std::string, std::string>& query) {
  DesignConfig config;
  config.target_dlt_rate = query_number(query, "phi", config.target_dlt_rate);
  config.phi1_factor = query_number(query, "phi1_factor", config.phi1_factor);
  config.phi2_factor = query_number(query, "phi2_factor", config.phi2_factor);
  config.cohort_size = static_cast<int>(query_number(query, "cohort", config.cohort_size));
  const int nmax = static_cast<int>(query_number(query, "nmax", 9));
  config = require_valid(config);
  if (nmax < 1 || nmax > 60) fail(400, "invalid_query", "nmax must lie in [1, 60]");

  std::string format = "md";
  if (auto it = query.find("format"); it != query.end()) format = it->second;
  const auto rows = generate_table(config, nmax);
  if (format == "json") return json_response(200, Json{{"rows", table_to_json(rows)}});
  TableFormat fmt;
  try {
    fmt = table_format_from_string(format);
  } catch (const std::exception&) {
    fail(400, "invalid_query", "format must be md, csv, text or json");
  }
  ApiResponse r;
  r.status = 200;
  r.content_type = fmt == TableFormat::Csv ? "text/csv" : fmt == TableFormat::Markdown ? "text/markdown" : "text/plain";
  r.body = render_table(rows, fmt);
  return r;
}

ApiResponse TrialService::submit_simulation(const Json& body) {
  for (const auto& [k, _] : body.items())
    if (k != "config" && k != "scenario" && k != "mode" && k != "reps" && k != "seed")
      fail(400, "invalid_field", "unknown field '" + k + "'");
  const DesignConfig config = config_from_json(body.contains("config") ? body.at("config") : Json::object());
  Scenario scenario;
  if (!body.contains("scenario")) fail(400, "missing_field", "scenario is required");
  try {
    const Json& s = body.at("scenario");
    if (s.is_string()) scenario = find_scenario(s.get<std::string>());
    else if (s.is_number_integer()) scenario = find_scenario(std::to_string(s.get<int>()));
    else scenario = scenario_from_json(s);
  } catch (const DomainError& e) {
    fail(400, "invalid_scenario", e.what());
  }
  DesignMode mode = DesignMode::BeBoin;
  if (auto m = opt_string(body, "mode")) {
    try {
      mode = design_mode_from_string(*m);
    } catch (const std::exception&) {
      fail(400, "invalid_field", "mode must be be-boin, tite-boin or bf-boin");
    }
  }
  const int reps = opt_int(body, "reps").value_or(1000);
  if (reps < 1 || reps > 100000) fail(400, "invalid_field", "reps must lie in [1, 100000]");
  std::uint64_t seed = 1;
  if (body.contains("seed")) {
    if (!body.at("seed").is_number_unsigned()) fail(400, "invalid_field", "seed must be a non-negative integer");
    seed = body.at("seed").get<std::uint64_t>();
  }
  validate_scenario(scenario, config.num_doses);

  std::shared_future<Json> fut = std::async(std::launch::async, [=] {
    return to_json(run_oc(config, scenario, mode, reps, seed));
  }).share();
  std::lock_guard lock(jobs_mutex_);
  const std::string job_id = "J" + std::to_string(next_job_++);
  jobs_[job_id] = Job{fut};
  return json_response(202, Json{{"job_id", job_id}, {"status", "pending"}});
}

ApiResponse TrialService::get_simulation(const std::string& job_id) {
  std::shared_future<Json> fut;
  {
    std::lock_guard lock(jobs_mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) fail(404, "unknown_job", "no simulation job '" + job_id + "'");
    fut = it->second.result;
  }
  if (fut.wait_for(std::chrono::seconds(0)) != std::future_status::ready)
    return json_response(202, Json{{"job_id", job_id}, {"status", "pending"}});
  try {
    return json_response(200, Json{{"job_id", job_id}, {"status", "done"}, {"result", fut.get()}});
  } catch (const std::exception& e) {
    fail(422, "simulation_failed", e.what());
  }
}

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(TrialService& service) : impl_(std::make_unique<Impl>()) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query[k] = v;
    r.body = req.body;
    if (req.has_header("If-Match")) {
      std::string tag = req.get_header_value("If-Match");
      tag.erase(std::remove(tag.begin(), tag.end(), '"'), tag.end());
      try {
        r.if_match = std::stoll(tag);
      } catch (const std::exception&) {
        res.status = 400;
        res.set_content(R"({"error": {"code": "invalid_header", "message": "If-Match must be a version number"}})",
                        "application/json");
        return;
      }
    }
    const ApiResponse out = service.handle(r);
    res.status = out.status;
    if (out.version) res.set_header("ETag", "\"" + std::to_string(*out.version) + "\"");
    res.set_content(out.body, out.content_type);
  };
  auto& srv = impl_->server;
  srv.Get(".*", forward);
  srv.Post(".*", forward);
  srv.Put(".*", forward);
  srv.Patch(".*", forward);
  srv.Delete(".*", forward);
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

int serve(TrialService& service, const std::string& host, int port) {
  HttpServer server(service);
  const int bound = server.bind(host, port);
  if (bound < 0) {
    std::cerr << "error[bind]: cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  std::cerr << "listening on " << host << ":" << bound << "\n";
  return server.listen() ? 0 : 1;
}

}  // namespace beboin
