#include "beboin/document.hpp"

#include <algorithm>
#include <set>

namespace beboin {

namespace {

std::string tox_to_string(ToxStatus s) {
  switch (s) {
    case ToxStatus::Pending: return "pending";
    case ToxStatus::Dlt: return "dlt";
    case ToxStatus::NoDlt: return "no_dlt";
  }
  return "unknown";
}

std::string response_to_string(ResponseStatus s) {
  switch (s) {
    case ResponseStatus::Pending: return "pending";
    case ResponseStatus::Response: return "response";
    case ResponseStatus::NoResponse: return "no_response";
  }
  return "unknown";
}

Json optional_int(const std::optional<int>& v) { return v ? Json(*v) : Json(nullptr); }

const Json& require(const Json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key))
    throw DomainError(std::string("document: missing field '") + key + "'");
  return doc.at(key);
}

double num(const Json& doc, const char* key) {
  const Json& v = require(doc, key);
  if (!v.is_number()) throw DomainError(std::string("document: field '") + key + "' must be a number");
  return v.get<double>();
}

int integer(const Json& doc, const char* key) {
  const Json& v = require(doc, key);
  if (!v.is_number_integer())
    throw DomainError(std::string("document: field '") + key + "' must be an integer");
  return v.get<int>();
}

std::string str(const Json& doc, const char* key) {
  const Json& v = require(doc, key);
  if (!v.is_string()) throw DomainError(std::string("document: field '") + key + "' must be a string");
  return v.get<std::string>();
}

bool boolean(const Json& doc, const char* key) {
  const Json& v = require(doc, key);
  if (!v.is_boolean()) throw DomainError(std::string("document: field '") + key + "' must be a boolean");
  return v.get<bool>();
}

// Reads config fields, collecting type problems instead of stopping at the first.
class ConfigReader {
 public:
  explicit ConfigReader(const Json& doc) : doc_(doc) {}

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key) || doc_.at(key).is_null()) return;
    const Json& v = doc_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return issue(key, "must be a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return issue(key, "must be an integer");
      out = v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return issue(key, "must be a number");
      out = v.get<T>();
    }
  }

  template <class T>
  void read_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!doc_.contains(key) || doc_.at(key).is_null()) return;
    T value{};
    const auto before = issues_.size();
    read(key, value);
    if (issues_.size() == before) out = value;
  }

  void read_array(const char* key, std::array<double, 4>& out) {
    seen_.insert(key);
    if (!doc_.contains(key) || doc_.at(key).is_null()) return;
    const Json& v = doc_.at(key);
    if (!v.is_array() || v.size() != 4) return issue(key, "must be an array of 4 numbers");
    for (std::size_t i = 0; i < 4; ++i) {
      if (!v[i].is_number()) return issue(key, "must be an array of 4 numbers");
      out[i] = v[i].get<double>();
    }
  }

  void read_strategy(const char* key, BackfillStrategy& out) {
    seen_.insert(key);
    if (!doc_.contains(key) || doc_.at(key).is_null()) return;
    const Json& v = doc_.at(key);
    try {
      if (!v.is_string()) throw DomainError("");
      out = backfill_strategy_from_string(v.get<std::string>());
    } catch (const std::exception&) {
      issue(key, "must be \"highest_eligible\" or \"randomize_eligible\"");
    }
  }

  void read_rules(const char* key, EngineRules& out) {
    seen_.insert(key);
    if (!doc_.contains(key) || doc_.at(key).is_null()) return;
    const Json& v = doc_.at(key);
    if (!v.is_object()) return issue(key, "must be an object");
    ConfigReader sub(v);
    sub.read("backfill", out.backfill);
    sub.read("suspension", out.suspension);
    sub.read("stagger_de", out.stagger_de);
    sub.read("observed_only", out.observed_only);
    sub.finish_unknown();
    for (auto& i : sub.issues_) issues_.push_back({std::string(key) + "." + i.field, i.message});
  }

  void finish_unknown() {
    for (const auto& [k, _] : doc_.items())
      if (!seen_.count(k)) issue(k, "unknown field");
  }

  std::vector<ConfigIssue> issues_;

 private:
  void issue(const std::string& key, const std::string& message) { issues_.push_back({key, message}); }

  const Json& doc_;
  std::set<std::string> seen_;
};

void check_state_field(bool ok, const char* field) {
  if (!ok)
    throw DomainError(std::string("document: field '") + field +
                      "' does not match the state rebuilt from the event log");
}

}  // namespace

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DomainError(std::string("malformed JSON: ") + e.what());
  }
}

Json to_json(const DesignConfig& c) {
  Json j;
  j["target_dlt_rate"] = c.target_dlt_rate;
  j["phi1_factor"] = c.phi1_factor;
  j["phi2_factor"] = c.phi2_factor;
  j["num_doses"] = c.num_doses;
  j["cohort_size"] = c.cohort_size;
  j["max_sample_n"] = optional_int(c.max_sample_n);
  j["backfill_cap"] = c.backfill_cap;
  j["dlt_window"] = c.dlt_window;
  j["suspend_observed_fraction"] = c.suspend_observed_fraction;
  j["suspend_min_followup"] = c.suspend_min_followup;
  j["elimination_cutoff"] = c.elimination_cutoff;
  j["elimination_prior_a"] = c.elimination_prior_a;
  j["elimination_prior_b"] = c.elimination_prior_b;
  j["backfill_strategy"] = to_string(c.backfill_strategy);
  j["start_dose"] = c.start_dose;
  j["stage2_per_arm"] = c.stage2_per_arm;
  j["utility_scores"] = c.utility_scores;
  j["utility_prior"] = c.utility_prior;
  j["efficacy_assess_time"] = c.efficacy_assess_time ? Json(*c.efficacy_assess_time) : Json(nullptr);
  j["obd_pool_stages"] = c.obd_pool_stages;
  j["rules"] = Json{{"backfill", c.rules.backfill},
                    {"suspension", c.rules.suspension},
                    {"stagger_de", c.rules.stagger_de},
                    {"observed_only", c.rules.observed_only}};
  return j;
}

DesignConfig config_from_json(const Json& doc) {
  if (!doc.is_object()) throw ConfigError(std::vector<ConfigIssue>{{"config", "must be an object"}});
  DesignConfig c;
  ConfigReader r(doc);
  r.read("target_dlt_rate", c.target_dlt_rate);
  r.read("phi1_factor", c.phi1_factor);
  r.read("phi2_factor", c.phi2_factor);
  r.read("num_doses", c.num_doses);
  r.read("cohort_size", c.cohort_size);
  r.read_optional("max_sample_n", c.max_sample_n);
  r.read("backfill_cap", c.backfill_cap);
  r.read("dlt_window", c.dlt_window);
  r.read("suspend_observed_fraction", c.suspend_observed_fraction);
  r.read("suspend_min_followup", c.suspend_min_followup);
  r.read("elimination_cutoff", c.elimination_cutoff);
  r.read("elimination_prior_a", c.elimination_prior_a);
  r.read("elimination_prior_b", c.elimination_prior_b);
  r.read_strategy("backfill_strategy", c.backfill_strategy);
  r.read("start_dose", c.start_dose);
  r.read("stage2_per_arm", c.stage2_per_arm);
  r.read_array("utility_scores", c.utility_scores);
  r.read_array("utility_prior", c.utility_prior);
  r.read_optional("efficacy_assess_time", c.efficacy_assess_time);
  r.read("obd_pool_stages", c.obd_pool_stages);
  r.read_rules("rules", c.rules);
  r.finish_unknown();
  auto issues = std::move(r.issues_);
  // Fields that failed to parse kept their defaults, so only the others are re-checked.
  for (auto& issue : validate_config(c).issues) {
    const bool seen = std::any_of(issues.begin(), issues.end(),
                                  [&](const ConfigIssue& i) { return i.field == issue.field; });
    if (!seen) issues.push_back(std::move(issue));
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return c;
}

Json to_json(const PatientRecord& p) {
  Json j;
  j["id"] = p.id;
  j["dose"] = p.dose;
  j["origin"] = to_string(p.origin);
  j["enroll_time"] = p.enroll_time;
  j["tox_status"] = tox_to_string(p.tox);
  j["time_to_dlt"] = p.tox == ToxStatus::Dlt ? Json(p.time_to_dlt) : Json(nullptr);
  j["response_status"] = response_to_string(p.response);
  j["response_time"] = p.response == ResponseStatus::Pending ? Json(nullptr) : Json(p.response_time);
  return j;
}

Json to_json(const Decision& d) {
  Json j;
  j["verdict"] = to_string(d.verdict);
  j["from_dose"] = d.from_dose;
  j["next_dose"] = d.next_dose;
  j["eliminated_from"] = d.eliminated_from;
  j["reason"] = to_string(d.reason);
  Json trace = Json::array();
  for (const auto& step : d.trace) {
    Json values = Json::array();
    for (const auto& v : step.values) values.push_back(Json{{"name", v.name}, {"value", v.value}});
    trace.push_back(Json{{"rule", step.rule}, {"outcome", step.outcome}, {"values", values}});
  }
  j["trace"] = trace;
  return j;
}

Decision decision_from_json(const Json& doc) {
  Decision d;
  d.verdict = verdict_from_string(str(doc, "verdict"));
  d.from_dose = integer(doc, "from_dose");
  d.next_dose = integer(doc, "next_dose");
  d.eliminated_from = doc.contains("eliminated_from") ? integer(doc, "eliminated_from") : 0;
  d.reason = doc.contains("reason") ? suspend_reason_from_string(str(doc, "reason")) : SuspendReason::None;
  if (doc.contains("trace")) {
    const Json& trace = doc.at("trace");
    if (!trace.is_array()) throw DomainError("document: 'trace' must be an array");
    for (const auto& s : trace) {
      TraceStep step;
      step.rule = str(s, "rule");
      step.outcome = str(s, "outcome");
      const Json& values = require(s, "values");
      if (!values.is_array()) throw DomainError("document: trace 'values' must be an array");
      for (const auto& v : values) step.values.push_back({str(v, "name"), num(v, "value")});
      d.trace.push_back(std::move(step));
    }
  }
  return d;
}

Json to_json(const TrialEvent& event) {
  return std::visit(
      [](const auto& e) -> Json {
        using E = std::decay_t<decltype(e)>;
        Json j;
        if constexpr (std::is_same_v<E, EnrollEvent>) {
          j["type"] = "enroll";
          j["time"] = e.time;
          j["patient_id"] = e.patient_id;
          j["dose"] = e.dose;
          j["origin"] = to_string(e.origin);
        } else if constexpr (std::is_same_v<E, ToxOutcomeEvent>) {
          j["type"] = "tox_outcome";
          j["time"] = e.time;
          j["patient_id"] = e.patient_id;
          j["dlt"] = e.dlt;
        } else if constexpr (std::is_same_v<E, ResponseEvent>) {
          j["type"] = "response";
          j["time"] = e.time;
          j["patient_id"] = e.patient_id;
          j["response"] = e.response;
        } else if constexpr (std::is_same_v<E, DecisionEvent>) {
          j["type"] = "decision";
          j["time"] = e.time;
          j["decision"] = to_json(e.decision);
        } else if constexpr (std::is_same_v<E, TurnedAwayEvent>) {
          j["type"] = "turned_away";
          j["time"] = e.time;
        } else {
          j["type"] = "clock";
          j["time"] = e.time;
        }
        return j;
      },
      event);
}

TrialEvent event_from_json(const Json& doc) {
  const std::string type = str(doc, "type");
  const double time = num(doc, "time");
  if (type == "enroll")
    return EnrollEvent{str(doc, "patient_id"), integer(doc, "dose"), origin_from_string(str(doc, "origin")), time};
  if (type == "tox_outcome") return ToxOutcomeEvent{str(doc, "patient_id"), boolean(doc, "dlt"), time};
  if (type == "response") return ResponseEvent{str(doc, "patient_id"), boolean(doc, "response"), time};
  if (type == "decision") return DecisionEvent{decision_from_json(require(doc, "decision")), time};
  if (type == "turned_away") return TurnedAwayEvent{time};
  if (type == "clock") return ClockEvent{time};
  throw DomainError("document: unknown event type '" + type + "'");
}

Json to_json(const DoseSummary& s) {
  return Json{{"dose", s.dose},         {"n", s.n},
              {"y_obs", s.y_obs},       {"m_pending", s.m_pending},
              {"tf", s.tf},             {"mf", s.mf},
              {"responses", s.responses}, {"backfilled", s.backfilled},
              {"eliminated", s.eliminated}};
}

Json to_json(const ToxEstimate& e) {
  return Json{{"p_hat", e.p_hat}, {"p_tilde", e.p_tilde}, {"y_obs", e.y_obs},
              {"n", e.n},         {"m_pending", e.m_pending}, {"tf", e.tf}};
}

namespace {

Json criterion_json(const CriterionResult& c) {
  Json values = Json::object();
  for (const auto& v : c.values) values[v.name] = v.value;
  return Json{{"pass", c.pass}, {"values", values}};
}

}  // namespace

Json to_json(const BackfillEligibility& e) {
  return Json{{"dose", e.dose},
              {"eligible", e.eligible},
              {"safety", criterion_json(e.safety)},
              {"efficacy", criterion_json(e.efficacy)},
              {"cap", criterion_json(e.cap)}};
}

Json to_json(const ConflictReport& r) {
  Json j;
  j["conflict"] = r.conflict;
  j["b_star"] = optional_int(r.b_star);
  if (r.conflict) {
    j["backfill_class"] = to_string(r.backfill_class);
    j["current_class"] = to_string(r.current_class);
  }
  return j;
}

Json to_json(const IsotonicFit& fit) {
  auto opt = [](const std::vector<std::optional<double>>& v) {
    Json a = Json::array();
    for (const auto& x : v) a.push_back(x ? Json(*x) : Json(nullptr));
    return a;
  };
  return Json{{"raw_rates", opt(fit.raw_rates)}, {"fitted", opt(fit.fitted)}, {"weights", fit.weights}};
}

Json to_json(const UtilityPosterior& u) {
  return Json{{"counts", u.counts},
              {"eta", u.eta},
              {"posterior_means", u.posterior_means},
              {"utility", u.utility}};
}

Json state_to_json(const TrialState& state) {
  Json j;
  j["schema_version"] = kStateSchemaVersion;
  j["config"] = to_json(state.config);
  Json patients = Json::array();
  for (const auto& p : state.patients) patients.push_back(to_json(p));
  j["patients"] = patients;
  j["current_dose"] = state.current_dose;
  j["phase"] = to_string(state.phase);
  j["eliminated_doses"] = state.eliminated_doses();
  j["clock_months"] = state.clock;
  j["mtd"] = optional_int(state.mtd);
  j["obd"] = optional_int(state.obd);
  j["cohort_enrolled"] = state.cohort_enrolled;
  j["suspension"] = to_string(state.suspension);
  Json events = Json::array();
  for (const auto& e : state.events) events.push_back(to_json(e));
  j["events"] = events;
  return j;
}

TrialState state_from_json(const Json& doc) {
  if (!doc.is_object()) throw DomainError("document: trial state must be an object");
  const int version = integer(doc, "schema_version");
  if (version != kStateSchemaVersion)
    throw DomainError("document: unsupported schema_version " + std::to_string(version));
  const DesignConfig config = config_from_json(require(doc, "config"));
  const Json& events = require(doc, "events");
  if (!events.is_array()) throw DomainError("document: 'events' must be an array");
  std::vector<TrialEvent> log;
  for (const auto& e : events) log.push_back(event_from_json(e));
  TrialState state = replay(config, log);

  // The stored fields are derived data; a mismatch means the document was edited.
  check_state_field(require(doc, "config") == to_json(state.config), "config");
  Json patients = Json::array();
  for (const auto& p : state.patients) patients.push_back(to_json(p));
  check_state_field(require(doc, "patients") == patients, "patients");
  check_state_field(integer(doc, "current_dose") == state.current_dose, "current_dose");
  check_state_field(str(doc, "phase") == to_string(state.phase), "phase");
  check_state_field(require(doc, "eliminated_doses") == Json(state.eliminated_doses()), "eliminated_doses");
  check_state_field(num(doc, "clock_months") == state.clock, "clock_months");
  check_state_field(require(doc, "mtd") == optional_int(state.mtd), "mtd");
  check_state_field(require(doc, "obd") == optional_int(state.obd), "obd");
  if (doc.contains("cohort_enrolled"))
    check_state_field(integer(doc, "cohort_enrolled") == state.cohort_enrolled, "cohort_enrolled");
  if (doc.contains("suspension"))
    check_state_field(str(doc, "suspension") == to_string(state.suspension), "suspension");
  return state;
}

std::string dump_state(const TrialState& state) { return state_to_json(state).dump(2) + "\n"; }

TrialState parse_state(const std::string& text) { return state_from_json(parse_json(text)); }

Json to_json(const Scenario& s) {
  Json j;
  j["schema_version"] = kScenarioSchemaVersion;
  j["name"] = s.name;
  j["p_tox"] = s.p_tox;
  j["p_eff"] = s.p_eff;
  j["true_mtd"] = s.true_mtd;
  j["true_obd"] = s.true_obd;
  j["tte_model"] = to_string(s.tte_model);
  j["late_fraction"] = s.late_fraction;
  j["dlt_window"] = s.dlt_window;
  j["accrual"] = Json{{"kind", s.accrual.kind == Accrual::Kind::Poisson ? "poisson" : "deterministic"},
                      {"rate_per_month", s.accrual.rate}};
  return j;
}

Scenario scenario_from_json(const Json& doc) {
  if (!doc.is_object()) throw DomainError("scenario: document must be an object");
  if (doc.contains("schema_version") && integer(doc, "schema_version") != kScenarioSchemaVersion)
    throw DomainError("scenario: unsupported schema_version");
  Scenario s;
  s.name = doc.contains("name") ? str(doc, "name") : "custom";
  auto probs = [&](const char* key) {
    const Json& v = require(doc, key);
    if (!v.is_array()) throw DomainError(std::string("scenario: '") + key + "' must be an array");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw DomainError(std::string("scenario: '") + key + "' must hold numbers");
      out.push_back(x.get<double>());
    }
    return out;
  };
  s.p_tox = probs("p_tox");
  s.p_eff = probs("p_eff");
  s.true_mtd = integer(doc, "true_mtd");
  s.true_obd = integer(doc, "true_obd");
  if (doc.contains("tte_model")) s.tte_model = tte_model_from_string(str(doc, "tte_model"));
  if (doc.contains("late_fraction")) s.late_fraction = num(doc, "late_fraction");
  if (doc.contains("dlt_window")) s.dlt_window = num(doc, "dlt_window");
  if (doc.contains("accrual")) {
    const Json& a = doc.at("accrual");
    const std::string kind = str(a, "kind");
    if (kind == "poisson") s.accrual.kind = Accrual::Kind::Poisson;
    else if (kind == "deterministic") s.accrual.kind = Accrual::Kind::Deterministic;
    else throw DomainError("scenario: accrual kind must be 'poisson' or 'deterministic'");
    s.accrual.rate = num(a, "rate_per_month");
  }
  validate_scenario(s, static_cast<int>(s.p_tox.size()));
  return s;
}

Json to_json(const OperatingCharacteristics& oc) {
  Json j;
  j["scenario"] = oc.scenario;
  j["mode"] = to_string(oc.mode);
  j["replicates"] = oc.replicates;
  j["seed"] = oc.seed;
  j["correct_mtd_pct"] = oc.correct_mtd_pct;
  j["correct_obd_pct"] = oc.correct_obd_pct;
  j["mtd_sel_pct"] = oc.mtd_sel_pct;
  j["mtd_none_pct"] = oc.mtd_none_pct;
  j["obd_sel_pct"] = oc.obd_sel_pct;
  j["obd_none_pct"] = oc.obd_none_pct;
  j["patients_per_dose"] = oc.patients_per_dose;
  j["stage_one_per_dose"] = oc.stage_one_per_dose;
  j["patients_at_mtd"] = oc.patients_at_mtd;
  j["patients_at_obd"] = oc.patients_at_obd;
  j["patients_overdosed"] = oc.patients_overdosed;
  j["total_patients"] = oc.total_patients;
  j["backfill_patients"] = oc.backfill_patients;
  j["turned_away"] = oc.turned_away;
  j["stage_one_duration"] = oc.stage_one_duration;
  j["duration_months"] = oc.duration_months;
  j["terminated_pct"] = oc.terminated_pct;
  return j;
}

Json table_to_json(const std::vector<TableRow>& rows) {
  const auto threshold = [](const Threshold& t) {
    return Json{{"op", t.op == Threshold::Op::Less ? "<" : ">="}, {"value", t.value}};
  };
  const auto condition = [&](const Condition& c) -> Json {
    if (c.kind == Condition::Kind::No) return "no";
    if (c.kind == Condition::Kind::Yes) return "yes";
    Json j = Json::object();
    if (c.mf) j["mf"] = threshold(*c.mf);
    if (c.tf) j["tf"] = threshold(*c.tf);
    return j;
  };
  Json arr = Json::array();
  for (const auto& r : rows)
    arr.push_back(Json{{"n", r.n},
                       {"y", Json::array({r.y_lo, r.y_hi})},
                       {"m", Json::array({r.m_lo, r.m_hi})},
                       {"suspend", condition(r.suspend)},
                       {"escalate", condition(r.escalate)},
                       {"stay", condition(r.stay)},
                       {"deescalate", condition(r.deescalate)},
                       {"eliminate", r.eliminate}});
  return arr;
}

}  // namespace beboin
