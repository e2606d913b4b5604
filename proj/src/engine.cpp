#include "beboin/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace beboin {

namespace {

int class_rank(DecisionClass cls) {
  switch (cls) {
    case DecisionClass::EscalateClass: return 0;
    case DecisionClass::StayClass: return 1;
    case DecisionClass::DeEscalateClass:
    case DecisionClass::EliminateClass: return 2;
  }
  return 0;
}

TraceStep dose_data_step(const std::string& rule, const DoseSummary& s) {
  return {rule,
          "dose " + std::to_string(s.dose),
          {{"n", static_cast<double>(s.n)},
           {"y_obs", static_cast<double>(s.y_obs)},
           {"m_pending", static_cast<double>(s.m_pending)},
           {"tf", s.tf},
           {"mf", s.mf}}};
}

bool can_escalate(const TrialState& state, int c) {
  return c < state.config.num_doses && !state.is_eliminated(c + 1);
}

Decision make_decision(Verdict verdict, int from, int next, std::vector<TraceStep> trace) {
  Decision d;
  d.verdict = verdict;
  d.from_dose = from;
  d.next_dose = next;
  d.trace = std::move(trace);
  return d;
}

// Total follow-up at which the imputed rate falls to lambda_e; escalation
// needs tf at or above it.
double escalation_tf_cutoff(const DoseSummary& sc, const ToxEstimate& est, const Boundaries& bounds) {
  return sc.m_pending - (sc.n * bounds.lambda_e - sc.y_obs) * (1.0 - est.p_tilde) / est.p_tilde;
}

// Escalation verdict at c, subject to rule 2 and the top-dose boundary.
Decision escalate_or_hold(const TrialState& state, const DoseSummary& sc,
                          std::vector<TraceStep> trace) {
  const auto& cfg = state.config;
  const int c = sc.dose;
  if (!can_escalate(state, c)) {
    trace.push_back({"boundary", "no admissible higher dose; stay", {}});
    return make_decision(Verdict::Stay, c, c, std::move(trace));
  }
  if (cfg.rules.suspension && sc.m_pending > 0 && sc.mf < cfg.suspend_min_followup) {
    trace.push_back({"rule2",
                     "suspend: minimum follow-up below cutoff",
                     {{"mf", sc.mf}, {"cutoff", cfg.suspend_min_followup}}});
    Decision d = make_decision(Verdict::Suspend, c, c, std::move(trace));
    d.reason = SuspendReason::Rule2InsufficientFollowup;
    return d;
  }
  if (cfg.rules.suspension && sc.m_pending > 0)
    trace.push_back({"rule2",
                     "minimum follow-up at or above cutoff",
                     {{"mf", sc.mf}, {"cutoff", cfg.suspend_min_followup}}});
  return make_decision(Verdict::Escalate, c, c + 1, std::move(trace));
}

// Rule 1: hold escalation while too few patients at c have an observed outcome.
std::optional<Decision> rule1_hold(const DesignConfig& cfg, const DoseSummary& sc,
                                   std::vector<TraceStep>& trace) {
  const double observed_fraction = static_cast<double>(sc.n - sc.m_pending) / sc.n;
  if (!cfg.rules.suspension || observed_fraction >= cfg.suspend_observed_fraction) return std::nullopt;
  trace.push_back({"rule1",
                   "suspend: too few patients with observed DLT outcome",
                   {{"observed_fraction", observed_fraction},
                    {"cutoff", cfg.suspend_observed_fraction}}});
  Decision d = make_decision(Verdict::Suspend, sc.dose, sc.dose, std::move(trace));
  d.reason = SuspendReason::Rule1InsufficientObserved;
  return d;
}

Decision de_escalate_to(int c, int target, std::vector<TraceStep> trace) {
  if (c == 1) {
    trace.push_back({"boundary", "lowest dose; stay", {}});
    return make_decision(Verdict::Stay, c, c, std::move(trace));
  }
  return make_decision(Verdict::DeEscalate, c, std::max(1, target), std::move(trace));
}

void require_stage_one(const TrialState& state, const char* what) {
  if (!state.stage_one())
    throw StateError(std::string(what) + ": trial is not in stage one (phase " +
                     to_string(state.phase) + ")");
}

int patients_at(const TrialState& state, int dose, double at_time) {
  return static_cast<int>(std::count_if(state.patients.begin(), state.patients.end(),
                                        [&](const PatientRecord& p) {
                                          return p.dose == dose &&
                                                 p.enroll_time <= at_time + kTimeEps;
                                        }));
}

int responses_at_or_below(const TrialState& state, int dose, double at_time) {
  return static_cast<int>(std::count_if(state.patients.begin(), state.patients.end(),
                                        [&](const PatientRecord& p) {
                                          return p.dose <= dose && response_observed(p, at_time);
                                        }));
}

}  // namespace

std::string to_string(DecisionClass cls) {
  switch (cls) {
    case DecisionClass::EscalateClass: return "escalate";
    case DecisionClass::StayClass: return "stay";
    case DecisionClass::DeEscalateClass: return "de_escalate";
    case DecisionClass::EliminateClass: return "eliminate";
  }
  return "unknown";
}

DecisionClass decision_class(const DoseSummary& summary, const Boundaries& bounds,
                             const DesignConfig& config) {
  if (summary.n < 1) throw DomainError("decision_class: dose has no patients");
  if (eliminate_dose(summary.y_obs, summary.n, config)) return DecisionClass::EliminateClass;
  if (static_cast<double>(summary.y_obs) / summary.n > bounds.lambda_d)
    return DecisionClass::DeEscalateClass;
  if (imputed_dlt_rate(summary, config.target_dlt_rate).p_hat <= bounds.lambda_e)
    return DecisionClass::EscalateClass;
  return DecisionClass::StayClass;
}

std::vector<BackfillEligibility> backfill_eligibility(const TrialState& state, double at_time) {
  require_stage_one(state, "backfill_eligibility");
  const auto& cfg = state.config;
  const auto bounds = boin_boundaries(cfg);
  const double phi = cfg.target_dlt_rate;
  const auto summaries = summarize_all(state, at_time);

  std::vector<BackfillEligibility> out;
  for (int b = 1; b < state.current_dose; ++b) {
    const auto& sb = summaries[static_cast<std::size_t>(b - 1)];
    BackfillEligibility e;
    e.dose = b;

    if (sb.eliminated) {
      e.safety.values = {{"eliminated", 1.0}};
    } else if (sb.n > 0) {
      const double p_hat = imputed_dlt_rate(sb, phi).p_hat;
      e.safety.values = {{"p_hat", p_hat}, {"lambda_d", bounds.lambda_d}};
      e.safety.pass = p_hat <= bounds.lambda_d;
      if (!e.safety.pass) {
        const double q_hat =
            pooled_rate(std::span(summaries).subspan(static_cast<std::size_t>(b - 1), 2), phi);
        e.safety.values.push_back({"q_hat_pooled_next", q_hat});
        e.safety.pass = q_hat <= bounds.lambda_d;
      }
    } else {
      e.safety.values = {{"n", 0.0}};
    }

    const int responses = responses_at_or_below(state, b, at_time);
    e.efficacy.values = {{"responses_at_or_below", static_cast<double>(responses)}};
    e.efficacy.pass = responses >= 1;

    const int n_b = patients_at(state, b, at_time);
    e.cap.values = {{"n_b", static_cast<double>(n_b)},
                    {"n_cap", static_cast<double>(cfg.backfill_cap)}};
    e.cap.pass = n_b + 1 <= cfg.backfill_cap;

    e.eligible = e.safety.pass && e.efficacy.pass && e.cap.pass;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<int> eligible_doses(const std::vector<BackfillEligibility>& report) {
  std::vector<int> out;
  for (const auto& e : report)
    if (e.eligible) out.push_back(e.dose);
  return out;
}

int allocate_backfill(const std::vector<int>& eligible, BackfillStrategy strategy, Rng& rng) {
  if (eligible.empty()) throw DomainError("allocate_backfill: no eligible dose");
  if (strategy == BackfillStrategy::HighestEligible)
    return *std::max_element(eligible.begin(), eligible.end());
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  return eligible[pick(rng)];
}

ConflictReport detect_conflict(const TrialState& state, double at_time) {
  require_stage_one(state, "detect_conflict");
  const auto& cfg = state.config;
  const auto bounds = boin_boundaries(cfg);
  const int c = state.current_dose;
  ConflictReport report;
  const auto sc = summarize_dose(state, c, at_time);
  if (sc.n == 0) return report;
  report.current_class = decision_class(sc, bounds, cfg);
  const int c_rank = class_rank(report.current_class);
  for (int b = 1; b < c; ++b) {
    const auto sb = summarize_dose(state, b, at_time);
    if (sb.backfilled == 0 || sb.n == 0) continue;
    const auto b_class = decision_class(sb, bounds, cfg);
    const int b_rank = class_rank(b_class);
    if (b_rank > c_rank || (b_rank == 2 && c_rank == 2)) {
      report.conflict = true;
      report.b_star = b;
      report.backfill_class = b_class;
      return report;
    }
  }
  return report;
}

Decision resolve_conflict(const TrialState& state, int b_star, int c, double at_time) {
  const auto& cfg = state.config;
  if (b_star < 1 || b_star >= c || c > cfg.num_doses)
    throw DomainError("resolve_conflict: require 1 <= b* < c <= J");
  const auto bounds = boin_boundaries(cfg);
  const double phi = cfg.target_dlt_rate;
  const auto summaries = summarize_all(state, at_time);
  auto range = [&](int lo, int hi) {
    return std::span(summaries).subspan(static_cast<std::size_t>(lo - 1),
                                        static_cast<std::size_t>(hi - lo + 1));
  };

  const double q_hat = pooled_rate(range(b_star, c), phi);
  std::vector<TraceStep> trace;
  trace.push_back({"conflict_resolution",
                   "pooled estimate over doses " + std::to_string(b_star) + ".." +
                       std::to_string(c),
                   {{"b_star", static_cast<double>(b_star)},
                    {"c", static_cast<double>(c)},
                    {"q_hat", q_hat},
                    {"lambda_e", bounds.lambda_e},
                    {"lambda_d", bounds.lambda_d}}});
  const auto& sc = summaries[static_cast<std::size_t>(c - 1)];
  if (q_hat <= bounds.lambda_e) {
    trace.push_back({"escalation", "pooled estimate at or below lambda_e", {}});
    if (auto held = rule1_hold(cfg, sc, trace)) return *held;
    return escalate_or_hold(state, sc, std::move(trace));
  }
  if (q_hat <= bounds.lambda_d) {
    trace.push_back({"stay", "pooled estimate within (lambda_e, lambda_d]", {}});
    return make_decision(Verdict::Stay, c, c, std::move(trace));
  }
  for (int k = c - 1; k >= b_star; --k) {
    const double q_k = pooled_rate(range(b_star, k), phi);
    if (q_k <= bounds.lambda_d) {
      trace.push_back({"deescalation",
                       "highest dose with pooled estimate at or below lambda_d",
                       {{"k", static_cast<double>(k)}, {"q_hat_k", q_k}}});
      return make_decision(Verdict::DeEscalate, c, k, std::move(trace));
    }
  }
  trace.push_back({"deescalation",
                   "no dose in [b*, c) passes; move below b*",
                   {{"target", static_cast<double>(b_star - 1)}}});
  return de_escalate_to(c, b_star - 1, std::move(trace));
}

Decision de_decision(const TrialState& state, double at_time) {
  require_stage_one(state, "de_decision");
  const auto& cfg = state.config;
  const auto bounds = boin_boundaries(cfg);
  const int c = state.current_dose;
  const auto sc = summarize_dose(state, c, at_time);
  if (sc.n < 1) throw StateError("de_decision: no patients at the current dose");

  std::vector<TraceStep> trace;
  trace.push_back(dose_data_step("data", sc));

  const double overdose = overdose_probability(sc.y_obs, sc.n, cfg.target_dlt_rate,
                                               cfg.elimination_prior_a, cfg.elimination_prior_b);
  if (eliminate_dose(sc.y_obs, sc.n, cfg)) {
    trace.push_back({"elimination",
                     "posterior overdose probability above cutoff",
                     {{"posterior_overdose", overdose}, {"cutoff", cfg.elimination_cutoff}}});
    Decision d = make_decision(Verdict::Eliminate, c, c - 1, std::move(trace));
    d.eliminated_from = c;
    return d;
  }

  if (cfg.rules.backfill) {
    const auto conflict = detect_conflict(state, at_time);
    if (conflict.conflict) {
      trace.push_back({"conflict",
                       "backfilled dose " + std::to_string(*conflict.b_star) + " (" +
                           to_string(conflict.backfill_class) + ") vs current dose (" +
                           to_string(conflict.current_class) + ")",
                       {{"b_star", static_cast<double>(*conflict.b_star)}}});
      auto resolved = resolve_conflict(state, *conflict.b_star, c, at_time);
      trace.insert(trace.end(), resolved.trace.begin(), resolved.trace.end());
      resolved.trace = std::move(trace);
      return resolved;
    }
  }

  const double observed_rate = static_cast<double>(sc.y_obs) / sc.n;
  if (observed_rate > bounds.lambda_d) {
    trace.push_back({"deescalation",
                     "observed DLT rate above lambda_d",
                     {{"observed_rate", observed_rate}, {"lambda_d", bounds.lambda_d}}});
    return de_escalate_to(c, c - 1, std::move(trace));
  }

  if (auto held = rule1_hold(cfg, sc, trace)) return *held;

  const auto est = imputed_dlt_rate(sc, cfg.target_dlt_rate);
  if (est.p_hat <= bounds.lambda_e) {
    std::vector<TraceValue> values{{"p_hat", est.p_hat}, {"p_tilde", est.p_tilde}, {"lambda_e", bounds.lambda_e}};
    if (sc.m_pending > 0) {
      values.push_back({"tf", sc.tf});
      values.push_back({"tf_threshold", escalation_tf_cutoff(sc, est, bounds)});
    }
    trace.push_back({"escalation", "imputed rate at or below lambda_e", std::move(values)});
    return escalate_or_hold(state, sc, std::move(trace));
  }
  std::vector<TraceValue> values{
      {"p_hat", est.p_hat}, {"p_tilde", est.p_tilde}, {"lambda_e", bounds.lambda_e}, {"lambda_d", bounds.lambda_d}};
  if (sc.m_pending > 0) {
    values.push_back({"tf", sc.tf});
    values.push_back({"tf_threshold", escalation_tf_cutoff(sc, est, bounds)});
  }
  trace.push_back({"stay", "imputed rate above lambda_e, observed rate at or below lambda_d", std::move(values)});
  return make_decision(Verdict::Stay, c, c, std::move(trace));
}

bool de_decision_pending(const TrialState& state) {
  return state.stage_one() && state.cohort_enrolled >= state.config.cohort_size &&
         state.de_enrolled() < state.config.sample_size();
}

bool backfill_open(const TrialState& state, double at_time) {
  if (!state.stage_one() || !state.config.rules.backfill) return false;
  if (state.de_enrolled() < state.config.sample_size()) return true;
  return std::any_of(state.patients.begin(), state.patients.end(), [&](const PatientRecord& p) {
    return p.origin == Origin::DoseEscalation && !tox_resolved(p, at_time, state.config.dlt_window);
  });
}

bool waiting_for_de_windows(const TrialState& state, double at_time) {
  if (!state.config.rules.stagger_de) return false;
  return std::any_of(state.patients.begin(), state.patients.end(), [&](const PatientRecord& p) {
    return p.origin == Origin::DoseEscalation &&
           !tox_resolved(p, at_time, state.config.dlt_window);
  });
}

Assignment route_arrival(const TrialState& state, double arrival_time, Rng& rng) {
  require_stage_one(state, "route_arrival");
  const auto& cfg = state.config;
  const bool de_room = state.de_enrolled() < cfg.sample_size();
  if (state.phase == Phase::StageOneAccruing && de_room &&
      state.cohort_enrolled < cfg.cohort_size)
    return {Assignment::Kind::DoseEscalation, state.current_dose};
  if (backfill_open(state, arrival_time)) {
    const auto eligible = eligible_doses(backfill_eligibility(state, arrival_time));
    if (!eligible.empty())
      return {Assignment::Kind::Backfill, allocate_backfill(eligible, cfg.backfill_strategy, rng)};
  }
  return {Assignment::Kind::TurnedAway, 0};
}

TrialState new_trial(const DesignConfig& config) {
  TrialState state;
  state.config = require_valid(config);
  state.current_dose = state.config.start_dose;
  return state;
}

std::vector<int> stage_two_arms(int mtd) {
  if (mtd <= 1) return {mtd};
  return {mtd, mtd - 1};
}

StageOneSelection select_stage_one(const TrialState& state) {
  const auto& cfg = state.config;
  const auto summaries = summarize_all(state, state.clock);
  StageOneSelection sel;
  sel.lowest_eliminated = state.lowest_eliminated;
  std::vector<int> y, n;
  for (const auto& s : summaries) {
    const int completed = s.n - s.m_pending;
    y.push_back(s.y_obs);
    n.push_back(completed);
    if (eliminate_dose(s.y_obs, completed, cfg) &&
        (sel.lowest_eliminated == 0 || s.dose < sel.lowest_eliminated))
      sel.lowest_eliminated = s.dose;
  }
  if (std::all_of(n.begin(), n.end(), [](int k) { return k == 0; })) return sel;
  sel.fit = isotonic_fit(y, n);
  sel.mtd = select_mtd(sel.fit, cfg.target_dlt_rate, sel.lowest_eliminated);
  return sel;
}

StageTwoSelection select_stage_two(const TrialState& state, int mtd) {
  const auto& cfg = state.config;
  const auto arms = stage_two_arms(mtd);
  auto counts_for = [&](int dose) {
    ArmOutcomes arm;
    arm.dose = dose;
    for (const auto& p : state.patients) {
      if (p.dose != dose) continue;
      if (!cfg.obd_pool_stages && p.origin != Origin::StageTwo) continue;
      if (p.response == ResponseStatus::Pending || p.response_time > state.clock + kTimeEps)
        continue;
      const bool resp = p.response == ResponseStatus::Response;
      const bool tox = dlt_observed(p, state.clock);
      const std::size_t k = resp ? (tox ? 1 : 0) : (tox ? 3 : 2);
      ++arm.counts[k];
    }
    return arm;
  };
  StageTwoSelection sel;
  sel.high = counts_for(arms[0]);
  sel.high_utility = utility_posterior(sel.high.counts, cfg.utility_scores, cfg.utility_prior);
  if (arms.size() > 1) {
    sel.low = counts_for(arms[1]);
    sel.low_utility = utility_posterior(sel.low->counts, cfg.utility_scores, cfg.utility_prior);
  }
  sel.obd = select_obd(sel.high, sel.low, cfg.utility_scores, cfg.utility_prior);
  return sel;
}

std::optional<double> all_resolved_time(const TrialState& state) {
  const auto& cfg = state.config;
  std::optional<double> latest;
  const bool stage_two = state.phase == Phase::StageTwo || state.phase == Phase::Completed;
  for (const auto& p : state.patients) {
    double done;
    if (stage_two) {
      if (p.origin != Origin::StageTwo) continue;
      done = p.enroll_time + std::max(cfg.dlt_window, cfg.efficacy_time());
    } else {
      done = p.tox == ToxStatus::Dlt ? p.enroll_time + p.time_to_dlt : p.enroll_time + cfg.dlt_window;
    }
    latest = latest ? std::max(*latest, done) : done;
  }
  return latest;
}

namespace {

PatientRecord& patient_ref(TrialState& state, const std::string& id) {
  for (auto& p : state.patients)
    if (p.id == id) return p;
  throw StateError("unknown patient id '" + id + "'");
}

int stage_two_count(const TrialState& state, int dose) {
  return static_cast<int>(std::count_if(state.patients.begin(), state.patients.end(),
                                        [&](const PatientRecord& p) {
                                          return p.origin == Origin::StageTwo && p.dose == dose;
                                        }));
}

void apply_enroll(TrialState& state, const EnrollEvent& e) {
  const auto& cfg = state.config;
  if (e.patient_id.empty()) throw StateError("enroll: empty patient id");
  if (state.find_patient(e.patient_id)) throw StateError("enroll: duplicate patient id '" + e.patient_id + "'");
  if (e.dose < 1 || e.dose > cfg.num_doses) throw StateError("enroll: dose out of range");
  if (state.is_eliminated(e.dose)) throw StateError("enroll: dose " + std::to_string(e.dose) + " is eliminated");

  switch (e.origin) {
    case Origin::DoseEscalation:
      if (state.phase != Phase::StageOneAccruing)
        throw StateError("enroll: dose escalation is not accruing (phase " + to_string(state.phase) + ")");
      if (e.dose != state.current_dose) throw StateError("enroll: DE patients must receive the current dose");
      if (state.cohort_enrolled >= cfg.cohort_size) throw StateError("enroll: DE cohort is full; a decision is pending");
      if (state.de_enrolled() >= cfg.sample_size()) throw StateError("enroll: maximum DE sample size reached");
      ++state.cohort_enrolled;
      break;
    case Origin::Backfill: {
      if (!state.stage_one()) throw StateError("enroll: backfill only during stage one");
      if (!cfg.rules.backfill) throw StateError("enroll: backfill disabled for this design");
      if (!backfill_open(state, e.time)) throw StateError("enroll: backfill is closed");
      const auto eligible = eligible_doses(backfill_eligibility(state, e.time));
      if (std::find(eligible.begin(), eligible.end(), e.dose) == eligible.end())
        throw StateError("enroll: dose " + std::to_string(e.dose) + " is not backfill-eligible");
      break;
    }
    case Origin::StageTwo: {
      if (state.phase != Phase::StageTwo || !state.mtd) throw StateError("enroll: trial is not in stage two");
      const auto arms = stage_two_arms(*state.mtd);
      if (std::find(arms.begin(), arms.end(), e.dose) == arms.end())
        throw StateError("enroll: dose " + std::to_string(e.dose) + " is not a stage-two arm");
      if (stage_two_count(state, e.dose) >= cfg.stage2_per_arm) throw StateError("enroll: stage-two arm is full");
      break;
    }
  }
  PatientRecord p;
  p.id = e.patient_id;
  p.dose = e.dose;
  p.origin = e.origin;
  p.enroll_time = e.time;
  state.patients.push_back(std::move(p));
}

void apply_tox(TrialState& state, const ToxOutcomeEvent& e) {
  auto& p = patient_ref(state, e.patient_id);
  const double window = state.config.dlt_window;
  if (p.tox != ToxStatus::Pending) throw StateError("tox outcome: already recorded for '" + p.id + "'");
  const double elapsed = e.time - p.enroll_time;
  if (e.dlt) {
    if (!(elapsed > 0.0 && elapsed <= window + kTimeEps))
      throw StateError("tox outcome: DLT time must fall within (0, window] after enrollment");
    p.tox = ToxStatus::Dlt;
    p.time_to_dlt = std::min(elapsed, window);
  } else {
    if (elapsed < window - kTimeEps)
      throw StateError("tox outcome: no-DLT requires a completed assessment window");
    p.tox = ToxStatus::NoDlt;
  }
}

void apply_response(TrialState& state, const ResponseEvent& e) {
  auto& p = patient_ref(state, e.patient_id);
  if (p.response != ResponseStatus::Pending) throw StateError("response: already recorded for '" + p.id + "'");
  if (e.time < p.enroll_time - kTimeEps) throw StateError("response: recorded before enrollment");
  p.response = e.response ? ResponseStatus::Response : ResponseStatus::NoResponse;
  p.response_time = e.time;
}

void apply_decision(TrialState& state, const DecisionEvent& e) {
  const auto& cfg = state.config;
  const auto& d = e.decision;
  if (!state.stage_one()) throw StateError("decision: trial is not in stage one");
  if (!de_decision_pending(state)) throw StateError("decision: the current DE cohort is still open");
  if (d.from_dose != state.current_dose) throw StateError("decision: issued for a different dose");

  if (d.verdict == Verdict::Suspend) {
    if (d.reason == SuspendReason::None) throw StateError("decision: suspension without a reason");
    state.phase = Phase::StageOneSuspended;
    state.suspension = d.reason;
    return;
  }
  if (d.verdict == Verdict::Eliminate) {
    if (d.eliminated_from < 1 || d.eliminated_from > cfg.num_doses)
      throw StateError("decision: elimination dose out of range");
    if (state.lowest_eliminated == 0 || d.eliminated_from < state.lowest_eliminated)
      state.lowest_eliminated = d.eliminated_from;
    if (d.next_dose == 0) {
      state.phase = Phase::TerminatedAllDosesToxic;
      state.suspension = SuspendReason::None;
      return;
    }
  }
  if (d.next_dose < 1 || d.next_dose > cfg.num_doses) throw StateError("decision: next dose out of range");
  if (state.is_eliminated(d.next_dose)) throw StateError("decision: next dose is eliminated");
  if (d.verdict == Verdict::Escalate && d.next_dose != d.from_dose + 1)
    throw StateError("decision: escalation must move up one level");
  if (d.verdict == Verdict::Stay && d.next_dose != d.from_dose)
    throw StateError("decision: stay must keep the current dose");
  if ((d.verdict == Verdict::DeEscalate || d.verdict == Verdict::Eliminate) && d.next_dose >= d.from_dose)
    throw StateError("decision: de-escalation must move down");
  state.current_dose = d.next_dose;
  state.cohort_enrolled = 0;
  state.phase = Phase::StageOneAccruing;
  state.suspension = SuspendReason::None;
}

bool stage_one_windows_complete(const TrialState& state) {
  const double window = state.config.dlt_window;
  return std::all_of(state.patients.begin(), state.patients.end(), [&](const PatientRecord& p) {
    return tox_resolved(p, state.clock, window);
  });
}

void recompute_phase(TrialState& state) {
  const auto& cfg = state.config;
  if (state.stage_one()) {
    if (state.de_enrolled() < cfg.sample_size() || !stage_one_windows_complete(state)) return;
    const auto sel = select_stage_one(state);
    state.lowest_eliminated = sel.lowest_eliminated;
    state.suspension = SuspendReason::None;
    if (!sel.mtd) {
      state.phase = Phase::TerminatedAllDosesToxic;
      return;
    }
    state.mtd = sel.mtd;
    state.phase = Phase::StageTwo;
  }
  if (state.phase == Phase::StageTwo) {
    const auto arms = stage_two_arms(*state.mtd);
    for (int arm : arms)
      if (stage_two_count(state, arm) < cfg.stage2_per_arm) return;
    const auto done = all_resolved_time(state);
    if (done && state.clock < *done - kTimeEps) return;
    state.obd = select_stage_two(state, *state.mtd).obd;
    state.phase = Phase::Completed;
  }
}

}  // namespace

TrialState advance(TrialState state, const TrialEvent& event) {
  if (state.phase == Phase::Completed || state.phase == Phase::TerminatedAllDosesToxic) {
    if (!std::holds_alternative<ClockEvent>(event) && !std::holds_alternative<ToxOutcomeEvent>(event) &&
        !std::holds_alternative<ResponseEvent>(event) && !std::holds_alternative<TurnedAwayEvent>(event))
      throw StateError("advance: trial has ended (phase " + to_string(state.phase) + ")");
  }
  const double t = event_time(event);
  if (!std::isfinite(t) || t < state.clock - kTimeEps)
    throw StateError("advance: event time precedes the trial clock");

  std::visit(
      [&](const auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, EnrollEvent>) apply_enroll(state, e);
        else if constexpr (std::is_same_v<E, ToxOutcomeEvent>) apply_tox(state, e);
        else if constexpr (std::is_same_v<E, ResponseEvent>) apply_response(state, e);
        else if constexpr (std::is_same_v<E, DecisionEvent>) apply_decision(state, e);
      },
      event);
  state.clock = std::max(state.clock, t);
  state.events.push_back(event);
  recompute_phase(state);
  return state;
}

TrialState replay(const DesignConfig& config, const std::vector<TrialEvent>& events) {
  TrialState state = new_trial(config);
  for (const auto& e : events) state = advance(std::move(state), e);
  return state;
}

}  // namespace beboin
