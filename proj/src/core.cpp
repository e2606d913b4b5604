#include "beboin/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace beboin {

namespace {

std::string join_issues(const std::vector<ConfigIssue>& issues) {
  std::ostringstream out;
  out << "invalid design configuration:";
  for (const auto& issue : issues) out << " [" << issue.field << ": " << issue.message << "]";
  return out.str();
}

bool in_unit_interval(double x) { return x > 0.0 && x < 1.0; }

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::invalid_argument(join_issues(issues)), issues_(std::move(issues)) {}

ConfigValidation validate_config(const DesignConfig& config) {
  ConfigValidation result{config, {}};
  auto& cfg = result.config;
  auto fail = [&](std::string field, std::string message) {
    result.issues.push_back({std::move(field), std::move(message)});
  };

  if (!cfg.max_sample_n) cfg.max_sample_n = 6 * cfg.num_doses;
  if (!cfg.efficacy_assess_time) cfg.efficacy_assess_time = cfg.dlt_window;

  const double phi = cfg.target_dlt_rate;
  if (!in_unit_interval(phi)) fail("target_dlt_rate", "0 < target_dlt_rate < 1");
  if (!(cfg.phi1_factor > 0.0 && cfg.phi1_factor < 1.0))
    fail("phi1_factor", "0 < phi1_factor < 1");
  if (!(cfg.phi2_factor > 1.0 && cfg.phi2_factor * phi < 1.0))
    fail("phi2_factor", "phi2_factor > 1 and phi2_factor * target_dlt_rate < 1");
  if (cfg.num_doses < 1) fail("num_doses", "num_doses >= 1");
  if (cfg.cohort_size < 1) fail("cohort_size", "cohort_size >= 1");
  if (*cfg.max_sample_n < cfg.cohort_size) fail("max_sample_n", "max_sample_n >= cohort_size");
  if (cfg.backfill_cap < 0) fail("backfill_cap", "backfill_cap >= 0");
  if (!(cfg.dlt_window > 0.0)) fail("dlt_window", "dlt_window > 0");
  if (!(cfg.suspend_observed_fraction > 0.0 && cfg.suspend_observed_fraction <= 1.0))
    fail("suspend_observed_fraction", "0 < suspend_observed_fraction <= 1");
  if (!(cfg.suspend_min_followup >= 0.0 && cfg.suspend_min_followup < 1.0))
    fail("suspend_min_followup", "0 <= suspend_min_followup < 1");
  if (!in_unit_interval(cfg.elimination_cutoff))
    fail("elimination_cutoff", "0 < elimination_cutoff < 1");
  if (!(cfg.elimination_prior_a > 0.0 && cfg.elimination_prior_b > 0.0))
    fail("elimination_prior", "elimination prior parameters > 0");
  if (cfg.start_dose < 1 || cfg.start_dose > cfg.num_doses)
    fail("start_dose", "1 <= start_dose <= num_doses");
  if (cfg.stage2_per_arm < 0) fail("stage2_per_arm", "stage2_per_arm >= 0");
  for (double u : cfg.utility_scores) {
    if (!(u >= 0.0 && u <= 100.0)) {
      fail("utility_scores", "utility scores within [0, 100]");
      break;
    }
  }
  for (double eta : cfg.utility_prior) {
    if (!(eta > 0.0)) {
      fail("utility_prior", "Dirichlet prior parameters > 0");
      break;
    }
  }
  if (!(*cfg.efficacy_assess_time > 0.0))
    fail("efficacy_assess_time", "efficacy_assess_time > 0");
  return result;
}

DesignConfig require_valid(const DesignConfig& config) {
  auto checked = validate_config(config);
  if (!checked.ok()) throw ConfigError(std::move(checked.issues));
  return checked.config;
}

double event_time(const TrialEvent& event) {
  return std::visit([](const auto& e) { return e.time; }, event);
}

std::vector<int> TrialState::eliminated_doses() const {
  std::vector<int> out;
  if (lowest_eliminated == 0) return out;
  for (int d = lowest_eliminated; d <= config.num_doses; ++d) out.push_back(d);
  return out;
}

int TrialState::de_enrolled() const {
  return static_cast<int>(std::count_if(patients.begin(), patients.end(), [](const auto& p) {
    return p.origin == Origin::DoseEscalation;
  }));
}

const PatientRecord* TrialState::find_patient(const std::string& id) const {
  for (const auto& p : patients)
    if (p.id == id) return &p;
  return nullptr;
}

double follow_up(const PatientRecord& patient, double at_time, double window) {
  return std::clamp(at_time - patient.enroll_time, 0.0, window);
}

bool dlt_observed(const PatientRecord& patient, double at_time) {
  return patient.tox == ToxStatus::Dlt &&
         patient.enroll_time + patient.time_to_dlt <= at_time + kTimeEps;
}

bool tox_resolved(const PatientRecord& patient, double at_time, double window) {
  if (dlt_observed(patient, at_time)) return true;
  return at_time - patient.enroll_time >= window - kTimeEps;
}

bool response_observed(const PatientRecord& patient, double at_time) {
  return patient.response == ResponseStatus::Response &&
         patient.response_time <= at_time + kTimeEps;
}

DoseSummary summarize_dose(const TrialState& state, int dose, double at_time) {
  const auto& cfg = state.config;
  if (dose < 1 || dose > cfg.num_doses)
    throw DomainError("summarize_dose: dose " + std::to_string(dose) + " outside [1, " +
                      std::to_string(cfg.num_doses) + "]");
  if (at_time < 0.0) throw DomainError("summarize_dose: negative time");

  const double window = cfg.dlt_window;
  DoseSummary s;
  s.dose = dose;
  s.eliminated = state.is_eliminated(dose);
  double min_fu = 1.0;
  for (const auto& p : state.patients) {
    if (p.dose != dose || p.enroll_time > at_time + kTimeEps) continue;
    const bool resolved = tox_resolved(p, at_time, window);
    if (!resolved && cfg.rules.observed_only) continue;
    ++s.n;
    if (p.origin == Origin::Backfill) ++s.backfilled;
    if (response_observed(p, at_time)) ++s.responses;
    if (dlt_observed(p, at_time)) {
      ++s.y_obs;
    } else if (!resolved) {
      ++s.m_pending;
      const double fu = follow_up(p, at_time, window) / window;
      s.tf += fu;
      min_fu = std::min(min_fu, fu);
    }
  }
  s.mf = s.m_pending > 0 ? min_fu : 1.0;
  return s;
}

std::vector<DoseSummary> summarize_all(const TrialState& state, double at_time) {
  std::vector<DoseSummary> out;
  out.reserve(static_cast<std::size_t>(state.config.num_doses));
  for (int d = 1; d <= state.config.num_doses; ++d) out.push_back(summarize_dose(state, d, at_time));
  return out;
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::StageOneAccruing: return "stage_one_accruing";
    case Phase::StageOneSuspended: return "stage_one_suspended";
    case Phase::StageTwo: return "stage_two";
    case Phase::Completed: return "completed";
    case Phase::TerminatedAllDosesToxic: return "terminated_all_doses_toxic";
  }
  return "unknown";
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Escalate: return "escalate";
    case Verdict::Stay: return "stay";
    case Verdict::DeEscalate: return "de_escalate";
    case Verdict::Eliminate: return "eliminate";
    case Verdict::Suspend: return "suspend";
  }
  return "unknown";
}

std::string to_string(SuspendReason reason) {
  switch (reason) {
    case SuspendReason::None: return "none";
    case SuspendReason::Rule1InsufficientObserved: return "rule1_insufficient_observed";
    case SuspendReason::Rule2InsufficientFollowup: return "rule2_insufficient_followup";
  }
  return "unknown";
}

std::string to_string(Origin origin) {
  switch (origin) {
    case Origin::DoseEscalation: return "dose_escalation";
    case Origin::Backfill: return "backfill";
    case Origin::StageTwo: return "stage_two";
  }
  return "unknown";
}

std::string to_string(BackfillStrategy strategy) {
  return strategy == BackfillStrategy::HighestEligible ? "highest_eligible" : "randomize_eligible";
}

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& text, const std::array<Enum, N>& values, const char* what) {
  for (Enum v : values)
    if (to_string(v) == text) return v;
  throw DomainError(std::string("unknown ") + what + " '" + text + "'");
}

}  // namespace

Phase phase_from_string(const std::string& text) {
  return parse_enum(text,
                    std::array{Phase::StageOneAccruing, Phase::StageOneSuspended, Phase::StageTwo,
                               Phase::Completed, Phase::TerminatedAllDosesToxic},
                    "phase");
}

Verdict verdict_from_string(const std::string& text) {
  return parse_enum(text,
                    std::array{Verdict::Escalate, Verdict::Stay, Verdict::DeEscalate,
                               Verdict::Eliminate, Verdict::Suspend},
                    "verdict");
}

SuspendReason suspend_reason_from_string(const std::string& text) {
  return parse_enum(text,
                    std::array{SuspendReason::None, SuspendReason::Rule1InsufficientObserved,
                               SuspendReason::Rule2InsufficientFollowup},
                    "suspension reason");
}

Origin origin_from_string(const std::string& text) {
  return parse_enum(text, std::array{Origin::DoseEscalation, Origin::Backfill, Origin::StageTwo},
                    "origin");
}

BackfillStrategy backfill_strategy_from_string(const std::string& text) {
  return parse_enum(
      text, std::array{BackfillStrategy::HighestEligible, BackfillStrategy::RandomizeEligible},
      "backfill strategy");
}

}  // namespace beboin
