#pragma once

// Shared domain types for the backfill time-to-event BOIN design.
//
// Dose indices are 1-based throughout (dose 1 is the lowest level). Times are
// in months since the first enrollment; comparisons against window edges use
// kTimeEps.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace beboin {

inline constexpr double kTimeEps = 1e-9;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ConfigIssue {
  std::string field;
  std::string message;
  bool operator==(const ConfigIssue&) const = default;
};

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

enum class BackfillStrategy { HighestEligible, RandomizeEligible };

// Switches that distinguish the compared designs. The defaults are the full
// backfill + real-time design.
struct EngineRules {
  bool backfill = true;
  bool suspension = true;      // accrual suspension rules 1 and 2
  bool stagger_de = false;     // next DE decision waits for all DE windows at c
  bool observed_only = false;  // pending patients dropped from all estimates
  bool operator==(const EngineRules&) const = default;
};

struct DesignConfig {
  double target_dlt_rate = 0.25;
  double phi1_factor = 0.6;
  double phi2_factor = 1.4;
  int num_doses = 5;
  int cohort_size = 3;
  std::optional<int> max_sample_n;  // defaults to 6 * num_doses
  int backfill_cap = 12;
  double dlt_window = 3.0;
  double suspend_observed_fraction = 0.51;   // rule 1 cutoff A
  double suspend_min_followup = 0.25;        // rule 2 cutoff B
  double elimination_cutoff = 0.95;
  double elimination_prior_a = 1.0;
  double elimination_prior_b = 1.0;
  BackfillStrategy backfill_strategy = BackfillStrategy::HighestEligible;
  int start_dose = 1;
  int stage2_per_arm = 20;
  std::array<double, 4> utility_scores{100.0, 60.0, 40.0, 0.0};
  std::array<double, 4> utility_prior{0.25, 0.25, 0.25, 0.25};
  std::optional<double> efficacy_assess_time;  // defaults to dlt_window
  bool obd_pool_stages = true;  // false: OBD uses stage-II patients only
  EngineRules rules;

  double phi1() const { return phi1_factor * target_dlt_rate; }
  double phi2() const { return phi2_factor * target_dlt_rate; }
  int sample_size() const { return max_sample_n.value_or(6 * num_doses); }
  double efficacy_time() const { return efficacy_assess_time.value_or(dlt_window); }

  bool operator==(const DesignConfig&) const = default;
};

struct ConfigValidation {
  DesignConfig config;  // with defaults resolved
  std::vector<ConfigIssue> issues;
  bool ok() const { return issues.empty(); }
};

// Collects every violated constraint; resolves N and the efficacy time.
ConfigValidation validate_config(const DesignConfig& config);

// validate_config, throwing ConfigError when any issue is found.
DesignConfig require_valid(const DesignConfig& config);

enum class Origin { DoseEscalation, Backfill, StageTwo };
enum class ToxStatus { Pending, Dlt, NoDlt };
enum class ResponseStatus { Pending, Response, NoResponse };

struct PatientRecord {
  std::string id;
  int dose = 1;
  Origin origin = Origin::DoseEscalation;
  double enroll_time = 0.0;
  ToxStatus tox = ToxStatus::Pending;
  double time_to_dlt = 0.0;  // months from enrollment, meaningful when tox == Dlt
  ResponseStatus response = ResponseStatus::Pending;
  double response_time = 0.0;  // clock time the response was recorded

  bool operator==(const PatientRecord&) const = default;
};

struct DoseSummary {
  int dose = 1;
  int n = 0;
  int y_obs = 0;
  int m_pending = 0;
  double tf = 0.0;  // standardized total follow-up of pending patients
  double mf = 1.0;  // standardized minimum follow-up of pending patients
  int responses = 0;
  int backfilled = 0;  // patients with Backfill origin
  bool eliminated = false;

  bool operator==(const DoseSummary&) const = default;
};

enum class Phase {
  StageOneAccruing,
  StageOneSuspended,
  StageTwo,
  Completed,
  TerminatedAllDosesToxic
};

enum class Verdict { Escalate, Stay, DeEscalate, Eliminate, Suspend };
enum class SuspendReason { None, Rule1InsufficientObserved, Rule2InsufficientFollowup };

struct TraceValue {
  std::string name;
  double value = 0.0;
  bool operator==(const TraceValue&) const = default;
};

struct TraceStep {
  std::string rule;
  std::string outcome;
  std::vector<TraceValue> values;
  bool operator==(const TraceStep&) const = default;
};

struct Decision {
  Verdict verdict = Verdict::Stay;
  int from_dose = 1;
  int next_dose = 1;      // dose for the next DE cohort; 0 means no admissible dose
  int eliminated_from = 0;  // Eliminate: lowest eliminated dose
  SuspendReason reason = SuspendReason::None;
  std::vector<TraceStep> trace;

  bool operator==(const Decision&) const = default;
};

struct EnrollEvent {
  std::string patient_id;
  int dose = 1;
  Origin origin = Origin::DoseEscalation;
  double time = 0.0;
  bool operator==(const EnrollEvent&) const = default;
};

struct ToxOutcomeEvent {
  std::string patient_id;
  bool dlt = false;
  double time = 0.0;  // clock time of the DLT, or of window completion
  bool operator==(const ToxOutcomeEvent&) const = default;
};

struct ResponseEvent {
  std::string patient_id;
  bool response = false;
  double time = 0.0;
  bool operator==(const ResponseEvent&) const = default;
};

struct DecisionEvent {
  Decision decision;
  double time = 0.0;
  bool operator==(const DecisionEvent&) const = default;
};

struct TurnedAwayEvent {
  double time = 0.0;
  bool operator==(const TurnedAwayEvent&) const = default;
};

struct ClockEvent {
  double time = 0.0;
  bool operator==(const ClockEvent&) const = default;
};

using TrialEvent = std::variant<EnrollEvent, ToxOutcomeEvent, ResponseEvent, DecisionEvent,
                                TurnedAwayEvent, ClockEvent>;

double event_time(const TrialEvent& event);

struct TrialState {
  DesignConfig config;
  std::vector<PatientRecord> patients;
  int current_dose = 1;
  Phase phase = Phase::StageOneAccruing;
  int lowest_eliminated = 0;  // 0 when nothing is eliminated
  double clock = 0.0;
  std::optional<int> mtd;
  std::optional<int> obd;
  std::vector<TrialEvent> events;

  int cohort_enrolled = 0;  // DE patients in the open cohort at current_dose
  SuspendReason suspension = SuspendReason::None;

  bool is_eliminated(int dose) const { return lowest_eliminated != 0 && dose >= lowest_eliminated; }
  std::vector<int> eliminated_doses() const;
  int de_enrolled() const;
  const PatientRecord* find_patient(const std::string& id) const;
  bool stage_one() const {
    return phase == Phase::StageOneAccruing || phase == Phase::StageOneSuspended;
  }

  bool operator==(const TrialState&) const = default;
};

// Follow-up of a patient at a clock time, capped at the DLT window.
double follow_up(const PatientRecord& patient, double at_time, double window);

// True when the patient's DLT outcome is known at at_time (DLT seen, or the
// full window elapsed without one).
bool tox_resolved(const PatientRecord& patient, double at_time, double window);

// True when the patient had a DLT that is visible at at_time.
bool dlt_observed(const PatientRecord& patient, double at_time);

bool response_observed(const PatientRecord& patient, double at_time);

// Materializes the completed/pending partition at `dose`. Honors
// config.rules.observed_only, in which case pending patients are left out.
DoseSummary summarize_dose(const TrialState& state, int dose, double at_time);

std::vector<DoseSummary> summarize_all(const TrialState& state, double at_time);

std::string to_string(Phase phase);
std::string to_string(Verdict verdict);
std::string to_string(SuspendReason reason);
std::string to_string(Origin origin);
std::string to_string(BackfillStrategy strategy);

Phase phase_from_string(const std::string& text);
Verdict verdict_from_string(const std::string& text);
SuspendReason suspend_reason_from_string(const std::string& text);
Origin origin_from_string(const std::string& text);
BackfillStrategy backfill_strategy_from_string(const std::string& text);

}  // namespace beboin
