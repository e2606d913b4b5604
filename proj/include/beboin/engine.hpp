#pragma once

// Dose-escalation state machine: DE decisions with accrual suspension,
// backfill eligibility and allocation, conflict handling between backfilled
// doses and the current DE dose, and event-sourced state transitions.

#include <optional>
#include <random>
#include <set>
#include <vector>

#include "beboin/boundaries.hpp"
#include "beboin/core.hpp"
#include "beboin/estimator.hpp"
#include "beboin/selection.hpp"

namespace beboin {

using Rng = std::mt19937_64;

// Ordered from least to most conservative.
enum class DecisionClass { EscalateClass, StayClass, DeEscalateClass, EliminateClass };

std::string to_string(DecisionClass cls);

DecisionClass decision_class(const DoseSummary& summary, const Boundaries& bounds,
                             const DesignConfig& config);

struct CriterionResult {
  bool pass = false;
  std::vector<TraceValue> values;
};

struct BackfillEligibility {
  int dose = 1;
  bool eligible = false;
  CriterionResult safety;
  CriterionResult efficacy;
  CriterionResult cap;
};

// One entry per dose below the current DE dose.
std::vector<BackfillEligibility> backfill_eligibility(const TrialState& state, double at_time);

std::vector<int> eligible_doses(const std::vector<BackfillEligibility>& report);

int allocate_backfill(const std::vector<int>& eligible, BackfillStrategy strategy, Rng& rng);

struct ConflictReport {
  bool conflict = false;
  std::optional<int> b_star;
  DecisionClass backfill_class = DecisionClass::EscalateClass;
  DecisionClass current_class = DecisionClass::EscalateClass;
};

ConflictReport detect_conflict(const TrialState& state, double at_time);

Decision resolve_conflict(const TrialState& state, int b_star, int c, double at_time);

// Next DE decision at the current dose. Requires stage one.
Decision de_decision(const TrialState& state, double at_time);

// True when the open DE cohort is full and no decision has been applied yet
// (including while suspended).
bool de_decision_pending(const TrialState& state);

// Backfill accrual runs while stage one is active and either the DE sample
// size has not been reached or some DE patient is still inside the window.
bool backfill_open(const TrialState& state, double at_time);

// True when stagger_de is on and DE patients at the current dose still have
// pending DLT windows.
bool waiting_for_de_windows(const TrialState& state, double at_time);

struct Assignment {
  enum class Kind { DoseEscalation, Backfill, TurnedAway };
  Kind kind = Kind::TurnedAway;
  int dose = 0;
  bool operator==(const Assignment&) const = default;
};

Assignment route_arrival(const TrialState& state, double arrival_time, Rng& rng);

TrialState new_trial(const DesignConfig& config);

// Event-sourced transition. Validates the event against the state, appends it
// to the log, and recomputes the phase (final stage-one analysis, stage-two
// completion) at the event time.
TrialState advance(TrialState state, const TrialEvent& event);

TrialState replay(const DesignConfig& config, const std::vector<TrialEvent>& events);

// Final stage-one analysis on completed data.
struct StageOneSelection {
  int lowest_eliminated = 0;
  IsotonicFit fit;
  std::optional<int> mtd;
};

StageOneSelection select_stage_one(const TrialState& state);

struct StageTwoSelection {
  ArmOutcomes high;
  std::optional<ArmOutcomes> low;
  UtilityPosterior high_utility;
  std::optional<UtilityPosterior> low_utility;
  int obd = 1;
};

StageTwoSelection select_stage_two(const TrialState& state, int mtd);

// Stage-two arms: MTD and MTD - 1 (MTD alone when it is dose 1).
std::vector<int> stage_two_arms(int mtd);

// Clock time at which every DLT window (stage one) or every stage-two
// assessment is complete; nullopt when no patient is enrolled in that stage.
std::optional<double> all_resolved_time(const TrialState& state);

}  // namespace beboin
