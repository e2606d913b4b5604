#pragma once

// JSON documents: design configs, trial states (with their event log),
// decisions, scenarios and simulation summaries.

#include <string>

#include <json.hpp>

#include "beboin/core.hpp"
#include "beboin/engine.hpp"
#include "beboin/selection.hpp"
#include "beboin/sim.hpp"
#include "beboin/tablegen.hpp"

namespace beboin {

using Json = nlohmann::ordered_json;

inline constexpr int kStateSchemaVersion = 1;
inline constexpr int kScenarioSchemaVersion = 1;

Json to_json(const DesignConfig& config);

// Missing fields take their defaults. Unknown fields and wrong types are
// reported as ConfigError issues, as are violated invariants.
DesignConfig config_from_json(const Json& doc);

Json to_json(const PatientRecord& patient);
Json to_json(const Decision& decision);
Decision decision_from_json(const Json& doc);
Json to_json(const TrialEvent& event);
TrialEvent event_from_json(const Json& doc);
Json to_json(const DoseSummary& summary);
Json to_json(const ToxEstimate& estimate);
Json to_json(const BackfillEligibility& eligibility);
Json to_json(const ConflictReport& report);
Json to_json(const IsotonicFit& fit);
Json to_json(const UtilityPosterior& utility);

// The canonical trial-state document.
Json state_to_json(const TrialState& state);

// Rebuilds the state by replaying the document's event log from its config,
// then checks the stored fields against the replay.
TrialState state_from_json(const Json& doc);

std::string dump_state(const TrialState& state);
TrialState parse_state(const std::string& text);

Json to_json(const Scenario& scenario);
Scenario scenario_from_json(const Json& doc);

Json to_json(const OperatingCharacteristics& oc);

// Decision-table rows; conditions are "no", "yes" or {mf, tf} thresholds.
Json table_to_json(const std::vector<TableRow>& rows);

// Parse helper that turns JSON syntax errors into DomainError.
Json parse_json(const std::string& text);

}  // namespace beboin
