#pragma once

// Monte Carlo evaluation of the design: scenario truth, accrual, time-to-DLT
// generation, two-stage trial simulation and operating characteristics.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "beboin/core.hpp"
#include "beboin/engine.hpp"

namespace beboin {

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TteModel { Weibull, Uniform, LogLogistic };

std::string to_string(TteModel model);
TteModel tte_model_from_string(const std::string& text);

// Time-to-DLT law on (0, inf); DLTs are the draws that land inside the window.
// Weibull: F(t) = 1 - exp(-(t/scale)^shape).
// LogLogistic: F(t) = 1 / (1 + (t/scale)^-shape).
// Uniform: F(t) = p t / window on [0, window]; shape and scale are unused.
struct TteParams {
  TteModel model = TteModel::Weibull;
  double shape = 1.0;
  double scale = 1.0;
  double p = 0.0;       // F(window)
  double window = 1.0;
};

double tte_cdf(const TteParams& params, double t);
double tte_quantile(const TteParams& params, double prob);

// Solves F(window) = p and F(window / 2) = (1 - late_fraction) p. The uniform
// model has no free parameter and always puts half of the DLTs late.
TteParams calibrate_tte(double p, double window, double late_fraction, TteModel model);

struct Accrual {
  enum class Kind { Poisson, Deterministic };
  Kind kind = Kind::Poisson;
  double rate = 2.0;  // patients per month; deterministic spacing is 1 / rate
  bool operator==(const Accrual&) const = default;
};

struct Scenario {
  std::string name;
  std::vector<double> p_tox;
  std::vector<double> p_eff;
  int true_mtd = 1;
  int true_obd = 1;
  TteModel tte_model = TteModel::Weibull;
  double late_fraction = 0.5;
  Accrual accrual;
  double dlt_window = 3.0;
  bool operator==(const Scenario&) const = default;
};

void validate_scenario(const Scenario& scenario, int num_doses);

// The eight reference scenarios (five doses, tau = 3 months, two patients per
// month, Weibull onset with half of DLTs late).
std::vector<Scenario> scenario_library();

// Sensitivity variants of one base scenario: A/I ratio 3, 6, 9 at tau = 3,
// late fraction 0.3, 0.5, 0.7, and the three onset models.
std::vector<Scenario> sensitivity_variants(const Scenario& base);

// Looks up "1".."8", "s1".."s8" or a scenario name.
Scenario find_scenario(const std::string& key);

enum class DesignMode { BeBoin, TiteBoin, BfBoin };

std::string to_string(DesignMode mode);
DesignMode design_mode_from_string(const std::string& text);

// Engine rules for a mode. A stagger_de already set in `config` is kept, so
// that BeBoin can be run with staggered dose escalation.
DesignConfig apply_mode(DesignConfig config, DesignMode mode);

struct Outcome {
  bool dlt = false;
  std::optional<double> dlt_time;  // months after enrollment
  bool response = false;
};

// Uniform variates behind one patient's outcomes. Drawn once per arrival so
// that paired runs of different modes see the same patients.
struct LatentDraw {
  double u_tox = 1.0;
  double v_time = 0.5;
  double u_eff = 1.0;
};

LatentDraw draw_latent(Rng& rng);

Outcome outcome_from_draw(const Scenario& scenario, const std::vector<TteParams>& onset, int dose,
                          const LatentDraw& draw);

// Calibrated onset law per dose (doses with p_tox of 0 or 1 get a placeholder).
std::vector<TteParams> calibrate_scenario(const Scenario& scenario);

Outcome sample_outcome(const Scenario& scenario, int dose, Rng& rng);

struct TrialResult {
  TrialState final_state;
  std::optional<int> mtd;
  std::optional<int> obd;
  std::vector<int> patients_per_dose;  // all stages
  std::vector<int> stage_one_per_dose;
  int total_patients = 0;
  int backfill_patients = 0;
  int turned_away = 0;
  int overdosed = 0;
  double stage_one_duration = 0.0;
  double duration = 0.0;
  bool terminated = false;
};

// One simulated trial. The engine state is built only from events, so
// replay(final_state.config, final_state.events) reproduces final_state.
TrialResult run_trial(const DesignConfig& config, const Scenario& scenario, DesignMode mode,
                      Rng& rng);

struct OperatingCharacteristics {
  std::string scenario;
  DesignMode mode = DesignMode::BeBoin;
  int replicates = 0;
  std::uint64_t seed = 0;
  std::vector<double> mtd_sel_pct;  // per dose
  double mtd_none_pct = 0.0;
  double correct_mtd_pct = 0.0;
  std::vector<double> obd_sel_pct;
  double obd_none_pct = 0.0;
  double correct_obd_pct = 0.0;
  std::vector<double> patients_per_dose;
  std::vector<double> stage_one_per_dose;
  double patients_at_mtd = 0.0;
  double patients_at_obd = 0.0;
  double patients_overdosed = 0.0;
  double total_patients = 0.0;
  double backfill_patients = 0.0;
  double turned_away = 0.0;
  double stage_one_duration = 0.0;
  double duration_months = 0.0;
  double terminated_pct = 0.0;
};

// Replicate r uses a generator seeded from (seed, r), so results do not depend
// on the worker count. BEBOIN_THREADS overrides the default of one worker per
// hardware thread.
OperatingCharacteristics run_oc(const DesignConfig& config, const Scenario& scenario,
                                DesignMode mode, int replicates, std::uint64_t seed);

Rng replicate_rng(std::uint64_t seed, std::uint64_t index);

int worker_count();

std::string oc_csv_header(int num_doses);
std::string oc_csv_row(const OperatingCharacteristics& oc);

}  // namespace beboin
