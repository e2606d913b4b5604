#include "beboin/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <queue>
#include <sstream>
#include <thread>

#include <boost/math/tools/roots.hpp>

namespace beboin {

std::string to_string(TteModel model) {
  switch (model) {
    case TteModel::Weibull: return "weibull";
    case TteModel::Uniform: return "uniform";
    case TteModel::LogLogistic: return "log_logistic";
  }
  return "unknown";
}

TteModel tte_model_from_string(const std::string& text) {
  if (text == "weibull") return TteModel::Weibull;
  if (text == "uniform") return TteModel::Uniform;
  if (text == "log_logistic" || text == "loglogistic" || text == "log-logistic")
    return TteModel::LogLogistic;
  throw DomainError("unknown time-to-event model '" + text + "'");
}

std::string to_string(DesignMode mode) {
  switch (mode) {
    case DesignMode::BeBoin: return "be-boin";
    case DesignMode::TiteBoin: return "tite-boin";
    case DesignMode::BfBoin: return "bf-boin";
  }
  return "unknown";
}

DesignMode design_mode_from_string(const std::string& text) {
  if (text == "be-boin" || text == "be_boin" || text == "beboin") return DesignMode::BeBoin;
  if (text == "tite-boin" || text == "tite_boin" || text == "titeboin") return DesignMode::TiteBoin;
  if (text == "bf-boin" || text == "bf_boin" || text == "bfboin") return DesignMode::BfBoin;
  throw DomainError("unknown design mode '" + text + "'");
}

double tte_cdf(const TteParams& params, double t) {
  if (t <= 0.0) return 0.0;
  switch (params.model) {
    case TteModel::Weibull: return -std::expm1(-std::pow(t / params.scale, params.shape));
    case TteModel::LogLogistic: return 1.0 / (1.0 + std::pow(t / params.scale, -params.shape));
    case TteModel::Uniform: return params.p * std::min(t, params.window) / params.window;
  }
  return 0.0;
}

double tte_quantile(const TteParams& params, double prob) {
  if (prob <= 0.0) return 0.0;
  switch (params.model) {
    case TteModel::Weibull:
      return params.scale * std::pow(-std::log1p(-prob), 1.0 / params.shape);
    case TteModel::LogLogistic:
      return params.scale * std::pow(prob / (1.0 - prob), 1.0 / params.shape);
    case TteModel::Uniform: return params.window * std::min(prob / params.p, 1.0);
  }
  return 0.0;
}

namespace {

// Scale that puts F(window) = p for a given shape.
double scale_for(TteModel model, double shape, double p, double window) {
  if (model == TteModel::Weibull) return window / std::pow(-std::log1p(-p), 1.0 / shape);
  return window * std::pow((1.0 - p) / p, 1.0 / shape);
}

}  // namespace

TteParams calibrate_tte(double p, double window, double late_fraction, TteModel model) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("calibrate_tte: require 0 < p < 1");
  if (!(window > 0.0)) throw DomainError("calibrate_tte: require window > 0");
  if (!(late_fraction > 0.0 && late_fraction < 1.0))
    throw DomainError("calibrate_tte: require 0 < late_fraction < 1");
  TteParams out;
  out.model = model;
  out.p = p;
  out.window = window;
  if (model == TteModel::Uniform) return out;

  const double early_target = (1.0 - late_fraction) * p;
  auto residual = [&](double shape) {
    TteParams trial = out;
    trial.shape = shape;
    trial.scale = scale_for(model, shape, p, window);
    return tte_cdf(trial, 0.5 * window) - early_target;
  };
  // The early mass falls as the shape grows, so the residual is decreasing.
  double lo = 1e-2, hi = 100.0;
  const double r_lo = residual(lo), r_hi = residual(hi);
  if (!(r_lo > 0.0 && r_hi < 0.0)) {
    std::ostringstream msg;
    msg << "calibrate_tte: no root for p=" << p << ", late_fraction=" << late_fraction
        << " (" << to_string(model) << "), residuals " << r_lo << " at " << lo << " and " << r_hi
        << " at " << hi;
    throw CalibrationError(msg.str());
  }
  std::uintmax_t iterations = 200;
  const auto bracket = boost::math::tools::toms748_solve(
      residual, lo, hi, r_lo, r_hi, boost::math::tools::eps_tolerance<double>(52), iterations);
  out.shape = 0.5 * (bracket.first + bracket.second);
  out.scale = scale_for(model, out.shape, p, window);

  const double err_full = std::abs(tte_cdf(out, window) - p);
  const double err_half = std::abs(tte_cdf(out, 0.5 * window) - early_target);
  if (err_full > 1e-9 || err_half > 1e-9) {
    std::ostringstream msg;
    msg << "calibrate_tte: did not converge after " << iterations << " iterations; |F(tau)-p|="
        << err_full << ", |F(tau/2)-target|=" << err_half;
    throw CalibrationError(msg.str());
  }
  return out;
}

void validate_scenario(const Scenario& s, int num_doses) {
  auto fail = [&](const std::string& what) {
    throw DomainError("scenario '" + s.name + "': " + what);
  };
  if (static_cast<int>(s.p_tox.size()) != num_doses || static_cast<int>(s.p_eff.size()) != num_doses)
    fail("p_tox and p_eff must have one entry per dose (" + std::to_string(num_doses) + ")");
  for (double v : s.p_tox)
    if (!(v >= 0.0 && v <= 1.0)) fail("p_tox values must lie in [0, 1]");
  for (double v : s.p_eff)
    if (!(v >= 0.0 && v <= 1.0)) fail("p_eff values must lie in [0, 1]");
  if (s.true_mtd < 1 || s.true_mtd > num_doses) fail("true_mtd out of range");
  if (s.true_obd < 1 || s.true_obd > num_doses) fail("true_obd out of range");
  if (!(s.late_fraction > 0.0 && s.late_fraction < 1.0)) fail("late_fraction must lie in (0, 1)");
  if (!(s.accrual.rate > 0.0)) fail("accrual rate must be positive");
  if (!(s.dlt_window > 0.0)) fail("dlt_window must be positive");
}

std::vector<Scenario> scenario_library() {
  struct Row {
    std::vector<double> tox, eff;
    int mtd, obd;
  };
  const std::vector<Row> rows{
      {{0.10, 0.18, 0.35, 0.40, 0.50}, {0.35, 0.35, 0.37, 0.39, 0.39}, 2, 1},
      {{0.05, 0.15, 0.25, 0.35, 0.50}, {0.10, 0.35, 0.35, 0.38, 0.39}, 3, 2},
      {{0.02, 0.06, 0.10, 0.20, 0.35}, {0.05, 0.10, 0.35, 0.35, 0.40}, 4, 3},
      {{0.01, 0.03, 0.05, 0.12, 0.22}, {0.05, 0.10, 0.15, 0.35, 0.36}, 5, 4},
      {{0.10, 0.20, 0.35, 0.43, 0.50}, {0.10, 0.36, 0.37, 0.40, 0.41}, 2, 2},
      {{0.02, 0.06, 0.10, 0.20, 0.35}, {0.05, 0.10, 0.15, 0.35, 0.37}, 4, 4},
      {{0.05, 0.10, 0.20, 0.35, 0.40}, {0.35, 0.36, 0.37, 0.40, 0.41}, 3, 1},
      {{0.01, 0.05, 0.15, 0.18, 0.35}, {0.05, 0.35, 0.36, 0.37, 0.38}, 4, 2},
  };
  std::vector<Scenario> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Scenario s;
    s.name = "s" + std::to_string(i + 1);
    s.p_tox = rows[i].tox;
    s.p_eff = rows[i].eff;
    s.true_mtd = rows[i].mtd;
    s.true_obd = rows[i].obd;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scenario> sensitivity_variants(const Scenario& base) {
  std::vector<Scenario> out;
  for (int ai : {3, 6, 9}) {
    Scenario s = base;
    s.dlt_window = 3.0;
    s.accrual.rate = ai / 3.0;
    s.name = base.name + "-ai" + std::to_string(ai);
    out.push_back(std::move(s));
  }
  for (int pct : {30, 50, 70}) {
    Scenario s = base;
    s.late_fraction = pct / 100.0;
    s.name = base.name + "-late" + std::to_string(pct);
    out.push_back(std::move(s));
  }
  for (auto model : {TteModel::Weibull, TteModel::Uniform, TteModel::LogLogistic}) {
    Scenario s = base;
    s.tte_model = model;
    s.name = base.name + "-" + to_string(model);
    out.push_back(std::move(s));
  }
  return out;
}

Scenario find_scenario(const std::string& key) {
  const auto lib = scenario_library();
  for (const auto& s : lib)
    if (s.name == key || s.name == "s" + key) return s;
  for (const auto& base : lib)
    for (const auto& v : sensitivity_variants(base))
      if (v.name == key) return v;
  throw DomainError("unknown scenario '" + key + "'");
}

DesignConfig apply_mode(DesignConfig config, DesignMode mode) {
  auto& r = config.rules;
  switch (mode) {
    case DesignMode::BeBoin:
      r.backfill = true;
      r.suspension = true;
      r.observed_only = false;
      break;
    case DesignMode::TiteBoin:
      r.backfill = false;
      r.suspension = true;
      r.observed_only = false;
      break;
    case DesignMode::BfBoin:
      r.backfill = true;
      r.suspension = false;
      r.observed_only = true;
      r.stagger_de = true;
      break;
  }
  return config;
}

LatentDraw draw_latent(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  LatentDraw d;
  d.u_tox = unif(rng);
  d.v_time = unif(rng);
  d.u_eff = unif(rng);
  return d;
}

std::vector<TteParams> calibrate_scenario(const Scenario& scenario) {
  std::vector<TteParams> out;
  for (double p : scenario.p_tox) {
    if (p > 0.0 && p < 1.0) {
      out.push_back(calibrate_tte(p, scenario.dlt_window, scenario.late_fraction, scenario.tte_model));
    } else {
      TteParams placeholder;
      placeholder.model = TteModel::Uniform;
      placeholder.p = p > 0.0 ? p : 1.0;
      placeholder.window = scenario.dlt_window;
      out.push_back(placeholder);
    }
  }
  return out;
}

Outcome outcome_from_draw(const Scenario& scenario, const std::vector<TteParams>& onset, int dose,
                          const LatentDraw& draw) {
  const auto j = static_cast<std::size_t>(dose - 1);
  if (dose < 1 || j >= scenario.p_tox.size()) throw DomainError("outcome: dose out of range");
  Outcome out;
  const double p = scenario.p_tox[j];
  out.dlt = draw.u_tox < p;
  if (out.dlt) {
    // Inverse CDF restricted to (0, window]: F(t) = v F(window).
    const double v = std::max(draw.v_time, 1e-12);
    const double t = tte_quantile(onset[j], v * onset[j].p);
    out.dlt_time = std::clamp(t, 1e-9, scenario.dlt_window);
  }
  out.response = draw.u_eff < scenario.p_eff[j];
  return out;
}

Outcome sample_outcome(const Scenario& scenario, int dose, Rng& rng) {
  return outcome_from_draw(scenario, calibrate_scenario(scenario), dose, draw_latent(rng));
}

namespace {

struct Pending {
  double time;
  std::uint64_t seq;
  TrialEvent event;
};

struct PendingLater {
  bool operator()(const Pending& a, const Pending& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

class TrialRunner {
 public:
  TrialRunner(const DesignConfig& config, const Scenario& scenario, DesignMode mode, Rng& rng)
      : scenario_(scenario),
        onset_(calibrate_scenario(scenario)),
        arrival_rng_(rng()),
        patient_rng_(rng()),
        alloc_rng_(rng()),
        stage_two_rng_(rng()) {
    DesignConfig cfg = apply_mode(config, mode);
    cfg.dlt_window = scenario.dlt_window;
    state_ = new_trial(cfg);
    validate_scenario(scenario, state_.config.num_doses);
  }

  TrialResult run() {
    const auto& cfg = state_.config;
    const int n_max = cfg.sample_size();

    while (state_.stage_one()) {
      const double t = next_arrival();
      const LatentDraw draw = draw_latent(patient_rng_);
      drain_until(t);
      if (!state_.stage_one()) break;
      if (state_.de_enrolled() >= n_max && !backfill_open(state_, t)) {
        drain_until(INFINITY);
        finish_clock(all_resolved_time(state_));
        break;
      }
      decide(t);
      if (!state_.stage_one()) break;
      const auto a = route_arrival(state_, t, alloc_rng_);
      if (a.kind == Assignment::Kind::TurnedAway) {
        apply(TurnedAwayEvent{t});
      } else {
        enroll(a.dose, a.kind == Assignment::Kind::Backfill ? Origin::Backfill : Origin::DoseEscalation,
               t, draw);
      }
    }

    TrialResult result;
    result.stage_one_duration = state_.clock;

    if (state_.phase == Phase::StageTwo) {
      std::vector<int> arms;
      for (int arm : stage_two_arms(*state_.mtd))
        arms.insert(arms.end(), static_cast<std::size_t>(cfg.stage2_per_arm), arm);
      std::shuffle(arms.begin(), arms.end(), stage_two_rng_);
      for (int arm : arms) {
        const double t = next_arrival_after(state_.clock);
        const LatentDraw draw = draw_latent(patient_rng_);
        drain_until(t);
        enroll(arm, Origin::StageTwo, t, draw);
      }
      drain_until(INFINITY);
      finish_clock(all_resolved_time(state_));
    }

    result.terminated = state_.phase == Phase::TerminatedAllDosesToxic;
    result.mtd = state_.mtd;
    result.obd = state_.obd;
    result.duration = state_.clock;
    const int j_max = cfg.num_doses;
    result.patients_per_dose.assign(static_cast<std::size_t>(j_max), 0);
    result.stage_one_per_dose.assign(static_cast<std::size_t>(j_max), 0);
    for (const auto& p : state_.patients) {
      const auto j = static_cast<std::size_t>(p.dose - 1);
      ++result.patients_per_dose[j];
      if (p.origin != Origin::StageTwo) ++result.stage_one_per_dose[j];
      if (p.origin == Origin::Backfill) ++result.backfill_patients;
      if (scenario_.p_tox[j] > cfg.target_dlt_rate) ++result.overdosed;
    }
    result.total_patients = static_cast<int>(state_.patients.size());
    result.turned_away = turned_away_;
    result.final_state = std::move(state_);
    return result;
  }

 private:
  double next_arrival() {
    if (first_arrival_) {
      first_arrival_ = false;
      return last_arrival_ = 0.0;
    }
    if (scenario_.accrual.kind == Accrual::Kind::Deterministic) {
      last_arrival_ += 1.0 / scenario_.accrual.rate;
    } else {
      std::exponential_distribution<double> gap(scenario_.accrual.rate);
      last_arrival_ += gap(arrival_rng_);
    }
    return last_arrival_;
  }

  // Arrivals keep flowing while stage one finishes; stage two takes the
  // first ones after it opens.
  double next_arrival_after(double t) {
    double a = next_arrival();
    while (a < t) a = next_arrival();
    return a;
  }

  void apply(const TrialEvent& e) {
    if (std::holds_alternative<TurnedAwayEvent>(e)) ++turned_away_;
    state_ = advance(std::move(state_), e);
  }

  void drain_until(double t) {
    while (!queue_.empty() && queue_.top().time <= t + kTimeEps) {
      if (state_.phase == Phase::TerminatedAllDosesToxic) {
        queue_ = {};
        return;
      }
      TrialEvent e = queue_.top().event;
      queue_.pop();
      apply(e);
    }
  }

  void finish_clock(std::optional<double> t) {
    if (!t || state_.phase == Phase::TerminatedAllDosesToxic || state_.phase == Phase::Completed)
      return;
    if (!state_.stage_one() && state_.phase != Phase::StageTwo) return;
    apply(ClockEvent{std::max(*t, state_.clock)});
  }

  void decide(double t) {
    if (!de_decision_pending(state_) || waiting_for_de_windows(state_, t)) return;
    const Decision d = de_decision(state_, t);
    if (d.verdict == Verdict::Suspend && state_.phase == Phase::StageOneSuspended &&
        state_.suspension == d.reason)
      return;
    apply(DecisionEvent{d, t});
  }

  void enroll(int dose, Origin origin, double t, const LatentDraw& draw) {
    char id[16];
    std::snprintf(id, sizeof id, "P%03d", ++patient_counter_);
    apply(EnrollEvent{id, dose, origin, t});
    const Outcome o = outcome_from_draw(scenario_, onset_, dose, draw);
    const auto& cfg = state_.config;
    if (o.dlt) schedule(t + *o.dlt_time, ToxOutcomeEvent{id, true, t + *o.dlt_time});
    else schedule(t + cfg.dlt_window, ToxOutcomeEvent{id, false, t + cfg.dlt_window});
    const double rt = t + cfg.efficacy_time();
    schedule(rt, ResponseEvent{id, o.response, rt});
  }

  void schedule(double time, TrialEvent e) { queue_.push({time, seq_++, std::move(e)}); }

  const Scenario& scenario_;
  std::vector<TteParams> onset_;
  Rng arrival_rng_;
  Rng patient_rng_;
  Rng alloc_rng_;
  Rng stage_two_rng_;
  TrialState state_;
  std::priority_queue<Pending, std::vector<Pending>, PendingLater> queue_;
  std::uint64_t seq_ = 0;
  double last_arrival_ = 0.0;
  bool first_arrival_ = true;
  int patient_counter_ = 0;
  int turned_away_ = 0;
};

}  // namespace

TrialResult run_trial(const DesignConfig& config, const Scenario& scenario, DesignMode mode,
                      Rng& rng) {
  TrialRunner runner(config, scenario, mode, rng);
  return runner.run();
}

Rng replicate_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

int worker_count() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("BEBOIN_THREADS")) {
    const int requested = std::atoi(env);
    if (requested >= 1) n = std::min(requested, 256);
  }
  return n;
}

namespace {

// The per-replicate numbers that feed the averages.
struct ReplicateSummary {
  int mtd = 0;  // 0 = none
  int obd = 0;
  std::vector<int> per_dose;
  std::vector<int> stage_one;
  int overdosed = 0;
  int total = 0;
  int backfill = 0;
  int turned_away = 0;
  double stage_one_duration = 0.0;
  double duration = 0.0;
  bool terminated = false;
};

}  // namespace

OperatingCharacteristics run_oc(const DesignConfig& config, const Scenario& scenario,
                                DesignMode mode, int replicates, std::uint64_t seed) {
  if (replicates < 1) throw DomainError("run_oc: replicates must be >= 1");
  // Validate only: an unset efficacy time must keep following the scenario's window.
  const DesignConfig cfg = require_valid(config);
  validate_scenario(scenario, cfg.num_doses);
  calibrate_scenario(scenario);  // surface calibration errors before spawning workers

  std::vector<ReplicateSummary> out(static_cast<std::size_t>(replicates));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    try {
      for (int r = next++; r < replicates && !failed; r = next++) {
        Rng rng = replicate_rng(seed, static_cast<std::uint64_t>(r));
        const TrialResult res = run_trial(config, scenario, mode, rng);
        auto& s = out[static_cast<std::size_t>(r)];
        s.mtd = res.mtd.value_or(0);
        s.obd = res.obd.value_or(0);
        s.per_dose = res.patients_per_dose;
        s.stage_one = res.stage_one_per_dose;
        s.overdosed = res.overdosed;
        s.total = res.total_patients;
        s.backfill = res.backfill_patients;
        s.turned_away = res.turned_away;
        s.stage_one_duration = res.stage_one_duration;
        s.duration = res.duration;
        s.terminated = res.terminated;
      }
    } catch (...) {
      if (!failed.exchange(true)) failure = std::current_exception();
    }
  };
  const int workers = std::min(worker_count(), replicates);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Reduce in replicate order so the floating-point sums are reproducible.
  const auto j_max = static_cast<std::size_t>(cfg.num_doses);
  OperatingCharacteristics oc;
  oc.scenario = scenario.name;
  oc.mode = mode;
  oc.replicates = replicates;
  oc.seed = seed;
  oc.mtd_sel_pct.assign(j_max, 0.0);
  oc.obd_sel_pct.assign(j_max, 0.0);
  oc.patients_per_dose.assign(j_max, 0.0);
  oc.stage_one_per_dose.assign(j_max, 0.0);
  double at_mtd = 0, at_obd = 0;
  int terminated = 0;
  for (const auto& s : out) {
    if (s.mtd > 0) oc.mtd_sel_pct[static_cast<std::size_t>(s.mtd - 1)] += 1;
    else oc.mtd_none_pct += 1;
    if (s.obd > 0) oc.obd_sel_pct[static_cast<std::size_t>(s.obd - 1)] += 1;
    else oc.obd_none_pct += 1;
    for (std::size_t j = 0; j < j_max; ++j) {
      oc.patients_per_dose[j] += s.per_dose[j];
      oc.stage_one_per_dose[j] += s.stage_one[j];
    }
    at_mtd += s.per_dose[static_cast<std::size_t>(scenario.true_mtd - 1)];
    at_obd += s.per_dose[static_cast<std::size_t>(scenario.true_obd - 1)];
    oc.patients_overdosed += s.overdosed;
    oc.total_patients += s.total;
    oc.backfill_patients += s.backfill;
    oc.turned_away += s.turned_away;
    oc.stage_one_duration += s.stage_one_duration;
    oc.duration_months += s.duration;
    terminated += s.terminated ? 1 : 0;
  }
  const double R = replicates;
  for (std::size_t j = 0; j < j_max; ++j) {
    oc.mtd_sel_pct[j] *= 100.0 / R;
    oc.obd_sel_pct[j] *= 100.0 / R;
    oc.patients_per_dose[j] /= R;
    oc.stage_one_per_dose[j] /= R;
  }
  oc.mtd_none_pct *= 100.0 / R;
  oc.obd_none_pct *= 100.0 / R;
  oc.correct_mtd_pct = oc.mtd_sel_pct[static_cast<std::size_t>(scenario.true_mtd - 1)];
  oc.correct_obd_pct = oc.obd_sel_pct[static_cast<std::size_t>(scenario.true_obd - 1)];
  oc.patients_at_mtd = at_mtd / R;
  oc.patients_at_obd = at_obd / R;
  oc.patients_overdosed /= R;
  oc.total_patients /= R;
  oc.backfill_patients /= R;
  oc.turned_away /= R;
  oc.stage_one_duration /= R;
  oc.duration_months /= R;
  oc.terminated_pct = 100.0 * terminated / R;
  return oc;
}

std::string oc_csv_header(int num_doses) {
  std::string h =
      "scenario,mode,reps,seed,mtd_sel_pct,obd_sel_pct,patients_at_mtd,patients_at_obd,"
      "patients_overdosed,total_patients,duration_months,backfill_patients,turned_away,"
      "stage_one_duration,terminated_pct,mtd_none_pct";
  for (int j = 1; j <= num_doses; ++j) h += ",mtd_sel_d" + std::to_string(j);
  for (int j = 1; j <= num_doses; ++j) h += ",obd_sel_d" + std::to_string(j);
  for (int j = 1; j <= num_doses; ++j) h += ",patients_d" + std::to_string(j);
  for (int j = 1; j <= num_doses; ++j) h += ",stage_one_d" + std::to_string(j);
  return h;
}

std::string oc_csv_row(const OperatingCharacteristics& oc) {
  std::ostringstream out;
  auto num = [&](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    out << ',' << buf;
  };
  out << oc.scenario << ',' << to_string(oc.mode) << ',' << oc.replicates << ',' << oc.seed;
  num(oc.correct_mtd_pct);
  num(oc.correct_obd_pct);
  num(oc.patients_at_mtd);
  num(oc.patients_at_obd);
  num(oc.patients_overdosed);
  num(oc.total_patients);
  num(oc.duration_months);
  num(oc.backfill_patients);
  num(oc.turned_away);
  num(oc.stage_one_duration);
  num(oc.terminated_pct);
  num(oc.mtd_none_pct);
  for (double v : oc.mtd_sel_pct) num(v);
  for (double v : oc.obd_sel_pct) num(v);
  for (double v : oc.patients_per_dose) num(v);
  for (double v : oc.stage_one_per_dose) num(v);
  return out.str();
}

}  // namespace beboin
