#include "beboin/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "beboin/boundaries.hpp"
#include "beboin/document.hpp"
#include "beboin/engine.hpp"
#include "beboin/estimator.hpp"
#include "beboin/selection.hpp"
#include "beboin/sim.hpp"
#include "beboin/tablegen.hpp"

namespace beboin {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::optional<double> phi, phi1_factor, phi2_factor, window, rate, at;
  std::optional<int> cohort, nmax, ncap;
  int reps = 1000;
  std::uint64_t seed = 1;
  std::string mode = "be-boin";
  std::string scenario;
  std::string state_path;
  std::string format = "csv";
  std::string out_path;
  std::string write_dir;
  std::optional<int> n, y;
  std::vector<double> pending;
  bool apply = false;
};

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void require_format(const std::string& format, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (format == a) return;
  std::string list;
  for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
  throw UsageError("--format must be one of: " + list);
}

DesignConfig config_from_flags(const Options& o, bool nmax_is_sample_size) {
  DesignConfig c;
  if (o.phi) c.target_dlt_rate = *o.phi;
  if (o.phi1_factor) c.phi1_factor = *o.phi1_factor;
  if (o.phi2_factor) c.phi2_factor = *o.phi2_factor;
  if (o.cohort) c.cohort_size = *o.cohort;
  if (o.ncap) c.backfill_cap = *o.ncap;
  if (o.window) c.dlt_window = *o.window;
  if (nmax_is_sample_size && o.nmax) c.max_sample_n = *o.nmax;
  return c;
}

bool any_config_flag(const Options& o) {
  return o.phi || o.phi1_factor || o.phi2_factor || o.cohort || o.ncap || o.window || o.nmax;
}

TrialState load_state(const Options& o) {
  if (o.state_path.empty()) throw UsageError("--state is required");
  if (any_config_flag(o)) throw UsageError("design flags cannot be combined with --state; the state carries its config");
  return parse_state(read_text(o.state_path));
}

void echo_config(std::ostream& err, const DesignConfig& config) {
  const DesignConfig resolved = require_valid(config);
  err << "config: " << to_json(resolved).dump() << "\n";
}

std::string run_boundaries(const Options& o, std::ostream& err) {
  require_format(o.format, {"csv", "json", "md"});
  const DesignConfig config = config_from_flags(o, true);
  echo_config(err, config);
  const auto b = boin_boundaries(require_valid(config));
  if (o.format == "json")
    return Json{{"phi", b.phi}, {"phi1", b.phi1}, {"phi2", b.phi2}, {"lambda_e", b.lambda_e}, {"lambda_d", b.lambda_d}}
               .dump(2) + "\n";
  if (o.format == "md")
    return "| phi | phi1 | phi2 | lambda_e | lambda_d |\n|---|---|---|---|---|\n| " + fixed(b.phi, 4) + " | " +
           fixed(b.phi1, 4) + " | " + fixed(b.phi2, 4) + " | " + fixed(b.lambda_e, 4) + " | " +
           fixed(b.lambda_d, 4) + " |\n";
  return "phi,phi1,phi2,lambda_e,lambda_d\n" + fixed(b.phi) + "," + fixed(b.phi1) + "," + fixed(b.phi2) + "," +
         fixed(b.lambda_e) + "," + fixed(b.lambda_d) + "\n";
}

std::string run_table(const Options& o, std::ostream& err) {
  require_format(o.format, {"csv", "json", "md", "text"});
  const DesignConfig config = config_from_flags(o, false);
  echo_config(err, config);
  const int nmax = o.nmax.value_or(9);
  if (nmax < 1 || nmax > 60) throw UsageError("--nmax must lie in [1, 60]");
  const auto rows = generate_table(require_valid(config), nmax);
  if (o.format == "json") return table_to_json(rows).dump(2) + "\n";
  return render_table(rows, table_format_from_string(o.format));
}

std::string run_estimate(const Options& o, std::ostream& err) {
  require_format(o.format, {"csv", "json"});
  std::vector<DoseSummary> summaries;
  double phi = 0.0;
  if (!o.state_path.empty()) {
    if (o.n || o.y || !o.pending.empty()) throw UsageError("--n/--y/--pending cannot be combined with --state");
    const TrialState state = load_state(o);
    echo_config(err, state.config);
    const double at = o.at.value_or(state.clock);
    if (at < state.clock - kTimeEps) throw UsageError("--at precedes the trial clock");
    for (const auto& s : summarize_all(state, at))
      if (s.n > 0) summaries.push_back(s);
    phi = state.config.target_dlt_rate;
  } else {
    if (!o.n) throw UsageError("estimate needs --state, or --n with optional --y and --pending");
    const DesignConfig config = require_valid(config_from_flags(o, true));
    echo_config(err, config);
    std::vector<double> fractions;
    for (double months : o.pending) fractions.push_back(months / config.dlt_window);
    const TrialState state = single_dose_state(config, 1, *o.n, o.y.value_or(0), fractions);
    summaries.push_back(summarize_dose(state, 1, state.clock));
    phi = config.target_dlt_rate;
  }
  if (o.format == "json") {
    Json arr = Json::array();
    for (const auto& s : summaries) {
      Json j = to_json(s);
      j["estimate"] = to_json(imputed_dlt_rate(s, phi));
      arr.push_back(j);
    }
    return arr.dump(2) + "\n";
  }
  std::string csv = "dose,n,y_obs,m_pending,tf,mf,p_tilde,p_hat\n";
  for (const auto& s : summaries) {
    const auto e = imputed_dlt_rate(s, phi);
    csv += std::to_string(s.dose) + "," + std::to_string(s.n) + "," + std::to_string(s.y_obs) + "," +
           std::to_string(s.m_pending) + "," + fixed(s.tf) + "," + fixed(s.mf) + "," + fixed(e.p_tilde) + "," +
           fixed(e.p_hat) + "\n";
  }
  return csv;
}

std::string run_decide(const Options& o, std::ostream& err) {
  const TrialState state = load_state(o);
  echo_config(err, state.config);
  const double at = o.at.value_or(state.clock);
  if (at < state.clock - kTimeEps) throw UsageError("--at precedes the trial clock");
  const Decision d = de_decision(state, at);
  if (o.apply) {
    if (o.format != "csv" && o.format != "json") throw UsageError("--apply writes a JSON state document");
    return dump_state(advance(state, DecisionEvent{d, at}));
  }
  require_format(o.format, {"csv", "json", "md"});
  if (o.format == "json") return to_json(d).dump(2) + "\n";
  if (o.format == "md") {
    std::string md = "**" + to_string(d.verdict) + "** at dose " + std::to_string(d.from_dose) +
                     ", next dose " + std::to_string(d.next_dose);
    if (d.reason != SuspendReason::None) md += " (" + to_string(d.reason) + ")";
    md += "\n\n| rule | outcome | values |\n|---|---|---|\n";
    for (const auto& step : d.trace) {
      std::string values;
      for (const auto& v : step.values) values += (values.empty() ? "" : ", ") + v.name + "=" + fixed(v.value, 4);
      md += "| " + step.rule + " | " + step.outcome + " | " + values + " |\n";
    }
    return md;
  }
  return "verdict,from_dose,next_dose,eliminated_from,reason\n" + to_string(d.verdict) + "," +
         std::to_string(d.from_dose) + "," + std::to_string(d.next_dose) + "," +
         std::to_string(d.eliminated_from) + "," + to_string(d.reason) + "\n";
}

std::string run_select(const Options& o, std::ostream& err) {
  require_format(o.format, {"csv", "json"});
  const TrialState state = load_state(o);
  echo_config(err, state.config);
  TrialState stage_one = state;
  std::erase_if(stage_one.patients, [](const PatientRecord& p) { return p.origin == Origin::StageTwo; });
  const auto sel = select_stage_one(stage_one);
  const std::optional<int> mtd = state.mtd ? state.mtd : sel.mtd;
  std::optional<StageTwoSelection> two;
  if (mtd && !state.stage_one()) two = select_stage_two(state, *mtd);
  const std::optional<int> obd = state.obd;

  if (o.format == "json") {
    Json j;
    j["phase"] = to_string(state.phase);
    j["mtd"] = mtd ? Json(*mtd) : Json(nullptr);
    j["obd"] = obd ? Json(*obd) : Json(nullptr);
    j["isotonic_fit"] = to_json(sel.fit);
    Json u = Json::array();
    if (two) {
      Json hi = to_json(two->high_utility);
      hi["dose"] = two->high.dose;
      u.push_back(hi);
      if (two->low_utility) {
        Json lo = to_json(*two->low_utility);
        lo["dose"] = two->low->dose;
        u.push_back(lo);
      }
    }
    j["utilities"] = u;
    return j.dump(2) + "\n";
  }
  std::string csv = "dose,n_completed,raw_rate,fitted_rate,eliminated,mtd,obd,utility\n";
  for (int d = 1; d <= state.config.num_doses; ++d) {
    const auto k = static_cast<std::size_t>(d - 1);
    const auto opt = [](const std::vector<std::optional<double>>& v, std::size_t i) {
      return i < v.size() && v[i] ? fixed(*v[i]) : std::string();
    };
    std::string utility;
    if (two && two->high.dose == d) utility = fixed(two->high_utility.utility);
    if (two && two->low && two->low->dose == d) utility = fixed(two->low_utility->utility);
    const int lowest = sel.lowest_eliminated;
    csv += std::to_string(d) + "," + (k < sel.fit.weights.size() ? std::to_string(sel.fit.weights[k]) : "0") +
           "," + opt(sel.fit.raw_rates, k) + "," + opt(sel.fit.fitted, k) + "," +
           (lowest != 0 && d >= lowest ? "1" : "0") + "," + (mtd == d ? "1" : "0") + "," +
           (obd == d ? "1" : "0") + "," + utility + "\n";
  }
  return csv;
}

std::vector<Scenario> resolve_scenarios(const std::string& key) {
  if (key.empty()) throw UsageError("--scenario is required (1-8, a name, 'all' or a scenario file)");
  if (key == "all") return scenario_library();
  if (std::filesystem::is_regular_file(key)) return {scenario_from_json(parse_json(read_text(key)))};
  try {
    return {find_scenario(key)};
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

std::string run_simulate(const Options& o, std::ostream& err) {
  require_format(o.format, {"csv", "json"});
  if (o.reps < 1) throw UsageError("--reps must be positive");
  const DesignConfig config = config_from_flags(o, true);
  echo_config(err, config);
  std::vector<DesignMode> modes;
  if (o.mode == "all") modes = {DesignMode::BeBoin, DesignMode::TiteBoin, DesignMode::BfBoin};
  else {
    try {
      modes = {design_mode_from_string(o.mode)};
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }

  std::vector<OperatingCharacteristics> results;
  for (Scenario s : resolve_scenarios(o.scenario)) {
    if (o.window) s.dlt_window = *o.window;
    if (o.rate) s.accrual.rate = *o.rate;
    for (DesignMode m : modes) {
      err << "run: " << Json{{"scenario", s.name}, {"mode", to_string(m)}, {"reps", o.reps}, {"seed", o.seed},
                             {"dlt_window", s.dlt_window}, {"accrual_rate", s.accrual.rate}}.dump()
          << "\n";
      results.push_back(run_oc(config, s, m, o.reps, o.seed));
    }
  }
  if (o.format == "json") {
    Json arr = Json::array();
    for (const auto& r : results) arr.push_back(to_json(r));
    return arr.dump(2) + "\n";
  }
  std::string csv = oc_csv_header(require_valid(config).num_doses) + "\n";
  for (const auto& r : results) csv += oc_csv_row(r) + "\n";
  return csv;
}

std::string run_scenarios(const Options& o, std::ostream& err) {
  require_format(o.format, {"csv", "json"});
  const auto list = o.scenario.empty() ? scenario_library() : resolve_scenarios(o.scenario);
  if (!o.write_dir.empty()) {
    std::filesystem::create_directories(o.write_dir);
    for (const auto& s : list) {
      const auto path = std::filesystem::path(o.write_dir) / (s.name + ".json");
      std::ofstream f(path, std::ios::binary);
      f << to_json(s).dump(2) << "\n";
      if (!f) throw UsageError("cannot write '" + path.string() + "'");
      err << "wrote " << path.string() << "\n";
    }
  }
  if (o.format == "json") {
    Json arr = Json::array();
    for (const auto& s : list) arr.push_back(to_json(s));
    return arr.dump(2) + "\n";
  }
  const auto join = [](const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : ";") + fixed(x, 2);
    return s;
  };
  std::string csv = "name,p_tox,p_eff,true_mtd,true_obd,tte_model,late_fraction,accrual_rate,dlt_window\n";
  for (const auto& s : list)
    csv += s.name + "," + join(s.p_tox) + "," + join(s.p_eff) + "," + std::to_string(s.true_mtd) + "," +
           std::to_string(s.true_obd) + "," + to_string(s.tte_model) + "," + fixed(s.late_fraction, 2) + "," +
           fixed(s.accrual.rate, 2) + "," + fixed(s.dlt_window, 2) + "\n";
  return csv;
}

void add_design_flags(CLI::App* sub, Options& o) {
  sub->add_option("--phi", o.phi, "target DLT rate");
  sub->add_option("--phi1-factor", o.phi1_factor, "phi1 = factor * phi");
  sub->add_option("--phi2-factor", o.phi2_factor, "phi2 = factor * phi");
  sub->add_option("--cohort", o.cohort, "cohort size");
  sub->add_option("--ncap", o.ncap, "backfill cap per dose");
  sub->add_option("--window", o.window, "DLT assessment window (months)");
}

void add_output_flags(CLI::App* sub, Options& o, const std::string& formats) {
  sub->add_option("--format", o.format, "output format: " + formats);
  sub->add_option("--out", o.out_path, "write output to this file instead of stdout");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Backfill time-to-event BOIN dose finding", "beboin"};
  app.require_subcommand(1);
  Options o;

  auto* boundaries = app.add_subcommand("boundaries", "escalation and de-escalation boundaries");
  add_design_flags(boundaries, o);
  add_output_flags(boundaries, o, "csv, json, md");

  auto* table = app.add_subcommand("table", "single-dose decision table");
  add_design_flags(table, o);
  table->add_option("--nmax", o.nmax, "largest patient count in the table (default 9)");
  add_output_flags(table, o, "csv, md, text, json");

  auto* estimate = app.add_subcommand("estimate", "imputed DLT rates");
  add_design_flags(estimate, o);
  estimate->add_option("--state", o.state_path, "trial-state document");
  estimate->add_option("--at", o.at, "evaluation time (months, default: the state clock)");
  estimate->add_option("--n", o.n, "patients at the dose");
  estimate->add_option("--y", o.y, "observed DLTs");
  estimate->add_option("--pending", o.pending, "follow-up (months) of each pending patient")->delimiter(',');
  add_output_flags(estimate, o, "csv, json");

  auto* decide = app.add_subcommand("decide", "dose-escalation decision for a trial state");
  add_design_flags(decide, o);
  decide->add_option("--state", o.state_path, "trial-state document")->required();
  decide->add_option("--at", o.at, "decision time (months, default: the state clock)");
  decide->add_flag("--apply", o.apply, "emit the state with the decision applied");
  add_output_flags(decide, o, "csv, json, md");

  auto* select = app.add_subcommand("select", "MTD and OBD selection for a trial state");
  add_design_flags(select, o);
  select->add_option("--state", o.state_path, "trial-state document")->required();
  add_output_flags(select, o, "csv, json");

  auto* simulate = app.add_subcommand("simulate", "operating characteristics by simulation");
  add_design_flags(simulate, o);
  simulate->add_option("--nmax", o.nmax, "maximum dose-escalation sample size");
  simulate->add_option("--rate", o.rate, "accrual rate (patients per month)");
  simulate->add_option("--reps", o.reps, "replicates");
  simulate->add_option("--seed", o.seed, "random seed");
  simulate->add_option("--mode", o.mode, "be-boin, tite-boin, bf-boin or all");
  simulate->add_option("--scenario", o.scenario, "1-8, a name, 'all' or a scenario file")->required();
  add_output_flags(simulate, o, "csv, json");

  auto* scenarios = app.add_subcommand("scenarios", "list the built-in scenarios");
  scenarios->add_option("--scenario", o.scenario, "one scenario (1-8, a name or a file)");
  scenarios->add_option("--write-dir", o.write_dir, "also write one JSON file per scenario here");
  add_output_flags(scenarios, o, "csv, json");

  std::vector<std::string> argv_store{"beboin"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    std::string result;
    if (*boundaries) result = run_boundaries(o, err);
    else if (*table) result = run_table(o, err);
    else if (*estimate) result = run_estimate(o, err);
    else if (*decide) result = run_decide(o, err);
    else if (*select) result = run_select(o, err);
    else if (*simulate) result = run_simulate(o, err);
    else result = run_scenarios(o, err);

    if (o.out_path.empty()) {
      out << result;
    } else {
      std::ofstream f(o.out_path, std::ios::binary);
      f << result;
      if (!f) throw UsageError("cannot write '" + o.out_path + "'");
    }
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error[usage]: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    for (const auto& i : e.issues()) err << "error[config]: " << i.field << ": " << i.message << "\n";
    return kExitUsage;
  } catch (const CalibrationError& e) {
    err << "error[calibration]: " << e.what() << "\n";
    return kExitDomain;
  } catch (const StateError& e) {
    err << "error[state]: " << e.what() << "\n";
    return kExitDomain;
  } catch (const DomainError& e) {
    err << "error[domain]: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << "\n";
    return kExitDomain;
  }
}

}  // namespace beboin
