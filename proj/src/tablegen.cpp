#include "beboin/tablegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <tuple>

#include "beboin/boundaries.hpp"
#include "beboin/engine.hpp"
#include "beboin/estimator.hpp"

namespace beboin {

namespace {

double round_half_up_2dp(double x) { return std::floor(x * 100.0 + 0.5 + 1e-9) / 100.0; }

std::string fixed2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", round_half_up_2dp(x));
  return buf;
}

struct Glyphs {
  const char* ge;
  const char* le;
  const char* dash;
  const char* conj;
};

constexpr Glyphs kUnicode{"≥", "≤", "–", " & "};
constexpr Glyphs kAscii{">=", "<=", "-", " & "};

std::string render_threshold(const char* name, const Threshold& t, const Glyphs& g) {
  return std::string(name) + (t.op == Threshold::Op::Less ? " < " : std::string(" ") + g.ge + " ") +
         fixed2(t.value);
}

std::string render_condition(const Condition& c, const Glyphs& g) {
  switch (c.kind) {
    case Condition::Kind::No: return "No";
    case Condition::Kind::Yes: return "Yes";
    case Condition::Kind::When: break;
  }
  std::string out;
  if (c.mf) out = render_threshold("MF", *c.mf, g);
  if (c.tf) out += (out.empty() ? "" : g.conj) + render_threshold("TF", *c.tf, g);
  return out;
}

std::string render_dlt_range(const TableRow& r, const Glyphs& g) {
  if (r.y_lo == r.y_hi) return std::to_string(r.y_lo);
  if (r.y_hi == r.n) return std::string(g.ge) + " " + std::to_string(r.y_lo);
  if (r.y_hi == r.y_lo + 1) return std::to_string(r.y_lo) + ", " + std::to_string(r.y_hi);
  return std::to_string(r.y_lo) + g.dash + std::to_string(r.y_hi);
}

std::string render_pending_range(const TableRow& r, const Glyphs& g) {
  if (r.m_lo == r.m_hi) return std::to_string(r.m_lo);
  if (r.m_lo == 0) return std::string(g.le) + " " + std::to_string(r.m_hi);
  if (r.m_hi == r.n - r.y_lo) return std::string(g.ge) + " " + std::to_string(r.m_lo);
  if (r.m_hi == r.m_lo + 1) return std::to_string(r.m_lo) + ", " + std::to_string(r.m_hi);
  return std::to_string(r.m_lo) + g.dash + std::to_string(r.m_hi);
}

// Verdict columns of one (n, y, m) cell.
TableRow cell(const DesignConfig& cfg, const Boundaries& b, int n, int y, int m) {
  TableRow row;
  row.n = n;
  row.y_lo = row.y_hi = y;
  row.m_lo = row.m_hi = m;
  const double observed_rate = static_cast<double>(y) / n;
  if (eliminate_dose(y, n, cfg)) {
    row.eliminate = true;
    row.deescalate.kind = Condition::Kind::Yes;
    return row;
  }
  if (observed_rate > b.lambda_d) {
    row.deescalate.kind = Condition::Kind::Yes;
    return row;
  }
  if (cfg.rules.suspension && static_cast<double>(n - m) / n < cfg.suspend_observed_fraction) {
    row.suspend.kind = Condition::Kind::Yes;
    return row;
  }

  // Escalation needs TF >= t_star; TF ranges over [0, m].
  std::optional<Threshold> tf_ge, tf_lt;
  bool escalation_possible;
  if (m == 0) {
    escalation_possible = observed_rate <= b.lambda_e;
  } else {
    const double t_star = escalation_tf_threshold(cfg, n, y, m);
    escalation_possible = t_star <= m + kTimeEps;
    if (escalation_possible && t_star > kTimeEps) {
      tf_ge = Threshold{Threshold::Op::GreaterEqual, t_star};
      tf_lt = Threshold{Threshold::Op::Less, t_star};
    }
  }
  if (!escalation_possible) {
    row.stay.kind = Condition::Kind::Yes;
    return row;
  }
  const bool rule2 = cfg.rules.suspension && m > 0;
  if (!rule2 && !tf_ge) {
    row.escalate.kind = Condition::Kind::Yes;
    return row;
  }
  row.escalate.kind = Condition::Kind::When;
  row.escalate.tf = tf_ge;
  if (rule2) {
    row.escalate.mf = Threshold{Threshold::Op::GreaterEqual, cfg.suspend_min_followup};
    row.suspend.kind = Condition::Kind::When;
    row.suspend.mf = Threshold{Threshold::Op::Less, cfg.suspend_min_followup};
    row.suspend.tf = tf_ge;
  }
  if (tf_lt) {
    row.stay.kind = Condition::Kind::When;
    row.stay.tf = tf_lt;
  }
  return row;
}

bool same_verdicts(const TableRow& a, const TableRow& b) {
  return a.suspend == b.suspend && a.escalate == b.escalate && a.stay == b.stay &&
         a.deescalate == b.deescalate && a.eliminate == b.eliminate;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

int parse_int(const std::string& s) {
  std::size_t used = 0;
  const int v = std::stoi(s, &used);
  if (used != s.size()) throw DomainError("decision table csv: bad integer '" + s + "'");
  return v;
}

// Parses "k", ">= k", "<= k", "a, b", "a-b". `open_hi` resolves ">= k".
std::pair<int, int> parse_range(const std::string& s, int open_hi) {
  try {
    if (s.rfind(">= ", 0) == 0) return {parse_int(s.substr(3)), open_hi};
    if (s.rfind("<= ", 0) == 0) return {0, parse_int(s.substr(3))};
    if (auto pos = s.find(", "); pos != std::string::npos)
      return {parse_int(s.substr(0, pos)), parse_int(s.substr(pos + 2))};
    if (auto pos = s.find('-'); pos != std::string::npos)
      return {parse_int(s.substr(0, pos)), parse_int(s.substr(pos + 1))};
    const int k = parse_int(s);
    return {k, k};
  } catch (const std::invalid_argument&) {
    throw DomainError("decision table csv: bad range '" + s + "'");
  }
}

Condition parse_condition(const std::string& s) {
  Condition c;
  if (s == "No") return c;
  if (s == "Yes") {
    c.kind = Condition::Kind::Yes;
    return c;
  }
  c.kind = Condition::Kind::When;
  std::istringstream in(s);
  std::string name, op, value, amp;
  while (in >> name >> op >> value) {
    Threshold t;
    if (op == "<") t.op = Threshold::Op::Less;
    else if (op == ">=") t.op = Threshold::Op::GreaterEqual;
    else throw DomainError("decision table csv: bad comparison '" + op + "'");
    t.value = std::stod(value);
    if (name == "MF") c.mf = t;
    else if (name == "TF") c.tf = t;
    else throw DomainError("decision table csv: unknown quantity '" + name + "'");
    if (!(in >> amp)) break;
    if (amp != "&") throw DomainError("decision table csv: expected '&' in '" + s + "'");
  }
  if (!c.mf && !c.tf) throw DomainError("decision table csv: empty condition '" + s + "'");
  return c;
}

}  // namespace

bool Condition::holds(double tf_value, double mf_value) const {
  if (kind != Kind::When) return kind == Kind::Yes;
  auto check = [](const Threshold& t, double v) {
    return t.op == Threshold::Op::Less ? v < t.value : v >= t.value;
  };
  return (!mf || check(*mf, mf_value)) && (!tf || check(*tf, tf_value));
}

TableFormat table_format_from_string(const std::string& text) {
  if (text == "text" || text == "txt") return TableFormat::Text;
  if (text == "csv") return TableFormat::Csv;
  if (text == "md" || text == "markdown") return TableFormat::Markdown;
  throw DomainError("unknown table format '" + text + "'");
}

double escalation_tf_threshold(const DesignConfig& config, int n, int y, int m) {
  if (m < 1) throw DomainError("escalation_tf_threshold: requires a pending patient");
  const double lambda_e = boin_boundaries(config).lambda_e;
  const double p_tilde = posterior_mean_tox(y, n, m, config.target_dlt_rate);
  return m - (n * lambda_e - y) * (1.0 - p_tilde) / p_tilde;
}

std::vector<TableRow> generate_table(const DesignConfig& config, int n_max) {
  const auto cfg = require_valid(config);
  if (n_max < cfg.cohort_size || n_max % cfg.cohort_size != 0)
    throw DomainError("generate_table: n_max must be a positive multiple of the cohort size");
  const auto bounds = boin_boundaries(cfg);

  std::vector<TableRow> rows;
  for (int n = cfg.cohort_size; n <= n_max; n += cfg.cohort_size) {
    // Per DLT count, merge runs of pending counts with identical verdicts.
    std::vector<std::vector<TableRow>> by_y;
    for (int y = 0; y <= n; ++y) {
      std::vector<TableRow> groups;
      for (int m = 0; m <= n - y; ++m) {
        TableRow c = cell(cfg, bounds, n, y, m);
        if (!groups.empty() && same_verdicts(groups.back(), c)) groups.back().m_hi = m;
        else groups.push_back(c);
      }
      by_y.push_back(std::move(groups));
    }
    // Merge consecutive DLT counts whose verdicts are uniform over all m.
    std::vector<TableRow> block;
    bool last_uniform = false;
    for (int y = 0; y <= n; ++y) {
      const auto& groups = by_y[static_cast<std::size_t>(y)];
      const bool uniform = groups.size() == 1;
      if (uniform && last_uniform && same_verdicts(block.back(), groups.front())) {
        block.back().y_hi = y;
      } else {
        block.insert(block.end(), groups.begin(), groups.end());
      }
      last_uniform = uniform;
    }
    rows.insert(rows.end(), block.begin(), block.end());
  }
  return rows;
}

Verdict table_verdict(const TableRow& row, double tf, double mf) {
  if (row.eliminate) return Verdict::Eliminate;
  if (row.deescalate.holds(tf, mf)) return Verdict::DeEscalate;
  if (row.suspend.holds(tf, mf)) return Verdict::Suspend;
  if (row.escalate.holds(tf, mf)) return Verdict::Escalate;
  if (row.stay.holds(tf, mf)) return Verdict::Stay;
  throw DomainError("table_verdict: no column holds for tf=" + std::to_string(tf) +
                    ", mf=" + std::to_string(mf));
}

const TableRow* find_row(const std::vector<TableRow>& rows, int n, int y, int m) {
  for (const auto& r : rows)
    if (r.n == n && y >= r.y_lo && y <= r.y_hi && m >= r.m_lo && m <= r.m_hi && m <= n - y)
      return &r;
  return nullptr;
}

std::string render_table(const std::vector<TableRow>& rows, TableFormat format) {
  static const std::vector<std::string> s1_header{"No. patients", "No. DLT",  "No. pending",
                                                  "Suspension",   "Escalation", "Stay",
                                                  "De-escalation"};
  std::ostringstream out;
  if (format == TableFormat::Csv) {
    out << "n,dlt,pending,suspend,escalate,stay,deescalate,eliminate\n";
    for (const auto& r : rows) {
      out << r.n << ',' << csv_field(render_dlt_range(r, kAscii)) << ','
          << csv_field(render_pending_range(r, kAscii)) << ','
          << csv_field(render_condition(r.suspend, kAscii)) << ','
          << csv_field(render_condition(r.escalate, kAscii)) << ','
          << csv_field(render_condition(r.stay, kAscii)) << ','
          << csv_field(render_condition(r.deescalate, kAscii)) << ','
          << (r.eliminate ? "Yes" : "No") << '\n';
    }
    return out.str();
  }

  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    std::string de = render_condition(r.deescalate, kUnicode);
    if (r.eliminate) de += " & Eliminate";
    cells.push_back({std::to_string(r.n), render_dlt_range(r, kUnicode),
                     render_pending_range(r, kUnicode), render_condition(r.suspend, kUnicode),
                     render_condition(r.escalate, kUnicode), render_condition(r.stay, kUnicode),
                     de});
  }

  if (format == TableFormat::Markdown) {
    auto line = [&](const std::vector<std::string>& v) {
      out << '|';
      for (const auto& s : v) out << ' ' << s << " |";
      out << '\n';
    };
    line(s1_header);
    out << '|';
    for (std::size_t i = 0; i < s1_header.size(); ++i) out << " --- |";
    out << '\n';
    for (const auto& c : cells) line(c);
    return out.str();
  }

  // Plain text: columns padded to their widest entry, counting code points.
  auto width = [](const std::string& s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char ch) { return (ch & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> widths;
  for (const auto& h : s1_header) widths.push_back(width(h));
  for (const auto& c : cells)
    for (std::size_t i = 0; i < c.size(); ++i) widths[i] = std::max(widths[i], width(c[i]));
  auto line = [&](const std::vector<std::string>& v) {
    std::string text;
    for (std::size_t i = 0; i < v.size(); ++i) {
      text += v[i];
      if (i + 1 < v.size()) text += std::string(widths[i] - width(v[i]) + 2, ' ');
    }
    out << text << '\n';
  };
  line(s1_header);
  std::size_t total = 0;
  for (auto w : widths) total += w + 2;
  const std::string rule(total - 2, '-');
  out << rule << '\n';
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0 && rows[i].n != rows[i - 1].n) out << rule << '\n';
    line(cells[i]);
  }
  return out.str();
}

std::vector<TableRow> parse_table_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line).size() != 8)
    throw DomainError("decision table csv: missing or malformed header");
  std::vector<TableRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw DomainError("decision table csv: expected 8 fields in '" + line + "'");
    TableRow r;
    r.n = parse_int(f[0]);
    std::tie(r.y_lo, r.y_hi) = parse_range(f[1], r.n);
    std::tie(r.m_lo, r.m_hi) = parse_range(f[2], r.n - r.y_lo);
    r.suspend = parse_condition(f[3]);
    r.escalate = parse_condition(f[4]);
    r.stay = parse_condition(f[5]);
    r.deescalate = parse_condition(f[6]);
    if (f[7] != "Yes" && f[7] != "No") throw DomainError("decision table csv: bad eliminate flag");
    r.eliminate = f[7] == "Yes";
    rows.push_back(r);
  }
  return rows;
}

TrialState single_dose_state(const DesignConfig& config, int dose, int n, int y,
                             const std::vector<double>& pending_follow_up) {
  TrialState state = new_trial(config);
  const double tau = state.config.dlt_window;
  const int m = static_cast<int>(pending_follow_up.size());
  if (dose < 1 || dose > state.config.num_doses) throw DomainError("single_dose_state: dose out of range");
  if (y < 0 || m < 0 || y + m > n) throw DomainError("single_dose_state: require y + m <= n");
  const double now = 2.0 * tau;
  state.current_dose = dose;
  state.clock = now;
  state.cohort_enrolled = state.config.cohort_size;
  for (int i = 0; i < n; ++i) {
    PatientRecord p;
    p.id = "p" + std::to_string(i + 1);
    p.dose = dose;
    p.origin = Origin::DoseEscalation;
    if (i < y) {
      p.enroll_time = now - tau;
      p.tox = ToxStatus::Dlt;
      p.time_to_dlt = 0.5 * tau;
    } else if (i < y + m) {
      const double f = pending_follow_up[static_cast<std::size_t>(i - y)];
      if (f < 0.0 || f >= 1.0) throw DomainError("single_dose_state: pending follow-up must lie in [0, 1)");
      p.enroll_time = now - f * tau;
    } else {
      p.enroll_time = now - tau;
      p.tox = ToxStatus::NoDlt;
    }
    state.patients.push_back(std::move(p));
  }
  return state;
}

}  // namespace beboin
