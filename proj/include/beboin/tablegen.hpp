#pragma once

// Pre-tabulated dose-finding decisions for a single dose, with the TF/MF
// thresholds at which the verdict changes.

#include <optional>
#include <string>
#include <vector>

#include "beboin/core.hpp"

namespace beboin {

// One comparison against standardized follow-up, e.g. "TF >= 0.22".
struct Threshold {
  enum class Op { Less, GreaterEqual };
  Op op = Op::GreaterEqual;
  double value = 0.0;  // exact value; rendered at 2 dp
  bool operator==(const Threshold&) const = default;
};

// A verdict column: never, always, or a conjunction of MF/TF comparisons.
struct Condition {
  enum class Kind { No, Yes, When };
  Kind kind = Kind::No;
  std::optional<Threshold> mf;
  std::optional<Threshold> tf;

  bool holds(double tf_value, double mf_value) const;
  bool operator==(const Condition&) const = default;
};

struct TableRow {
  int n = 0;
  int y_lo = 0;
  int y_hi = 0;
  int m_lo = 0;
  int m_hi = 0;
  Condition suspend;
  Condition escalate;
  Condition stay;
  Condition deescalate;
  bool eliminate = false;

  bool operator==(const TableRow&) const = default;
};

enum class TableFormat { Text, Csv, Markdown };

TableFormat table_format_from_string(const std::string& text);

// Exact TF value at which the imputed rate equals lambda_e. Requires m >= 1.
double escalation_tf_threshold(const DesignConfig& config, int n, int y, int m);

// Rows for every n that is a multiple of the cohort size up to n_max, with
// consecutive pending counts (and then DLT counts) merged when their verdict
// columns agree.
std::vector<TableRow> generate_table(const DesignConfig& config, int n_max);

// Verdict a row prescribes for concrete follow-up values. Suspension wins over
// escalation when both hold.
Verdict table_verdict(const TableRow& row, double tf, double mf);

const TableRow* find_row(const std::vector<TableRow>& rows, int n, int y, int m);

std::string render_table(const std::vector<TableRow>& rows, TableFormat format);

// Inverse of the csv renderer, at the 2 dp precision of the rendering.
std::vector<TableRow> parse_table_csv(const std::string& text);

// A trial whose current dose `dose` holds n patients: y with a DLT already
// seen, `pending_follow_up.size()` pending with the given standardized
// follow-ups, and the rest completed without a DLT. The clock is set so that
// the follow-ups are exact.
TrialState single_dose_state(const DesignConfig& config, int dose, int n, int y,
                             const std::vector<double>& pending_follow_up);

}  // namespace beboin
