#pragma once

#include <span>

#include "beboin/core.hpp"

namespace beboin {

struct ToxEstimate {
  double p_hat = 0.0;    // imputed DLT rate
  double p_tilde = 0.0;  // posterior mean feeding the imputation
  int y_obs = 0;
  int n = 0;
  int m_pending = 0;
  double tf = 0.0;
};

// Beta(0.5 phi, 1 - 0.5 phi) posterior mean over completed patients.
double posterior_mean_tox(int y_obs, int n, int m_pending, double phi);

// Single-dose imputed rate: (y + odds(p_tilde) * (m - tf)) / n.
ToxEstimate imputed_dlt_rate(const DoseSummary& summary, double phi);

// Pooled imputed rate over a contiguous run of doses; each dose imputes with
// its own posterior mean.
double pooled_rate(std::span<const DoseSummary> summaries, double phi);

struct PendingImputation {
  double exact = 0.0;
  double approximate = 0.0;
};

// Expected DLT indicator of a pending patient followed for t of the window tau.
PendingImputation expected_pending_fraction(double t, double tau, double p);

}  // namespace beboin
