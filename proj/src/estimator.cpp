#include "beboin/estimator.hpp"

#include <algorithm>

namespace beboin {

namespace {

double imputation_term(const DoseSummary& s, double phi) {
  if (s.m_pending == 0) return 0.0;
  const double p_tilde = posterior_mean_tox(s.y_obs, s.n, s.m_pending, phi);
  return p_tilde / (1.0 - p_tilde) * (s.m_pending - s.tf);
}

}  // namespace

double posterior_mean_tox(int y_obs, int n, int m_pending, double phi) {
  if (y_obs < 0 || m_pending < 0 || y_obs > n - m_pending)
    throw DomainError("posterior_mean_tox: observed DLTs exceed completed patients");
  const double alpha = 0.5 * phi;
  const double beta = 1.0 - 0.5 * phi;
  return (alpha + y_obs) / (alpha + beta + (n - m_pending));
}

ToxEstimate imputed_dlt_rate(const DoseSummary& summary, double phi) {
  if (summary.n < 1) throw DomainError("imputed_dlt_rate: dose has no patients");
  ToxEstimate est;
  est.y_obs = summary.y_obs;
  est.n = summary.n;
  est.m_pending = summary.m_pending;
  est.tf = summary.tf;
  est.p_tilde = posterior_mean_tox(summary.y_obs, summary.n, summary.m_pending, phi);
  est.p_hat = (summary.y_obs + imputation_term(summary, phi)) / summary.n;
  return est;
}

double pooled_rate(std::span<const DoseSummary> summaries, double phi) {
  if (summaries.empty()) throw DomainError("pooled_rate: empty dose range");
  double numerator = 0.0;
  int denominator = 0;
  for (const auto& s : summaries) {
    numerator += s.y_obs + imputation_term(s, phi);
    denominator += s.n;
  }
  if (denominator == 0) throw DomainError("pooled_rate: no patients in dose range");
  return numerator / denominator;
}

PendingImputation expected_pending_fraction(double t, double tau, double p) {
  if (!(tau > 0.0) || t < 0.0 || t > tau + kTimeEps)
    throw DomainError("expected_pending_fraction: require 0 <= t <= tau");
  if (p < 0.0 || p >= 1.0) throw DomainError("expected_pending_fraction: require 0 <= p < 1");
  const double remaining = 1.0 - std::min(t, tau) / tau;
  PendingImputation out;
  out.exact = remaining * p / (remaining * p + (1.0 - p));
  out.approximate = remaining * p / (1.0 - p);
  return out;
}

}  // namespace beboin
