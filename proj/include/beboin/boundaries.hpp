#pragma once

#include "beboin/core.hpp"

namespace beboin {

// BOIN interval: estimates at or below lambda_e escalate, observed rates above
// lambda_d de-escalate.
struct Boundaries {
  double lambda_e = 0.0;
  double lambda_d = 0.0;
  double phi = 0.0;
  double phi1 = 0.0;
  double phi2 = 0.0;
  bool operator==(const Boundaries&) const = default;
};

// Closed-form BOIN boundaries. Requires 0 < phi1 < phi < phi2 < 1.
Boundaries boin_boundaries(double phi, double phi1, double phi2);

Boundaries boin_boundaries(const DesignConfig& config);

// Posterior Pr(p > phi) under Beta(prior_a + y, prior_b + n - y).
double overdose_probability(int y, int n, double phi, double prior_a = 1.0,
                            double prior_b = 1.0);

// Overdose elimination check. Never fires with fewer than 3 evaluable patients.
bool eliminate_dose(int y, int n, double phi, double cutoff, double prior_a = 1.0,
                    double prior_b = 1.0);

bool eliminate_dose(int y, int n, const DesignConfig& config);

}  // namespace beboin
