#include "beboin/boundaries.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <string>

namespace beboin {

Boundaries boin_boundaries(double phi, double phi1, double phi2) {
  if (!(0.0 < phi1 && phi1 < phi && phi < phi2 && phi2 < 1.0))
    throw DomainError("boin_boundaries: require 0 < phi1 < phi < phi2 < 1 (got phi1=" +
                      std::to_string(phi1) + ", phi=" + std::to_string(phi) +
                      ", phi2=" + std::to_string(phi2) + ")");
  Boundaries b;
  b.phi = phi;
  b.phi1 = phi1;
  b.phi2 = phi2;
  b.lambda_e = std::log((1.0 - phi1) / (1.0 - phi)) /
               std::log(phi * (1.0 - phi1) / (phi1 * (1.0 - phi)));
  b.lambda_d = std::log((1.0 - phi) / (1.0 - phi2)) /
               std::log(phi2 * (1.0 - phi) / (phi * (1.0 - phi2)));
  return b;
}

Boundaries boin_boundaries(const DesignConfig& config) {
  return boin_boundaries(config.target_dlt_rate, config.phi1(), config.phi2());
}

double overdose_probability(int y, int n, double phi, double prior_a, double prior_b) {
  if (y < 0 || n < y) throw DomainError("overdose_probability: require 0 <= y <= n");
  return boost::math::ibetac(prior_a + y, prior_b + (n - y), phi);
}

bool eliminate_dose(int y, int n, double phi, double cutoff, double prior_a, double prior_b) {
  if (n < 3) return false;
  return overdose_probability(y, n, phi, prior_a, prior_b) > cutoff;
}

bool eliminate_dose(int y, int n, const DesignConfig& config) {
  return eliminate_dose(y, n, config.target_dlt_rate, config.elimination_cutoff,
                        config.elimination_prior_a, config.elimination_prior_b);
}

}  // namespace beboin
