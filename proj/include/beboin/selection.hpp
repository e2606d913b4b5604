#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "beboin/core.hpp"

namespace beboin {

// Weighted isotonic fit of per-dose DLT rates. Untried doses carry no value.
struct IsotonicFit {
  std::vector<std::optional<double>> raw_rates;
  std::vector<std::optional<double>> fitted;
  std::vector<int> weights;
};

// Pool-adjacent-violators with weights n_j; doses with n_j = 0 are skipped.
IsotonicFit isotonic_fit(std::span<const int> y, std::span<const int> n);

// Closest fitted rate to phi among tried, non-eliminated doses. Ties go to the
// highest tied dose below phi, otherwise the lowest tied dose.
std::optional<int> select_mtd(const IsotonicFit& fit, double phi, int lowest_eliminated = 0);

// Outcome categories in order of desirability: (response, no DLT),
// (response, DLT), (no response, no DLT), (no response, DLT).
using OutcomeCounts = std::array<int, 4>;

struct UtilityPosterior {
  OutcomeCounts counts{};
  std::array<double, 4> eta{};
  std::array<double, 4> posterior_means{};
  double utility = 0.0;
};

UtilityPosterior utility_posterior(const OutcomeCounts& counts, const std::array<double, 4>& u,
                                   const std::array<double, 4>& eta);

struct ArmOutcomes {
  int dose = 1;
  OutcomeCounts counts{};
};

// Higher posterior utility wins; ties and a missing lower arm resolve to the
// lower dose and the high arm respectively.
int select_obd(const ArmOutcomes& high, const std::optional<ArmOutcomes>& low,
               const std::array<double, 4>& u, const std::array<double, 4>& eta);

}  // namespace beboin
