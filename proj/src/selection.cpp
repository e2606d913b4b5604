#include "beboin/selection.hpp"

#include <cmath>
#include <numeric>

namespace beboin {

IsotonicFit isotonic_fit(std::span<const int> y, std::span<const int> n) {
  if (y.size() != n.size()) throw DomainError("isotonic_fit: y and n lengths differ");
  const std::size_t doses = n.size();
  IsotonicFit fit;
  fit.raw_rates.assign(doses, std::nullopt);
  fit.fitted.assign(doses, std::nullopt);
  fit.weights.assign(n.begin(), n.end());

  struct Block {
    double sum;     // weighted sum of rates, i.e. DLT count
    double weight;  // patients
    std::size_t first;
    std::size_t last;
    double mean() const { return sum / weight; }
  };
  std::vector<Block> blocks;
  for (std::size_t j = 0; j < doses; ++j) {
    if (n[j] < 0 || y[j] < 0 || y[j] > n[j]) throw DomainError("isotonic_fit: require 0 <= y <= n");
    if (n[j] == 0) continue;
    fit.raw_rates[j] = static_cast<double>(y[j]) / n[j];
    blocks.push_back({static_cast<double>(y[j]), static_cast<double>(n[j]), j, j});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      Block top = blocks.back();
      blocks.pop_back();
      auto& prev = blocks.back();
      prev.sum += top.sum;
      prev.weight += top.weight;
      prev.last = top.last;
    }
  }
  if (blocks.empty()) throw DomainError("isotonic_fit: no dose has patients");
  for (const auto& b : blocks)
    for (std::size_t j = b.first; j <= b.last; ++j)
      if (n[j] > 0) fit.fitted[j] = b.mean();
  return fit;
}

std::optional<int> select_mtd(const IsotonicFit& fit, double phi, int lowest_eliminated) {
  constexpr double tie_eps = 1e-9;
  if (lowest_eliminated == 1) return std::nullopt;
  std::vector<int> tied;
  double best = INFINITY;
  for (std::size_t j = 0; j < fit.fitted.size(); ++j) {
    const int dose = static_cast<int>(j) + 1;
    if (!fit.fitted[j] || (lowest_eliminated != 0 && dose >= lowest_eliminated)) continue;
    const double dist = std::abs(*fit.fitted[j] - phi);
    if (dist < best - tie_eps) {
      best = dist;
      tied.assign(1, dose);
    } else if (dist <= best + tie_eps) {
      tied.push_back(dose);
    }
  }
  if (tied.empty()) return std::nullopt;
  std::optional<int> highest_below;
  for (int dose : tied)
    if (*fit.fitted[static_cast<std::size_t>(dose - 1)] < phi - tie_eps) highest_below = dose;
  return highest_below ? highest_below : std::optional<int>(tied.front());
}

UtilityPosterior utility_posterior(const OutcomeCounts& counts, const std::array<double, 4>& u,
                                   const std::array<double, 4>& eta) {
  UtilityPosterior post;
  post.counts = counts;
  post.eta = eta;
  double total = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    if (counts[k] < 0) throw DomainError("utility_posterior: negative outcome count");
    total += eta[k] + counts[k];
  }
  for (std::size_t k = 0; k < 4; ++k) {
    post.posterior_means[k] = (eta[k] + counts[k]) / total;
    post.utility += u[k] * post.posterior_means[k];
  }
  return post;
}

int select_obd(const ArmOutcomes& high, const std::optional<ArmOutcomes>& low,
               const std::array<double, 4>& u, const std::array<double, 4>& eta) {
  if (!low) return high.dose;
  const double u_high = utility_posterior(high.counts, u, eta).utility;
  const double u_low = utility_posterior(low->counts, u, eta).utility;
  return u_high > u_low + 1e-12 ? high.dose : low->dose;
}

}  // namespace beboin
