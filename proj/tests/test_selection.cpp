#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "beboin/selection.hpp"
#include "support/oracles.hpp"
#include "support/properties.hpp"

using namespace beboin;

namespace {

const std::array<double, 4> kU{100, 60, 40, 0};
const std::array<double, 4> kEta{0.25, 0.25, 0.25, 0.25};

IsotonicFit fit_of(const std::vector<int>& y, const std::vector<int>& n) { return isotonic_fit(y, n); }

IsotonicFit fitted(const std::vector<double>& values) {
  IsotonicFit f;
  for (double v : values) {
    f.raw_rates.push_back(v);
    f.fitted.push_back(v);
    f.weights.push_back(3);
  }
  return f;
}

using props::for_each_instance;

}  // namespace

TEST_CASE("isotonic fit examples") {
  auto f = fit_of({0, 2, 1}, {3, 6, 6});
  CHECK(*f.fitted[0] == 0.0);
  CHECK(*f.fitted[1] == doctest::Approx(0.25));
  CHECK(*f.fitted[2] == doctest::Approx(0.25));

  auto mono = fit_of({0, 1, 2}, {3, 6, 6});
  for (std::size_t j = 0; j < 3; ++j) CHECK(*mono.fitted[j] == *mono.raw_rates[j]);

  auto single = fit_of({2}, {7});
  CHECK(*single.fitted[0] == doctest::Approx(2.0 / 7));

  auto gap = fit_of({1, 0, 0}, {3, 0, 3});
  CHECK(*gap.fitted[0] == doctest::Approx(1.0 / 6));
  CHECK_FALSE(gap.fitted[1].has_value());
  CHECK(*gap.fitted[2] == doctest::Approx(1.0 / 6));

  CHECK_THROWS_AS(fit_of({0, 0}, {0, 0}), DomainError);
  CHECK_THROWS_AS(fit_of({4}, {3}), DomainError);
}

TEST_CASE("PAVA matches the exhaustive block-partition oracle for J <= 4, n <= 6") {
  int instances = 0, mismatches = 0;
  for (int doses = 1; doses <= 4; ++doses) {
    for_each_instance(doses, 6, [&](const std::vector<int>& y, const std::vector<int>& n) {
      ++instances;
      const auto got = isotonic_fit(y, n).fitted;
      const auto want = oracle::isotonic_by_partitions(y, n);
      for (std::size_t j = 0; j < n.size(); ++j) {
        if (got[j].has_value() != want[j].has_value() ||
            (got[j] && std::abs(*got[j] - *want[j]) > 1e-12))
          ++mismatches;
      }
    });
  }
  CHECK(instances == 28 - 1 + 28 * 28 - 1 + 28 * 28 * 28 - 1 + 28 * 28 * 28 * 28 - 1);
  CHECK(mismatches == 0);
}

TEST_CASE("PAVA matches the monotone grid search within one grid step") {
  int mismatches = 0;
  for (int doses = 1; doses <= 3; ++doses) {
    for_each_instance(doses, 6, [&](const std::vector<int>& y, const std::vector<int>& n) {
      const auto got = isotonic_fit(y, n).fitted;
      const auto grid = oracle::isotonic_by_grid(y, n, 1000);
      for (std::size_t j = 0; j < n.size(); ++j)
        if (got[j] && std::abs(*got[j] - *grid[j]) > 1e-3 + 1e-12) ++mismatches;
    });
  }
  // Four doses: a random sample here, the full enumeration runs in the acceptance check.
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20000; ++i) {
    std::vector<int> y(4), n(4);
    for (int j = 0; j < 4; ++j) {
      n[j] = std::uniform_int_distribution<int>(0, 6)(rng);
      y[j] = std::uniform_int_distribution<int>(0, n[j])(rng);
    }
    if (n[0] + n[1] + n[2] + n[3] == 0) continue;
    const auto got = isotonic_fit(y, n).fitted;
    const auto grid = oracle::isotonic_by_grid(y, n, 1000);
    for (std::size_t j = 0; j < 4; ++j)
      if (got[j] && std::abs(*got[j] - *grid[j]) > 1e-3 + 1e-12) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("fitted values are monotone and preserve block means") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5000; ++i) {
    const int doses = std::uniform_int_distribution<int>(1, 8)(rng);
    std::vector<int> y(doses), n(doses);
    for (int j = 0; j < doses; ++j) {
      n[j] = std::uniform_int_distribution<int>(1, 15)(rng);
      y[j] = std::uniform_int_distribution<int>(0, n[j])(rng);
    }
    const auto fit = isotonic_fit(y, n);
    double total_fit = 0, total_y = 0;
    for (int j = 0; j < doses; ++j) {
      if (j > 0) REQUIRE(*fit.fitted[j] >= *fit.fitted[j - 1] - 1e-12);
      total_fit += *fit.fitted[j] * n[j];
      total_y += y[j];
    }
    REQUIRE(total_fit == doctest::Approx(total_y));
  }
}

TEST_CASE("MTD selection examples") {
  CHECK(select_mtd(fitted({0.10, 0.25, 0.40}), 0.25) == 2);
  CHECK(select_mtd(fitted({0.0, 0.25, 0.25}), 0.25) == 2);
  CHECK(select_mtd(fitted({0.10, 0.25, 0.40}), 0.25, 1) == std::nullopt);
  CHECK(select_mtd(fitted({0.10, 0.25, 0.40}), 0.25, 2) == 1);
  // Equidistant below and above: the dose below the target wins.
  CHECK(select_mtd(fitted({0.20, 0.30}), 0.25) == 1);
  // Two tied doses below the target: the higher one.
  CHECK(select_mtd(fitted({0.20, 0.20, 0.50}), 0.25) == 2);
  // Two tied doses above the target: the lower one.
  CHECK(select_mtd(fitted({0.05, 0.30, 0.30}), 0.25) == 2);

  IsotonicFit untried = fit_of({0, 0, 0}, {3, 0, 0});
  CHECK(select_mtd(untried, 0.25) == 1);
}

TEST_CASE("MTD selection is invariant to scaling the sample sizes") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 5000; ++i) {
    const int doses = std::uniform_int_distribution<int>(1, 6)(rng);
    std::vector<int> y(doses), n(doses);
    for (int j = 0; j < doses; ++j) {
      n[j] = std::uniform_int_distribution<int>(0, 9)(rng);
      y[j] = std::uniform_int_distribution<int>(0, n[j])(rng);
    }
    if (std::all_of(n.begin(), n.end(), [](int v) { return v == 0; })) continue;
    const auto base = select_mtd(isotonic_fit(y, n), 0.25);
    for (int k = 2; k <= 4; ++k) {
      std::vector<int> yk(y), nk(n);
      for (int j = 0; j < doses; ++j) {
        yk[j] *= k;
        nk[j] *= k;
      }
      REQUIRE(select_mtd(isotonic_fit(yk, nk), 0.25) == base);
    }
  }
}

TEST_CASE("utility posterior examples") {
  auto empty = utility_posterior({0, 0, 0, 0}, kU, kEta);
  CHECK(empty.utility == doctest::Approx(50.0));
  auto mixed = utility_posterior({8, 2, 4, 6}, kU, kEta);
  CHECK(mixed.utility == doctest::Approx((100 * 8.25 + 60 * 2.25 + 40 * 4.25) / 21));
  CHECK(std::round(mixed.utility * 100) / 100 == doctest::Approx(53.81));
  auto best = utility_posterior({20, 0, 0, 0}, kU, kEta);
  CHECK(best.utility == doctest::Approx(2050.0 / 21));
  CHECK(std::round(best.utility * 100) / 100 == doctest::Approx(97.62));
  double total = 0;
  for (double p : mixed.posterior_means) total += p;
  CHECK(total == doctest::Approx(1.0));
  CHECK_THROWS_AS(utility_posterior({-1, 0, 0, 0}, kU, kEta), DomainError);
}

TEST_CASE("OBD selection examples") {
  const ArmOutcomes high{3, {6, 2, 6, 6}};
  const ArmOutcomes low{2, {8, 1, 7, 4}};
  CHECK(utility_posterior(low.counts, kU, kEta).utility > utility_posterior(high.counts, kU, kEta).utility);
  CHECK(select_obd(high, low, kU, kEta) == 2);
  CHECK(select_obd(ArmOutcomes{3, {12, 1, 4, 3}}, low, kU, kEta) == 3);
  CHECK(select_obd(ArmOutcomes{1, {5, 5, 5, 5}}, std::nullopt, kU, kEta) == 1);
  CHECK(select_obd(ArmOutcomes{4, {5, 1, 7, 7}}, ArmOutcomes{3, {5, 1, 7, 7}}, kU, kEta) == 3);
}

TEST_CASE("OBD selection is invariant under positive affine maps of the scores") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> count(0, 20);
  std::uniform_real_distribution<double> scale(0.1, 10.0), shift(-50.0, 50.0);
  int checked = 0;
  for (int i = 0; i < 10000; ++i) {
    ArmOutcomes high{3, {count(rng), count(rng), count(rng), count(rng)}};
    ArmOutcomes low{2, {count(rng), count(rng), count(rng), count(rng)}};
    const double gap = utility_posterior(high.counts, kU, kEta).utility -
                       utility_posterior(low.counts, kU, kEta).utility;
    if (std::abs(gap) < 1e-6) continue;  // exact ties are a separate example
    ++checked;
    const double a = scale(rng), b = shift(rng);
    std::array<double, 4> mapped{};
    for (int k = 0; k < 4; ++k) mapped[k] = a * kU[k] + b;
    REQUIRE(select_obd(high, low, mapped, kEta) == select_obd(high, low, kU, kEta));
  }
  CHECK(checked > 9000);
}
