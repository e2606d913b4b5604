#include <doctest.h>

#include <cmath>
#include <vector>

#include "beboin/boundaries.hpp"
#include "beboin/estimator.hpp"
#include "beboin/tablegen.hpp"
#include "support/properties.hpp"

using namespace beboin;

namespace {

constexpr int kCases = 10000;
constexpr double kPhi = 0.25;

using props::summary;

}  // namespace

TEST_CASE("posterior mean examples") {
  CHECK(posterior_mean_tox(1, 6, 1, kPhi) == doctest::Approx(0.1875));
  CHECK(posterior_mean_tox(0, 0, 0, kPhi) == doctest::Approx(0.125));
  CHECK(posterior_mean_tox(1, 6, 2, kPhi) == doctest::Approx(0.225));
  CHECK_THROWS_AS(posterior_mean_tox(3, 4, 2, kPhi), DomainError);
  CHECK_THROWS_AS(posterior_mean_tox(-1, 4, 0, kPhi), DomainError);
}

TEST_CASE("imputed rate examples") {
  const double le = boin_boundaries(DesignConfig{}).lambda_e;
  const double t611 = escalation_tf_threshold(DesignConfig{}, 6, 1, 1);
  const double t914 = escalation_tf_threshold(DesignConfig{}, 9, 1, 4);
  CHECK(t611 == doctest::Approx(0.216511).epsilon(1e-5));
  CHECK(t914 == doctest::Approx(0.658099).epsilon(1e-5));
  CHECK(imputed_dlt_rate(summary(6, 1, 1, t611), kPhi).p_hat == doctest::Approx(le).epsilon(1e-12));
  CHECK(imputed_dlt_rate(summary(9, 1, 4, t914), kPhi).p_hat == doctest::Approx(le).epsilon(1e-12));
  CHECK(imputed_dlt_rate(summary(6, 1, 1, 0.2168), kPhi).p_hat == doctest::Approx(0.19679).epsilon(1e-4));
  CHECK(imputed_dlt_rate(summary(6, 1, 0, 0.0), kPhi).p_hat == 1.0 / 6.0);
  CHECK_THROWS_AS(imputed_dlt_rate(summary(0, 0, 0, 0.0), kPhi), DomainError);
}

TEST_CASE("pooled rate examples") {
  const std::vector<DoseSummary> worked{summary(5, 2, 0, 0.0), summary(3, 0, 0, 0.0)};
  CHECK(pooled_rate(worked, kPhi) == doctest::Approx(0.25));

  const std::vector<DoseSummary> pending{summary(6, 1, 1, 0.5), summary(3, 0, 0, 0.0)};
  CHECK(pooled_rate(pending, kPhi) == doctest::Approx((1 + 0.1875 / 0.8125 * 0.5) / 9));
  CHECK(pooled_rate(pending, kPhi) == doctest::Approx(0.12393).epsilon(1e-4));

  // Each dose imputes with its own posterior mean, not a pooled one.
  const std::vector<DoseSummary> two{summary(6, 1, 2, 0.4), summary(4, 0, 3, 1.2)};
  const double pt1 = (0.125 + 1) / 5.0;
  const double pt2 = 0.125 / 2.0;
  const double expected = (1 + pt1 / (1 - pt1) * 1.6 + pt2 / (1 - pt2) * 1.8) / 10;
  CHECK(pooled_rate(two, kPhi) == doctest::Approx(expected).epsilon(1e-14));

  CHECK_THROWS_AS(pooled_rate(std::vector<DoseSummary>{}, kPhi), DomainError);
  CHECK_THROWS_AS(pooled_rate(std::vector<DoseSummary>{summary(0, 0, 0, 0)}, kPhi), DomainError);
}

TEST_CASE("expected pending fraction examples") {
  auto full = expected_pending_fraction(3.0, 3.0, 0.3);
  CHECK(full.exact == 0.0);
  CHECK(full.approximate == 0.0);
  auto fresh = expected_pending_fraction(0.0, 3.0, 0.25);
  CHECK(fresh.approximate == doctest::Approx(1.0 / 3.0));
  CHECK(fresh.exact == doctest::Approx(0.25));
  auto zero = expected_pending_fraction(1.0, 3.0, 0.0);
  CHECK(zero.exact == 0.0);
  CHECK(zero.approximate == 0.0);
  CHECK_THROWS_AS(expected_pending_fraction(1.0, 3.0, 1.0), DomainError);
  CHECK_THROWS_AS(expected_pending_fraction(4.0, 3.0, 0.2), DomainError);
}

TEST_CASE("approximation bound over a grid") {
  const double tau = 3.0;
  for (int i = 0; i <= 300; ++i) {
    const double t = tau * i / 300.0;
    for (int k = 0; k <= 100; ++k) {
      const double p = 0.5 * k / 100.0;
      const auto x = expected_pending_fraction(t, tau, p);
      const double w = 1.0 - t / tau;
      REQUIRE(x.approximate >= x.exact);
      REQUIRE(std::abs((x.approximate - x.exact) - x.exact * (w * p / (1 - p))) <= 1e-14);
    }
  }
}

TEST_CASE("property: no pending patients reduces to the observed rate") {
  CHECK(props::no_pending_reduction(101, kCases, kPhi) == 0);
}

TEST_CASE("property: the imputed rate strictly decreases in TF and increases in y") {
  CHECK(props::tf_monotonicity(202, kCases, kPhi) == 0);
}

TEST_CASE("property: pooling a single dose equals the single-dose estimate") {
  CHECK(props::single_dose_pooling(303, kCases, kPhi) == 0);
}

TEST_CASE("property: patient-wise imputation matches the aggregate estimate") {
  CHECK(props::patientwise_equivalence(404, kCases) == 0);
}
