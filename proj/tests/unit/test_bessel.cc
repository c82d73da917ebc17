#include <cmath>
#include <numbers>
#include <stdexcept>

#include <gtest/gtest.h>

#include "scov/bessel.h"

namespace scov {
namespace {

// Power series of J_n, accurate for the small arguments used here.
double series_j(int n, double x) {
  double term = std::pow(0.5 * x, n) / std::tgamma(n + 1.0);
  double sum = term;
  for (int m = 1; m < 60; ++m) {
    term *= -(0.25 * x * x) / (m * static_cast<double>(m + n));
    sum += term;
  }
  return sum;
}

double bisect(int n, double lo, double hi) {
  double flo = series_j(n, lo);
  while (hi - lo > 1e-15) {
    const double mid = 0.5 * (lo + hi);
    const double fm = series_j(n, mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

TEST(BesselRoots, FirstRootOfJ0) {
  const RootTable t = compute_bessel_roots(0, 10.0);
  EXPECT_NEAR(t.root(0, 1), 2.404825557695773, 1e-13);
  EXPECT_NEAR(t.root(0, 1), bisect(0, 2.0, 3.0), 1e-13);
}

TEST(BesselRoots, FirstRootOfJ1) {
  const RootTable t = compute_bessel_roots(1, 10.0);
  EXPECT_NEAR(t.root(1, 1), 3.831705970207512, 1e-13);
  EXPECT_NEAR(t.root(1, 1), bisect(1, 3.5, 4.0), 1e-13);
}

TEST(BesselRoots, InvariantsAtL64) {
  const double lambda_max = std::numbers::pi * 64 / 2;
  const RootTable t = compute_bessel_roots(kAutoOrder, lambda_max);
  ASSERT_GT(t.count(), 0u);
  for (int n = 0; n <= t.max_order(); ++n) {
    const auto& r = t.roots[n];
    ASSERT_FALSE(r.empty());
    for (std::size_t k = 0; k < r.size(); ++k) {
      EXPECT_LT(std::abs(std::cyl_bessel_j(static_cast<double>(n), r[k])), 1e-13) << n << "," << k + 1;
      EXPECT_LE(r[k], lambda_max);
      if (k + 1 < r.size()) EXPECT_LT(r[k], r[k + 1]);
      if (n + 1 <= t.max_order() && k < t.roots[n + 1].size()) {
        EXPECT_LT(r[k], t.roots[n + 1][k]);
        if (k + 1 < r.size()) EXPECT_LT(t.roots[n + 1][k], r[k + 1]);
      }
    }
  }
  // Auto order stops once the next order has no root in range.
  const int next = t.max_order() + 1;
  double x = next;
  while (std::cyl_bessel_j(static_cast<double>(next), x) > 0) x += 0.01;
  EXPECT_GT(x, lambda_max);
}

TEST(BesselRoots, CountMatchesScan) {
  // Independent count: sign changes of J_n on a fine grid.
  const double lambda_max = 20.0;
  const RootTable t = compute_bessel_roots(kAutoOrder, lambda_max);
  for (int n = 0; n <= t.max_order() + 1; ++n) {
    int changes = 0;
    double prev = std::cyl_bessel_j(static_cast<double>(n), 1e-3);
    for (double x = 1e-3 + 1e-3; x <= lambda_max; x += 1e-3) {
      const double cur = std::cyl_bessel_j(static_cast<double>(n), x);
      if ((cur < 0) != (prev < 0)) ++changes;
      prev = cur;
    }
    const int stored = n <= t.max_order() ? static_cast<int>(t.roots[n].size()) : 0;
    EXPECT_EQ(stored, changes) << "order " << n;
  }
}

TEST(BesselRoots, RejectsBandBelowFirstRoot) {
  EXPECT_THROW(compute_bessel_roots(0, 2.0), std::invalid_argument);
}

TEST(BesselJ, MatchesStandardLibrary) {
  for (int n : {0, 1, 5, 20})
    for (double x : {0.0, 0.5, 3.0, 17.3, 80.0})
      EXPECT_NEAR(bessel_j(n, x), std::cyl_bessel_j(static_cast<double>(n), x), 1e-14);
}

}  // namespace
}  // namespace scov
