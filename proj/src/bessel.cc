#include "scov/bessel.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/bessel.hpp>

#include "scov/errors.h"

namespace scov {
namespace {

constexpr double kBracketStep = 0.5;
constexpr double kBisectTolerance = 1e-14;
constexpr double kResidualTolerance = 1e-13;
constexpr int kMaxBisections = 200;

double refine_root(int n, int k, double lo, double hi) {
  double f_lo = bessel_j(n, lo);
  for (int iter = 0; iter < kMaxBisections; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= kBisectTolerance || mid <= lo || mid >= hi) break;
    const double f_mid = bessel_j(n, mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  const double f_hi = bessel_j(n, hi);
  const double root = std::abs(f_lo) <= std::abs(f_hi) ? lo : hi;
  if (!(std::abs(bessel_j(n, root)) < kResidualTolerance)) {
    std::ostringstream msg;
    msg << "Bessel root refinement did not converge for (n=" << n << ", k=" << k
        << "): |J_n| = " << std::abs(bessel_j(n, root));
    throw NumericalError(msg.str());
  }
  return root;
}

std::vector<double> roots_of_order(int n, double lambda_max) {
  std::vector<double> roots;
  // J_n has no positive root below n (the first root exceeds n).
  double x0 = std::max(static_cast<double>(n), kBracketStep);
  double f0 = bessel_j(n, x0);
  while (x0 < lambda_max) {
    const double x1 = std::min(x0 + kBracketStep, lambda_max);
    const double f1 = bessel_j(n, x1);
    if (f0 == 0.0) {
      roots.push_back(x0);
    } else if ((f0 < 0.0) != (f1 < 0.0) && f1 != 0.0) {
      roots.push_back(refine_root(n, static_cast<int>(roots.size()) + 1, x0, x1));
    }
    x0 = x1;
    f0 = f1;
  }
  if (f0 == 0.0 && x0 <= lambda_max) roots.push_back(x0);
  return roots;
}

}  // namespace

double bessel_j(int order, double x) { return boost::math::cyl_bessel_j(order, x); }

std::size_t RootTable::count() const {
  std::size_t total = 0;
  for (const auto& r : roots) total += r.size();
  return total;
}

RootTable compute_bessel_roots(int n_max, double lambda_max) {
  if (n_max < kAutoOrder) throw std::invalid_argument("compute_bessel_roots: n_max < 0");
  if (!(lambda_max > 2.404825557695773)) {
    throw std::invalid_argument(
        "compute_bessel_roots: lambda_max must exceed the first root of J_0");
  }
  RootTable table;
  for (int n = 0; n_max == kAutoOrder || n <= n_max; ++n) {
    auto roots = roots_of_order(n, lambda_max);
    if (roots.empty() && n_max == kAutoOrder) break;
    table.roots.push_back(std::move(roots));
  }
  return table;
}

}  // namespace scov
