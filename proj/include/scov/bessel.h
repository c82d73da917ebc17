#pragma once

#include <cstddef>
#include <vector>

namespace scov {

// J_n(x), Bessel function of the first kind of integer order.
double bessel_j(int order, double x);

// Positive roots of J_n, grouped by order: roots[n][k - 1] is the k-th
// smallest positive root of J_n.
struct RootTable {
  std::vector<std::vector<double>> roots;

  int max_order() const { return static_cast<int>(roots.size()) - 1; }
  double root(int n, int k) const { return roots.at(n).at(k - 1); }
  std::size_t count() const;
};

inline constexpr int kAutoOrder = -1;

// Every root lambda_{nk} <= lambda_max for 0 <= n <= n_max. With
// n_max = kAutoOrder the table grows until the first root of the next order
// exceeds lambda_max. Roots are bracketed on a 0.5-spaced grid and bisected
// to 1e-14; a root whose residual |J_n| stays above 1e-13 raises
// NumericalError naming (n, k).
RootTable compute_bessel_roots(int n_max, double lambda_max);

}  // namespace scov
