#include "scov/block_diag.h"

#include <algorithm>
#include <limits>

#include <Eigen/Eigenvalues>

namespace scov {

BlockDiagHermitian BlockDiagHermitian::zeros(const BasisSpec& basis) {
  BlockDiagHermitian out;
  out.basis_hash = basis.hash();
  for (int n = 0; n <= basis.max_order(); ++n) {
    const int k = basis.block_size(n);
    out.blocks.push_back(Eigen::MatrixXcd::Zero(k, k));
  }
  return out;
}

std::size_t BlockDiagHermitian::stored_entries() const {
  std::size_t total = 0;
  for (const auto& b : blocks) total += static_cast<std::size_t>(b.size());
  return total;
}

double BlockDiagHermitian::hermitian_defect() const {
  double worst = 0.0;
  for (const auto& b : blocks) {
    if (b.size() == 0) continue;
    worst = std::max(worst, (b - b.adjoint()).cwiseAbs().maxCoeff());
  }
  return worst;
}

double BlockDiagHermitian::min_eigenvalue() const {
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks) {
    if (b.size() == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(b, Eigen::EigenvaluesOnly);
    lowest = std::min(lowest, eig.eigenvalues().minCoeff());
  }
  return lowest;
}

}  // namespace scov
