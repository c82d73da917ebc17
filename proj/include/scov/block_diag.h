#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "scov/fb_basis.h"

namespace scov {

// One complex Hermitian block per angular frequency n >= 0; the n < 0
// blocks are the complex conjugates and are never stored.
struct BlockDiagHermitian {
  std::uint64_t basis_hash = 0;
  std::vector<Eigen::MatrixXcd> blocks;

  static BlockDiagHermitian zeros(const BasisSpec& basis);

  int num_blocks() const { return static_cast<int>(blocks.size()); }
  // Sum of k_max(n)^2 over blocks.
  std::size_t stored_entries() const;
  // max_n ||B_n - B_n^H||_max.
  double hermitian_defect() const;
  // Smallest eigenvalue over all blocks.
  double min_eigenvalue() const;
};

}  // namespace scov
