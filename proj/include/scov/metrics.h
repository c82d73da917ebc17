#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "scov/block_diag.h"
#include "scov/image.h"

namespace scov {

struct BlockError {
  int n = 0;
  double error = 0.0;
  double reference_norm = 0.0;
};

// ||C_n - R_n||_F / ||R_n||_F per angular frequency. Blocks whose reference
// has zero norm are left out and their n appended to `skipped`.
std::vector<BlockError> block_relative_error(const BlockDiagHermitian& estimate,
                                             const BlockDiagHermitian& reference,
                                             std::vector<int>* skipped = nullptr);

struct FrcRing {
  int radius = 0;
  double value = 0.0;
  std::size_t count = 0;
  // |Im <a_r, b_r>| / (||a_r|| ||b_r||); zero up to rounding for real inputs.
  double imag_residual = 0.0;
};

struct FrcCurve {
  std::vector<FrcRing> rings;
  double mean() const;
};

// Ring r collects DFT frequencies with floor(|xi|) = r, for r < L/2.
// Rings where either image has no energy get value 0.
FrcCurve frc(const Image& a, const Image& b);
// Ring-wise average of frc(a[i], b[i]).
FrcCurve frc_batch(std::span<const Image> a, std::span<const Image> b, int threads = 1);

// One CSV row: metric, index, value, count.
struct MetricRow {
  std::string metric;
  long index = 0;
  double value = 0.0;
  std::size_t count = 0;
};

std::vector<MetricRow> to_rows(const std::string& metric, const FrcCurve& curve);
std::vector<MetricRow> to_rows(const std::string& metric, const std::vector<BlockError>& errors);

}  // namespace scov
