#include "scov/metrics.h"

#include <cmath>
#include <stdexcept>

#include "scov/fft.h"
#include "scov/parallel.h"

namespace scov {

std::vector<BlockError> block_relative_error(const BlockDiagHermitian& estimate,
                                             const BlockDiagHermitian& reference,
                                             std::vector<int>* skipped) {
  if (estimate.blocks.size() != reference.blocks.size())
    throw std::invalid_argument("block structures differ");
  std::vector<BlockError> out;
  for (std::size_t n = 0; n < reference.blocks.size(); ++n) {
    const auto& R = reference.blocks[n];
    const auto& C = estimate.blocks[n];
    if (R.rows() != C.rows() || R.cols() != C.cols())
      throw std::invalid_argument("block " + std::to_string(n) + " sizes differ");
    const double norm = R.norm();
    if (!(norm > 0.0)) {
      if (skipped) skipped->push_back(static_cast<int>(n));
      continue;
    }
    out.push_back({static_cast<int>(n), (C - R).norm() / norm, norm});
  }
  return out;
}

double FrcCurve::mean() const {
  if (rings.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rings) s += r.value;
  return s / static_cast<double>(rings.size());
}

FrcCurve frc(const Image& a, const Image& b) {
  const int L = a.size();
  if (b.size() != L || a.data.cols() != L || b.data.cols() != L)
    throw std::invalid_argument("frc needs two square images of equal size");
  const Eigen::MatrixXcd A = fft2(a.data.cast<std::complex<double>>());
  const Eigen::MatrixXcd B = fft2(b.data.cast<std::complex<double>>());
  const int rings = L / 2;
  std::vector<std::complex<double>> cross(rings, 0.0);
  std::vector<double> ea(rings, 0.0), eb(rings, 0.0);
  std::vector<std::size_t> count(rings, 0);
  for (int j = 0; j < L; ++j) {
    const int fy = j <= L / 2 ? j : j - L;
    for (int i = 0; i < L; ++i) {
      const int fx = i <= L / 2 ? i : i - L;
      const int r = static_cast<int>(std::floor(std::sqrt(static_cast<double>(fx * fx + fy * fy))));
      if (r >= rings) continue;
      cross[r] += A(i, j) * std::conj(B(i, j));
      ea[r] += std::norm(A(i, j));
      eb[r] += std::norm(B(i, j));
      ++count[r];
    }
  }
  FrcCurve curve;
  for (int r = 0; r < rings; ++r) {
    FrcRing ring;
    ring.radius = r;
    ring.count = count[r];
    const double denom = std::sqrt(ea[r] * eb[r]);
    if (denom > 0.0) {
      ring.value = cross[r].real() / denom;
      ring.imag_residual = std::abs(cross[r].imag()) / denom;
    }
    curve.rings.push_back(ring);
  }
  return curve;
}

FrcCurve frc_batch(std::span<const Image> a, std::span<const Image> b, int threads) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("frc_batch needs matching non-empty lists");
  std::vector<FrcCurve> curves(a.size());
  parallel_for(a.size(), threads, [&](std::size_t i) { curves[i] = frc(a[i], b[i]); });
  FrcCurve mean = curves[0];
  for (std::size_t i = 1; i < curves.size(); ++i)
    for (std::size_t r = 0; r < mean.rings.size(); ++r) {
      mean.rings[r].value += curves[i].rings[r].value;
      mean.rings[r].imag_residual = std::max(mean.rings[r].imag_residual, curves[i].rings[r].imag_residual);
    }
  for (auto& ring : mean.rings) ring.value /= static_cast<double>(curves.size());
  return mean;
}

std::vector<MetricRow> to_rows(const std::string& metric, const FrcCurve& curve) {
  std::vector<MetricRow> rows;
  for (const auto& r : curve.rings) rows.push_back({metric, r.radius, r.value, r.count});
  return rows;
}

std::vector<MetricRow> to_rows(const std::string& metric, const std::vector<BlockError>& errors) {
  std::vector<MetricRow> rows;
  for (const auto& e : errors) rows.push_back({metric, e.n, e.error, 1});
  return rows;
}

}  // namespace scov
