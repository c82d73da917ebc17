#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scov/image.h"

namespace scov {

using Complex = std::complex<double>;

// Complex coefficients aligned with BasisSpec::indices().
using CoeffVec = Eigen::VectorXcd;
// Real per-index weights w(lambda_nk) aligned with BasisSpec::indices().
using RadialWeightVec = Eigen::VectorXd;

struct BasisIndex {
  int n = 0;
  int k = 1;
  friend bool operator==(const BasisIndex&, const BasisIndex&) = default;
};

struct BasisOptions {
  double band_ratio = 1.0;
  double lambda_min = 0.0;
  double pixel_size = 1.0;
  // Tikhonov parameter of the expansion, relative to ||A||_2^2.
  double tikhonov = 1e-10;
  // Largest synthesis-matrix condition number accepted before the basis is
  // declared rank deficient.
  double max_condition = 1e4;
};

namespace detail {
struct BasisData;
}

// Disk-harmonic basis psi_nk(r, theta) = gamma_nk J_|n|(lambda_nk r) e^{i n theta}
// on the unit disk, sampled on an L x L grid.
//
// Pixel (i, j) sits at ((i - L/2) + 0.5, (j - L/2) + 0.5) * 2/L. Indices are
// ordered by |n|, then k, then +n before -n, so block n >= 0 occupies every
// other slot of its |n| group (n = 0 is contiguous). Using J_|n| makes
// psi_{-n,k} = conj(psi_{n,k}); a real image therefore has coefficients with
// alpha_{-n,k} = conj(alpha_{n,k}).
//
// Immutable after construction; copies share the precomputed expansion
// operator.
class BasisSpec {
 public:
  int grid_size() const;
  double band_ratio() const;
  double lambda_max() const;
  double lambda_min() const;
  double pixel_size() const;

  std::size_t size() const;
  const std::vector<BasisIndex>& indices() const;
  const std::vector<double>& lambdas() const;
  const std::vector<double>& normalizers() const;

  int max_order() const;
  // Number of radial indices k for angular frequency |n|.
  int block_size(int n) const;
  // Positions of (n, 1), ..., (n, K_n) in the coefficient vector.
  const std::vector<std::size_t>& block_positions(int n) const;
  std::size_t index_of(int n, int k) const;
  // Position of (-n, k) for the entry at `position`.
  std::size_t partner(std::size_t position) const;

  // Fingerprint of (L, band ratio, lambda_min, index set); stored in every
  // container written against this basis.
  std::uint64_t hash() const;

  // sigma_max / sigma_min of the real synthesis matrix.
  double condition_number() const;
  // Constant kappa with ||expand(g)||_2 <= kappa ||g||_2.
  double expansion_bound() const;
  // sum_p |psi_j(p)|^2 over disk pixels, per index.
  const std::vector<double>& column_energy() const;
  // Linear (column-major) pixel offsets inside the closed unit disk.
  const std::vector<int>& disk_pixels() const;

  const detail::BasisData& data() const;

 private:
  friend BasisSpec build_basis(int, const BasisOptions&);
  std::shared_ptr<const detail::BasisData> data_;
};

// L >= 4 even, band_ratio in (0, 1]; lambda_max = band_ratio * pi * L / 2.
BasisSpec build_basis(int L, double band_ratio = 1.0);
// Accepts any positive band ratio; raises NumericalError when the synthesis
// matrix is rank deficient.
BasisSpec build_basis(int L, const BasisOptions& options);

// Pixel coordinate of grid index i in unit-disk units.
double grid_coordinate(int i, int L);

// Real part of sum_j alpha_j psi_j at each pixel center; zero outside the disk.
Image synthesize(const CoeffVec& alpha, const BasisSpec& basis);

// Regularized least-squares coefficients of g over the disk pixels. The
// result is exactly conjugate symmetric.
CoeffVec expand(const Image& g, const BasisSpec& basis);
std::vector<CoeffVec> expand_batch(std::span<const Image> images, const BasisSpec& basis,
                                   int threads = 1);

// Adjoint of synthesize: (A* g)_j = sum_p g_p conj(psi_j(p)).
CoeffVec analyze(const Image& g, const BasisSpec& basis);

// Continuous evaluation of sum_j alpha_j psi_j(x, y) (complex; zero for r > 1).
Complex evaluate(const CoeffVec& alpha, const BasisSpec& basis, double x, double y);

// In-plane rotation: alpha_nk * e^{i n phi}.
CoeffVec steer(const CoeffVec& alpha, const BasisSpec& basis, double phi);

// Diagonal action of a radial convolution: alpha_nk * w_nk.
CoeffVec radial_convolve(const CoeffVec& alpha, const RadialWeightVec& weights);

// w_nk = transfer(lambda_nk) for a radial transfer function given in
// unit-disk angular frequency.
RadialWeightVec radial_weights(const BasisSpec& basis,
                               const std::function<double(double)>& transfer);

// max_j |alpha_{-n,k} - conj(alpha_{n,k})|.
double conjugate_asymmetry(const CoeffVec& alpha, const BasisSpec& basis);

}  // namespace scov
