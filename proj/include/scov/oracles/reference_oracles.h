#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "scov/block_diag.h"
#include "scov/fb_basis.h"
#include "scov/image.h"

// Slow, independent reference implementations for tests and benchmarks.
// Nothing here includes the covariance or denoise modules.
namespace scov::oracle {

struct OracleInstance {
  std::vector<CoeffVec> G;
  // Weights per defocus group and the group of each image.
  std::vector<RadialWeightVec> groups;
  std::vector<int> group_of;
  double sigma2 = 0.0;
  BasisSpec basis;
  std::optional<std::vector<CoeffVec>> clean;

  const RadialWeightVec& H(std::size_t i) const { return groups[group_of[i]]; }
  void validate() const;
};

// Per-entry scalar regression: argmin_mu sum_i |G_i - H_i mu|^2.
CoeffVec lstsq_mean(const OracleInstance& inst);

// Each entry (n, k, k') solved on its own by direct division, with explicit
// loops over images.
BlockDiagHermitian lstsq_entrywise(const OracleInstance& inst, const CoeffVec& mean);

struct CgResult {
  BlockDiagHermitian solution;
  // Relative residual ||b - A x|| / ||b|| after each iteration (entry 0 is
  // the initial residual).
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = false;
};

// Unpreconditioned conjugate gradient on the normal equations over block
// Hermitian unknowns. The operator X -> sum_g n_g D_g (D_g X D_g) D_g is
// applied group by group with dense products each iteration, as a solver
// unaware of the entrywise structure would. Raises NumericalError when the
// residual grows tenfold over 20 iterations.
CgResult lstsq_cg(const OracleInstance& inst, const CoeffVec& mean, int max_iterations = 500,
                  double tolerance = 1e-10);

// sum_i sum_n ||D_i C_n D_i + sigma2 I - B_i,n||_F^2 over blocks n >= 0.
double lstsq_objective(const OracleInstance& inst, const CoeffVec& mean, const BlockDiagHermitian& C);

// Full |I| x |I| sample covariance (1/N, about the sample mean).
Eigen::MatrixXcd dense_sample_covariance(const std::vector<CoeffVec>& X);
// Block n >= 0 restriction of the sample covariance, computed directly.
BlockDiagHermitian block_sample_covariance(const std::vector<CoeffVec>& X, const BasisSpec& basis);
// ||entries with n != n'||_F / ||C||_F.
double off_block_ratio(const Eigen::MatrixXcd& C, const BasisSpec& basis);

// Re sum_j alpha_j gamma_j J_|n|(lambda_j r) e^{i n theta} on a size x size
// grid with the basis pixel spacing 2/L, centered like the basis grid, and
// without the disk cutoff. Bessel values from the standard library.
Image synthesize_extended(const CoeffVec& alpha, const BasisSpec& basis, int size);

// Zero-padded (2x) FFT convolution of img with an odd-sized kernel centered
// at its middle sample; output cropped to the input grid.
Image spatial_convolve(const Image& img, const Eigen::MatrixXd& kernel);

}  // namespace scov::oracle
