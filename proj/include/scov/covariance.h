#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scov/block_diag.h"
#include "scov/fb_basis.h"

namespace scov {

// Per-image radial weights H_i, stored once per defocus group.
struct ImageWeights {
  std::vector<RadialWeightVec> groups;
  std::vector<int> group_of;

  // One group per image.
  static ImageWeights per_image(std::vector<RadialWeightVec> weights);
  // Every image in a single group.
  static ImageWeights uniform(const RadialWeightVec& weights, std::size_t count);

  std::size_t size() const { return group_of.size(); }
  int num_groups() const { return static_cast<int>(groups.size()); }
  const RadialWeightVec& operator[](std::size_t i) const { return groups[group_of[i]]; }
  // Images per group.
  std::vector<double> multiplicity() const;
  // Throws std::invalid_argument on dangling group ids or wrong lengths.
  void validate(std::size_t coefficient_count) const;
};

// mu = (sum_i H_i .* G_i) ./ (sum_i H_i.^2).
CoeffVec estimate_mean(std::span<const CoeffVec> G, const ImageWeights& H, const BasisSpec& basis);

// Sufficient statistics of the covariance normal equations, blocks n >= 0.
struct CovarianceAccumulator {
  // sum_i H_i(k) H_i(k') (G_i - H_i mu)(k) conj(G_i - H_i mu)(k')
  BlockDiagHermitian numerator;
  // sum_i H_i(k)^2 H_i(k')^2
  std::vector<Eigen::MatrixXd> denominator;
  // sum_i H_i(k)^2; sigma^2 times this is the noise term.
  std::vector<Eigen::VectorXd> weight_power;
  std::size_t count = 0;

  static CovarianceAccumulator zeros(const BasisSpec& basis);
  // Entrywise sum; associative and commutative.
  void merge(const CovarianceAccumulator& other);
};

// Images are split into fixed shards of 256 and merged in shard order, so
// the result does not depend on `threads`.
CovarianceAccumulator accumulate(std::span<const CoeffVec> G, const ImageWeights& H,
                                 const CoeffVec& mean, const BasisSpec& basis, int threads = 1);

enum class Shrinkage { kOff, kOn };

struct SolveDiagnostics {
  // max/min of the denominator entries per block.
  std::vector<double> block_condition;
  // Eigenvalues kept above the noise bulk edge per block (shrink on).
  std::vector<int> retained;
};

// Closed-form Hadamard solution of the normal equations, blockwise.
//   off: C[n] = (Num[n] - sigma2 diag(sum H^2)) ./ Den[n]
//   on:  Num[n]/N is whitened by diag(sum H^2 / N)^{-1/2} so the noise
//        level is exactly sigma2, the spikes are shrunk with the
//        operator-norm optimal shrinker (bulk edge (1+sqrt(K/N))^2), the
//        result is rescaled and divided by Den[n]/N, then projected onto
//        the PSD cone.
BlockDiagHermitian solve_covariance(const CovarianceAccumulator& acc, double sigma2,
                                    Shrinkage shrink, SolveDiagnostics* diagnostics = nullptr,
                                    int threads = 1);

// Operator-norm optimal shrinker for the spiked model with unit noise and
// aspect ratio gamma; returns the signal eigenvalue (0 below the bulk edge).
double shrink_eigenvalue(double x, double gamma);

// Eigenvalues below zero set to zero, blockwise. `clipped` receives how
// many eigenvalues were changed.
BlockDiagHermitian clip_negative(const BlockDiagHermitian& C, int* clipped = nullptr);

struct Eigenimage {
  double eigenvalue = 0.0;
  int n = 0;
  // Position inside the block's descending eigenvalue order.
  int block_rank = 0;
  CoeffVec coefficients;
  Image image;
};

// Global top eigenpairs ordered by (eigenvalue desc, n asc, block rank asc).
// Negative eigenvalues are clipped to 0. For n > 0 the eigenvector v is
// embedded as v/sqrt(2) at +n and conj(v)/sqrt(2) at -n, so the image is
// real with unit coefficient norm.
std::vector<Eigenimage> eigenimages(const BlockDiagHermitian& C, const BasisSpec& basis, int top);

struct EstimationReport {
  CoeffVec mean;
  BlockDiagHermitian covariance;
  double sigma2 = 0.0;
  bool shrinkage = false;
  std::vector<double> block_condition;
  double delta = 0.0;
  std::map<std::string, double> timings;
  std::vector<std::string> warnings;
  std::uint64_t basis_hash = 0;
  // Echo of the run configuration.
  std::map<std::string, std::string> config;
};

struct EstimateOptions {
  double sigma2 = 0.0;
  Shrinkage shrink = Shrinkage::kOff;
  int threads = 1;
  // Computes delta and its warning; callers that already did can skip it.
  bool check_identifiability = true;
};

// Mean, accumulation, solve and identifiability margin. Timings are
// recorded under "mean", "accumulate" and "solve".
EstimationReport estimate_covariance(std::span<const CoeffVec> G, const ImageWeights& H,
                                     const BasisSpec& basis, const EstimateOptions& options);

}  // namespace scov
