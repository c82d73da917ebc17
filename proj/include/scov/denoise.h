#pragma once

#include <cstddef>
#include <list>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scov/block_diag.h"
#include "scov/fb_basis.h"
#include "scov/simulate.h"

namespace scov {

// Per-block Wiener gains W_n = C_n D_n (D_n C_n D_n + sigma2 I)^{-1} for one
// weight vector, D_n = diag(h restricted to block n).
struct GroupFilter {
  std::vector<Eigen::MatrixXcd> gains;
  bool pseudo_inverse = false;
};

// Mean, PSD-clipped covariance and noise level, plus the cache of
// per-group filters. The cache is filled by prepare() on one thread; apply
// calls are const and may run concurrently afterwards.
class WienerContext {
 public:
  // capacity 0 keeps every group's filter.
  WienerContext(const BasisSpec& basis, CoeffVec mean, const BlockDiagHermitian& covariance,
                double sigma2, std::size_t capacity = 0);

  const BasisSpec& basis() const { return basis_; }
  const CoeffVec& mean() const { return mean_; }
  const BlockDiagHermitian& covariance() const { return covariance_; }
  double sigma2() const { return sigma2_; }
  // Eigenvalues removed by the PSD clip at construction.
  int clipped_eigenvalues() const { return clipped_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  GroupFilter build_filter(const RadialWeightVec& h) const;
  // Returns the cached filter for `group`, building it on a miss.
  const GroupFilter& prepare(int group, const RadialWeightVec& h);
  const GroupFilter* cached(int group) const;
  std::size_t cache_hits() const { return hits_; }
  std::size_t cache_misses() const { return misses_; }
  std::size_t capacity() const { return capacity_; }

  CoeffVec apply(const GroupFilter& filter, const CoeffVec& G, const RadialWeightVec& h) const;

 private:
  BasisSpec basis_;
  CoeffVec mean_;
  BlockDiagHermitian covariance_;
  double sigma2_;
  std::size_t capacity_;
  int clipped_ = 0;
  std::vector<std::string> warnings_;
  std::list<int> recency_;  // front = most recent
  std::map<int, std::pair<GroupFilter, std::list<int>::iterator>> cache_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

// F = mu + C diag(H) (C .* (H H^T) + sigma2 I)^{-1} (G - H .* mu), blockwise,
// without touching the cache.
CoeffVec wiener_denoise(const CoeffVec& G, const RadialWeightVec& H, const WienerContext& ctx);

// Denoises the selected images of `d` (in its current, possibly whitened,
// domain) and synthesizes the clean estimates. One filter per defocus group.
std::vector<Image> denoise_batch(const Dataset& d, WienerContext& ctx,
                                 std::span<const std::size_t> selection, int threads = 1);

}  // namespace scov
