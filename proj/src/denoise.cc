#include "scov/denoise.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "scov/covariance.h"
#include "scov/errors.h"
#include "scov/parallel.h"

namespace scov {

WienerContext::WienerContext(const BasisSpec& basis, CoeffVec mean,
                             const BlockDiagHermitian& covariance, double sigma2,
                             std::size_t capacity)
    : basis_(basis), mean_(std::move(mean)), sigma2_(sigma2), capacity_(capacity) {
  if (covariance.basis_hash != basis.hash())
    throw BasisMismatchError("covariance built against another basis");
  if (static_cast<std::size_t>(mean_.size()) != basis.size())
    throw std::invalid_argument("mean length does not match basis");
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("sigma2 must be non-negative");
  covariance_ = clip_negative(covariance, &clipped_);
  if (clipped_ > 0)
    warnings_.push_back(std::to_string(clipped_) + " negative covariance eigenvalues clipped to 0");
}

GroupFilter WienerContext::build_filter(const RadialWeightVec& h) const {
  if (static_cast<std::size_t>(h.size()) != basis_.size())
    throw std::invalid_argument("weight vector length does not match basis");
  GroupFilter f;
  for (int n = 0; n < covariance_.num_blocks(); ++n) {
    const Eigen::MatrixXcd& C = covariance_.blocks[n];
    const auto& pos = basis_.block_positions(n);
    const Eigen::Index K = C.rows();
    Eigen::VectorXd d(K);
    for (Eigen::Index k = 0; k < K; ++k) d[k] = h[pos[k]];
    const Eigen::MatrixXcd DC = d.asDiagonal() * C;
    Eigen::MatrixXcd A = DC * d.asDiagonal();
    A.diagonal().array() += sigma2_;
    A = 0.5 * (A + A.adjoint());
    // W = C D A^{-1} = (A^{-1} D C)^H for Hermitian A and C.
    bool singular = false;
    if (sigma2_ == 0.0 && K > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(A);
      const Eigen::VectorXd& ev = eig.eigenvalues();
      const double cutoff = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
      if (ev.minCoeff() <= cutoff) {
        singular = true;
        Eigen::VectorXd inv(K);
        for (Eigen::Index i = 0; i < K; ++i) inv[i] = ev[i] > cutoff ? 1.0 / ev[i] : 0.0;
        const Eigen::MatrixXcd pinv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().adjoint();
        f.gains.push_back((pinv * DC).adjoint());
      }
    }
    if (!singular) {
      Eigen::LDLT<Eigen::MatrixXcd> ldlt(A);
      f.gains.push_back(ldlt.solve(DC).adjoint());
    }
    f.pseudo_inverse = f.pseudo_inverse || singular;
  }
  return f;
}

const GroupFilter& WienerContext::prepare(int group, const RadialWeightVec& h) {
  auto it = cache_.find(group);
  if (it != cache_.end()) {
    ++hits_;
    recency_.splice(recency_.begin(), recency_, it->second.second);
    return it->second.first;
  }
  ++misses_;
  if (capacity_ > 0 && cache_.size() >= capacity_) {
    cache_.erase(recency_.back());
    recency_.pop_back();
  }
  GroupFilter f = build_filter(h);
  if (f.pseudo_inverse)
    warnings_.push_back("group " + std::to_string(group) +
                        ": singular Wiener system, pseudo-inverse used");
  recency_.push_front(group);
  auto [pos, inserted] = cache_.emplace(group, std::make_pair(std::move(f), recency_.begin()));
  return pos->second.first;
}

const GroupFilter* WienerContext::cached(int group) const {
  auto it = cache_.find(group);
  return it == cache_.end() ? nullptr : &it->second.first;
}

CoeffVec WienerContext::apply(const GroupFilter& filter, const CoeffVec& G,
                              const RadialWeightVec& h) const {
  if (static_cast<std::size_t>(G.size()) != basis_.size())
    throw std::invalid_argument("coefficient vector length does not match basis");
  CoeffVec out(G.size());
  for (int n = 0; n < covariance_.num_blocks(); ++n) {
    const auto& pos = basis_.block_positions(n);
    const Eigen::Index K = static_cast<Eigen::Index>(pos.size());
    Eigen::VectorXcd r(K);
    for (Eigen::Index k = 0; k < K; ++k) r[k] = G[pos[k]] - h[pos[k]] * mean_[pos[k]];
    const Eigen::VectorXcd f = filter.gains[n] * r;
    for (Eigen::Index k = 0; k < K; ++k) {
      const Complex value = mean_[pos[k]] + f[k];
      if (n == 0) {
        out[pos[k]] = Complex(value.real(), 0.0);
      } else {
        out[pos[k]] = value;
        out[basis_.partner(pos[k])] = std::conj(value);
      }
    }
  }
  return out;
}

CoeffVec wiener_denoise(const CoeffVec& G, const RadialWeightVec& H, const WienerContext& ctx) {
  return ctx.apply(ctx.build_filter(H), G, H);
}

std::vector<Image> denoise_batch(const Dataset& d, WienerContext& ctx,
                                 std::span<const std::size_t> selection, int threads) {
  d.validate();
  for (std::size_t i : selection)
    if (i >= d.size()) throw std::out_of_range("image id " + std::to_string(i) + " out of range");
  const BasisSpec& basis = ctx.basis();
  const auto weights = effective_weights(d, basis);
  std::vector<Image> out(selection.size());

  // Distinct groups in order of first use, processed in chunks that fit the
  // cache so every filter is built once per chunk.
  std::vector<int> order;
  std::set<int> seen;
  for (std::size_t i : selection)
    if (seen.insert(d.group_of[i]).second) order.push_back(d.group_of[i]);
  const std::size_t chunk = ctx.capacity() == 0 ? std::max<std::size_t>(order.size(), 1) : ctx.capacity();

  for (std::size_t c0 = 0; c0 < order.size(); c0 += chunk) {
    const std::set<int> groups(order.begin() + static_cast<std::ptrdiff_t>(c0),
                               order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), c0 + chunk)));
    std::vector<std::size_t> slots;
    std::vector<const GroupFilter*> filters;
    for (std::size_t s = 0; s < selection.size(); ++s) {
      const int g = d.group_of[selection[s]];
      if (!groups.count(g)) continue;
      ctx.prepare(g, weights[g]);
      slots.push_back(s);
    }
    for (std::size_t s : slots) filters.push_back(ctx.cached(d.group_of[selection[s]]));
    parallel_for(slots.size(), threads, [&](std::size_t t) {
      const std::size_t s = slots[t];
      const std::size_t i = selection[s];
      const int g = d.group_of[i];
      const CoeffVec G = expand(d.images[i], basis);
      out[s] = synthesize(ctx.apply(*filters[t], G, weights[g]), basis);
      out[s].pixel_size = d.images[i].pixel_size;
    });
  }
  return out;
}

}  // namespace scov
