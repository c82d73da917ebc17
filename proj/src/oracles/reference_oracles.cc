#include "scov/oracles/reference_oracles.h"

#include <cmath>
#include <stdexcept>

#include "scov/errors.h"
#include "scov/fft.h"

namespace scov::oracle {
namespace {

// Positions of block n >= 0, collected from the index list directly.
std::vector<std::vector<std::size_t>> collect_blocks(const BasisSpec& basis) {
  int max_n = 0;
  for (const auto& idx : basis.indices()) max_n = std::max(max_n, idx.n);
  std::vector<std::vector<std::size_t>> blocks(max_n + 1);
  for (std::size_t j = 0; j < basis.size(); ++j)
    if (basis.indices()[j].n >= 0) blocks[basis.indices()[j].n].push_back(j);
  return blocks;
}

double inner(const BlockDiagHermitian& a, const BlockDiagHermitian& b) {
  double s = 0.0;
  for (std::size_t n = 0; n < a.blocks.size(); ++n)
    s += (a.blocks[n].array().conjugate() * b.blocks[n].array()).sum().real();
  return s;
}

void axpy(BlockDiagHermitian& y, double a, const BlockDiagHermitian& x) {
  for (std::size_t n = 0; n < y.blocks.size(); ++n) y.blocks[n] += a * x.blocks[n];
}

}  // namespace

void OracleInstance::validate() const {
  if (G.empty() || G.size() != group_of.size()) throw std::invalid_argument("oracle: bad instance sizes");
  for (int g : group_of)
    if (g < 0 || g >= static_cast<int>(groups.size())) throw std::invalid_argument("oracle: bad group id");
}

CoeffVec lstsq_mean(const OracleInstance& inst) {
  inst.validate();
  const std::size_t d = inst.basis.size();
  CoeffVec mu(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) {
    Complex num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < inst.G.size(); ++i) {
      const double h = inst.H(i)[j];
      num += h * inst.G[i][j];
      den += h * h;
    }
    if (den == 0.0) throw NumericalError("oracle: dead frequency in the mean");
    mu[j] = num / den;
  }
  return mu;
}

BlockDiagHermitian lstsq_entrywise(const OracleInstance& inst, const CoeffVec& mean) {
  inst.validate();
  const auto blocks = collect_blocks(inst.basis);
  BlockDiagHermitian C;
  C.basis_hash = inst.basis.hash();
  for (std::size_t n = 0; n < blocks.size(); ++n) {
    const auto& pos = blocks[n];
    const Eigen::Index K = static_cast<Eigen::Index>(pos.size());
    Eigen::MatrixXcd B(K, K);
    for (Eigen::Index a = 0; a < K; ++a) {
      for (Eigen::Index b = 0; b < K; ++b) {
        Complex num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < inst.G.size(); ++i) {
          const double ha = inst.H(i)[pos[a]], hb = inst.H(i)[pos[b]];
          const Complex ra = inst.G[i][pos[a]] - ha * mean[pos[a]];
          const Complex rb = inst.G[i][pos[b]] - hb * mean[pos[b]];
          // Scalar equation: sum_i ha^2 hb^2 c = sum_i ha hb (ra conj(rb) - sigma2 [a == b]).
          num += ha * hb * (ra * std::conj(rb) - (a == b ? inst.sigma2 : 0.0));
          den += ha * ha * hb * hb;
        }
        if (den == 0.0) throw NumericalError("oracle: dead frequency in the covariance");
        B(a, b) = num / den;
      }
    }
    C.blocks.push_back(std::move(B));
  }
  return C;
}

CgResult lstsq_cg(const OracleInstance& inst, const CoeffVec& mean, int max_iterations, double tolerance) {
  inst.validate();
  const auto blocks = collect_blocks(inst.basis);
  const std::size_t nb = blocks.size();
  std::vector<double> count(inst.groups.size(), 0.0);
  for (int g : inst.group_of) count[g] += 1.0;

  // Dense diagonal weight matrices per group and block.
  std::vector<std::vector<Eigen::MatrixXd>> D(inst.groups.size(), std::vector<Eigen::MatrixXd>(nb));
  for (std::size_t g = 0; g < inst.groups.size(); ++g)
    for (std::size_t n = 0; n < nb; ++n) {
      const Eigen::Index K = static_cast<Eigen::Index>(blocks[n].size());
      D[g][n] = Eigen::MatrixXd::Zero(K, K);
      for (Eigen::Index k = 0; k < K; ++k) D[g][n](k, k) = inst.groups[g][blocks[n][k]];
    }

  auto zeros = [&] {
    BlockDiagHermitian z;
    z.basis_hash = inst.basis.hash();
    for (const auto& pos : blocks) {
      const Eigen::Index K = static_cast<Eigen::Index>(pos.size());
      z.blocks.push_back(Eigen::MatrixXcd::Zero(K, K));
    }
    return z;
  };
  auto apply = [&](const BlockDiagHermitian& X) {
    BlockDiagHermitian Y = zeros();
    for (std::size_t g = 0; g < inst.groups.size(); ++g) {
      if (count[g] == 0.0) continue;
      for (std::size_t n = 0; n < nb; ++n) {
        const Eigen::MatrixXcd Dg = D[g][n].cast<Complex>();
        Y.blocks[n] += count[g] * (Dg * (Dg * X.blocks[n] * Dg) * Dg);
      }
    }
    return Y;
  };

  // b = sum_i D_i (B_i - sigma2 I) D_i
  BlockDiagHermitian b = zeros();
  for (std::size_t i = 0; i < inst.G.size(); ++i) {
    const auto& h = inst.H(i);
    for (std::size_t n = 0; n < nb; ++n) {
      const auto& pos = blocks[n];
      const Eigen::Index K = static_cast<Eigen::Index>(pos.size());
      Eigen::VectorXcd r(K);
      for (Eigen::Index k = 0; k < K; ++k) r[k] = h[pos[k]] * (inst.G[i][pos[k]] - h[pos[k]] * mean[pos[k]]);
      b.blocks[n] += r * r.adjoint();
      for (Eigen::Index k = 0; k < K; ++k) b.blocks[n](k, k) -= inst.sigma2 * h[pos[k]] * h[pos[k]];
    }
  }

  CgResult result;
  BlockDiagHermitian x = zeros();
  BlockDiagHermitian r = b;
  BlockDiagHermitian p = r;
  const double bnorm = std::sqrt(inner(b, b));
  double rr = inner(r, r);
  result.residuals.push_back(bnorm > 0.0 ? 1.0 : 0.0);
  if (bnorm == 0.0) {
    result.converged = true;
    result.solution = x;
    return result;
  }
  for (int it = 0; it < max_iterations; ++it) {
    const BlockDiagHermitian Ap = apply(p);
    const double pAp = inner(p, Ap);
    if (!(pAp > 0.0)) throw NumericalError("oracle CG: operator is not positive definite");
    const double alpha = rr / pAp;
    axpy(x, alpha, p);
    axpy(r, -alpha, Ap);
    const double rr_next = inner(r, r);
    const double rel = std::sqrt(rr_next) / bnorm;
    result.residuals.push_back(rel);
    result.iterations = it + 1;
    const std::size_t m = result.residuals.size();
    if (m > 20 && rel > 10.0 * result.residuals[m - 21])
      throw NumericalError("oracle CG diverged: residual grew tenfold over 20 iterations");
    if (rel <= tolerance) {
      result.converged = true;
      break;
    }
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t n = 0; n < nb; ++n) p.blocks[n] = r.blocks[n] + beta * p.blocks[n];
  }
  result.solution = x;
  return result;
}

double lstsq_objective(const OracleInstance& inst, const CoeffVec& mean, const BlockDiagHermitian& C) {
  inst.validate();
  const auto blocks = collect_blocks(inst.basis);
  double total = 0.0;
  for (std::size_t i = 0; i < inst.G.size(); ++i) {
    const auto& h = inst.H(i);
    for (std::size_t n = 0; n < blocks.size(); ++n) {
      const auto& pos = blocks[n];
      const Eigen::Index K = static_cast<Eigen::Index>(pos.size());
      for (Eigen::Index a = 0; a < K; ++a)
        for (Eigen::Index b = 0; b < K; ++b) {
          const Complex ra = inst.G[i][pos[a]] - h[pos[a]] * mean[pos[a]];
          const Complex rb = inst.G[i][pos[b]] - h[pos[b]] * mean[pos[b]];
          const Complex model = h[pos[a]] * C.blocks[n](a, b) * h[pos[b]] + (a == b ? inst.sigma2 : 0.0);
          total += std::norm(model - ra * std::conj(rb));
        }
    }
  }
  return total;
}

Eigen::MatrixXcd dense_sample_covariance(const std::vector<CoeffVec>& X) {
  if (X.empty()) throw std::invalid_argument("oracle: no samples");
  const Eigen::Index d = X[0].size();
  const Eigen::Index N = static_cast<Eigen::Index>(X.size());
  Eigen::MatrixXcd A(d, N);
  for (Eigen::Index i = 0; i < N; ++i) A.col(i) = X[i];
  const Eigen::VectorXcd mu = A.rowwise().mean();
  A.colwise() -= mu;
  return A * A.adjoint() / static_cast<double>(N);
}

BlockDiagHermitian block_sample_covariance(const std::vector<CoeffVec>& X, const BasisSpec& basis) {
  if (X.empty()) throw std::invalid_argument("oracle: no samples");
  const auto blocks = collect_blocks(basis);
  const double N = static_cast<double>(X.size());
  CoeffVec mu = CoeffVec::Zero(X[0].size());
  for (const auto& x : X) mu += x;
  mu /= N;
  BlockDiagHermitian C;
  C.basis_hash = basis.hash();
  for (const auto& pos : blocks) {
    const Eigen::Index K = static_cast<Eigen::Index>(pos.size());
    Eigen::MatrixXcd A(K, static_cast<Eigen::Index>(X.size()));
    for (std::size_t i = 0; i < X.size(); ++i)
      for (Eigen::Index k = 0; k < K; ++k) A(k, static_cast<Eigen::Index>(i)) = X[i][pos[k]] - mu[pos[k]];
    C.blocks.push_back(A * A.adjoint() / N);
  }
  return C;
}

double off_block_ratio(const Eigen::MatrixXcd& C, const BasisSpec& basis) {
  const auto& idx = basis.indices();
  double off = 0.0, total = 0.0;
  for (Eigen::Index a = 0; a < C.rows(); ++a)
    for (Eigen::Index b = 0; b < C.cols(); ++b) {
      const double e = std::norm(C(a, b));
      total += e;
      if (idx[a].n != idx[b].n) off += e;
    }
  return total > 0.0 ? std::sqrt(off / total) : 0.0;
}

Image synthesize_extended(const CoeffVec& alpha, const BasisSpec& basis, int size) {
  const int L = basis.grid_size();
  Image out(size, basis.pixel_size());
  const double h = 0.5 * (size - 1);
  const double step = 2.0 / L;
  const auto& idx = basis.indices();
  for (int j = 0; j < size; ++j)
    for (int i = 0; i < size; ++i) {
      const double x = (i - h) * step, y = (j - h) * step;
      const double r = std::hypot(x, y);
      const double theta = std::atan2(y, x);
      Complex acc = 0.0;
      for (std::size_t q = 0; q < idx.size(); ++q) {
        if (alpha[q] == Complex(0.0)) continue;
        const int n = idx[q].n;
        const double radial = basis.normalizers()[q] * std::cyl_bessel_j(static_cast<double>(std::abs(n)), basis.lambdas()[q] * r);
        acc += alpha[q] * radial * std::polar(1.0, n * theta);
      }
      out(i, j) = acc.real();
    }
  return out;
}

Image spatial_convolve(const Image& img, const Eigen::MatrixXd& kernel) {
  const Eigen::Index L = img.data.rows();
  if (img.data.cols() != L || kernel.rows() != kernel.cols() || kernel.rows() % 2 == 0)
    throw std::invalid_argument("oracle: square image and odd square kernel required");
  const Eigen::Index P = 2 * L;
  const Eigen::Index R = kernel.rows() / 2;
  if (R >= L) throw std::invalid_argument("oracle: kernel larger than the image");
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(P, P);
  a.topLeftCorner(L, L) = img.data.cast<Complex>();
  Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(P, P);
  for (Eigen::Index v = -R; v <= R; ++v)
    for (Eigen::Index u = -R; u <= R; ++u) k((u + P) % P, (v + P) % P) = kernel(u + R, v + R);
  const Eigen::MatrixXcd c = ifft2((fft2(a).array() * fft2(k).array()).matrix());
  Image out(static_cast<int>(L), img.pixel_size);
  out.data = c.topLeftCorner(L, L).real();
  return out;
}

}  // namespace scov::oracle
