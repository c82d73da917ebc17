#include "scov/covariance.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "scov/ctf.h"
#include "scov/errors.h"
#include "scov/parallel.h"

namespace scov {
namespace {

constexpr std::size_t kShardSize = 256;

void check_inputs(std::span<const CoeffVec> G, const ImageWeights& H, const BasisSpec& basis) {
  if (G.empty()) throw std::invalid_argument("no images");
  if (G.size() != H.size()) throw std::invalid_argument("images and weights differ in length");
  H.validate(basis.size());
  for (const auto& g : G)
    if (static_cast<std::size_t>(g.size()) != basis.size())
      throw std::invalid_argument("coefficient vector length does not match basis");
}

// Mirrors the lower triangle into the upper one so the block is exactly
// Hermitian.
void hermitize_lower(Eigen::MatrixXcd& B) {
  for (Eigen::Index c = 0; c < B.cols(); ++c) {
    B(c, c) = Complex(B(c, c).real(), 0.0);
    for (Eigen::Index r = c + 1; r < B.rows(); ++r) B(c, r) = std::conj(B(r, c));
  }
}

void symmetrize_lower(Eigen::MatrixXd& B) {
  for (Eigen::Index c = 0; c < B.cols(); ++c)
    for (Eigen::Index r = c + 1; r < B.rows(); ++r) B(c, r) = B(r, c);
}

Eigen::MatrixXcd hermitian_part(const Eigen::MatrixXcd& B) {
  Eigen::MatrixXcd out = 0.5 * (B + B.adjoint());
  for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, i) = Complex(out(i, i).real(), 0.0);
  return out;
}

Eigen::MatrixXcd psd_projection(const Eigen::MatrixXcd& B, int* clipped) {
  if (B.size() == 0) return B;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(B);
  Eigen::VectorXd values = eig.eigenvalues();
  // Round-off negatives are zeroed but not counted.
  const double noise_floor = 1e-12 * values.cwiseAbs().maxCoeff();
  int changed = 0, significant = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0) {
      if (values[i] < -noise_floor) ++significant;
      values[i] = 0.0;
      ++changed;
    }
  }
  if (clipped) *clipped += significant;
  if (changed == 0) return B;
  return hermitian_part(eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().adjoint());
}

CovarianceAccumulator accumulate_shard(std::span<const CoeffVec> G, const ImageWeights& H,
                                       const CoeffVec& mean, const BasisSpec& basis,
                                       std::size_t begin, std::size_t end) {
  CovarianceAccumulator acc = CovarianceAccumulator::zeros(basis);
  const Eigen::Index S = static_cast<Eigen::Index>(end - begin);
  for (int n = 0; n <= basis.max_order(); ++n) {
    const auto& pos = basis.block_positions(n);
    const Eigen::Index K = static_cast<Eigen::Index>(pos.size());
    Eigen::MatrixXcd X(K, S);
    Eigen::MatrixXd Y(K, S);
    for (Eigen::Index i = 0; i < S; ++i) {
      const RadialWeightVec& h = H[begin + i];
      const CoeffVec& g = G[begin + i];
      for (Eigen::Index k = 0; k < K; ++k) {
        const double hk = h[pos[k]];
        X(k, i) = hk * (g[pos[k]] - hk * mean[pos[k]]);
        Y(k, i) = hk * hk;
      }
    }
    Eigen::MatrixXcd& num = acc.numerator.blocks[n];
    num.selfadjointView<Eigen::Lower>().rankUpdate(X);
    hermitize_lower(num);
    Eigen::MatrixXd& den = acc.denominator[n];
    den.selfadjointView<Eigen::Lower>().rankUpdate(Y);
    symmetrize_lower(den);
    acc.weight_power[n] = Y.rowwise().sum();
  }
  acc.count = end - begin;
  return acc;
}

std::string block_entry_name(int n, Eigen::Index k, Eigen::Index kp) {
  std::ostringstream os;
  os << "(n=" << n << ", k=" << k + 1 << ", k'=" << kp + 1 << ")";
  return os.str();
}

}  // namespace

ImageWeights ImageWeights::per_image(std::vector<RadialWeightVec> weights) {
  ImageWeights out;
  out.group_of.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) out.group_of[i] = static_cast<int>(i);
  out.groups = std::move(weights);
  return out;
}

ImageWeights ImageWeights::uniform(const RadialWeightVec& weights, std::size_t count) {
  ImageWeights out;
  out.groups.push_back(weights);
  out.group_of.assign(count, 0);
  return out;
}

std::vector<double> ImageWeights::multiplicity() const {
  std::vector<double> counts(groups.size(), 0.0);
  for (int g : group_of) counts[g] += 1.0;
  return counts;
}

void ImageWeights::validate(std::size_t coefficient_count) const {
  for (int g : group_of)
    if (g < 0 || g >= num_groups()) throw std::invalid_argument("unknown group id " + std::to_string(g));
  for (const auto& w : groups)
    if (static_cast<std::size_t>(w.size()) != coefficient_count)
      throw std::invalid_argument("weight vector length does not match basis");
}

CoeffVec estimate_mean(std::span<const CoeffVec> G, const ImageWeights& H, const BasisSpec& basis) {
  check_inputs(G, H, basis);
  const Eigen::Index d = static_cast<Eigen::Index>(basis.size());
  CoeffVec num = CoeffVec::Zero(d);
  Eigen::VectorXd den = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < G.size(); ++i) {
    const RadialWeightVec& h = H[i];
    num += (G[i].array() * h.array().cast<Complex>()).matrix();
    den += h.array().square().matrix();
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    if (den[j] == 0.0) {
      const auto& idx = basis.indices()[j];
      std::ostringstream os;
      os << "mean undetermined: all weights vanish at (n=" << idx.n << ", k=" << idx.k << ")";
      throw NumericalError(os.str());
    }
  }
  return (num.array() / den.array().cast<Complex>()).matrix();
}

CovarianceAccumulator CovarianceAccumulator::zeros(const BasisSpec& basis) {
  CovarianceAccumulator acc;
  acc.numerator = BlockDiagHermitian::zeros(basis);
  for (int n = 0; n <= basis.max_order(); ++n) {
    const int k = basis.block_size(n);
    acc.denominator.push_back(Eigen::MatrixXd::Zero(k, k));
    acc.weight_power.push_back(Eigen::VectorXd::Zero(k));
  }
  return acc;
}

void CovarianceAccumulator::merge(const CovarianceAccumulator& other) {
  if (other.numerator.basis_hash != numerator.basis_hash ||
      other.denominator.size() != denominator.size())
    throw std::invalid_argument("merging accumulators of different bases");
  for (std::size_t n = 0; n < denominator.size(); ++n) {
    numerator.blocks[n] += other.numerator.blocks[n];
    denominator[n] += other.denominator[n];
    weight_power[n] += other.weight_power[n];
  }
  count += other.count;
}

CovarianceAccumulator accumulate(std::span<const CoeffVec> G, const ImageWeights& H,
                                 const CoeffVec& mean, const BasisSpec& basis, int threads) {
  check_inputs(G, H, basis);
  if (static_cast<std::size_t>(mean.size()) != basis.size())
    throw std::invalid_argument("mean length does not match basis");
  const std::size_t shards = (G.size() + kShardSize - 1) / kShardSize;
  std::vector<CovarianceAccumulator> parts(shards);
  parallel_for(shards, threads, [&](std::size_t s) {
    const std::size_t begin = s * kShardSize;
    const std::size_t end = std::min(G.size(), begin + kShardSize);
    parts[s] = accumulate_shard(G, H, mean, basis, begin, end);
  });
  CovarianceAccumulator total = std::move(parts[0]);
  for (std::size_t s = 1; s < shards; ++s) total.merge(parts[s]);
  return total;
}

double shrink_eigenvalue(double x, double gamma) {
  const double edge = (1.0 + std::sqrt(gamma)) * (1.0 + std::sqrt(gamma));
  if (!(x > edge)) return 0.0;
  const double b = x + 1.0 - gamma;
  const double spike = 0.5 * (b + std::sqrt(std::max(b * b - 4.0 * x, 0.0)));
  return std::max(spike - 1.0, 0.0);
}

BlockDiagHermitian solve_covariance(const CovarianceAccumulator& acc, double sigma2,
                                    Shrinkage shrink, SolveDiagnostics* diagnostics, int threads) {
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("sigma2 must be non-negative");
  if (acc.count == 0) throw std::invalid_argument("empty accumulator");
  const std::size_t blocks = acc.denominator.size();
  BlockDiagHermitian out;
  out.basis_hash = acc.numerator.basis_hash;
  out.blocks.resize(blocks);
  std::vector<double> condition(blocks, 1.0);
  std::vector<int> retained(blocks, 0);
  const double N = static_cast<double>(acc.count);

  for (std::size_t n = 0; n < blocks; ++n) {
    const Eigen::MatrixXcd& num = acc.numerator.blocks[n];
    const Eigen::MatrixXd& den = acc.denominator[n];
    if (num.size() == 0) continue;
    const double drift = (num - num.adjoint()).cwiseAbs().maxCoeff();
    if (drift > 1e-8 * std::max(num.cwiseAbs().maxCoeff(), 1e-300))
      throw NumericalError("numerator block n=" + std::to_string(n) + " is not Hermitian");
    for (Eigen::Index c = 0; c < den.cols(); ++c)
      for (Eigen::Index r = 0; r < den.rows(); ++r)
        if (!(den(r, c) > 0.0))
          throw NumericalError("covariance undetermined: zero denominator at " +
                               block_entry_name(static_cast<int>(n), r, c));
  }

  parallel_for(blocks, threads, [&](std::size_t n) {
    const Eigen::MatrixXcd& num = acc.numerator.blocks[n];
    const Eigen::MatrixXd& den = acc.denominator[n];
    const Eigen::VectorXd& wp = acc.weight_power[n];
    if (num.size() == 0) {
      out.blocks[n] = num;
      return;
    }
    condition[n] = den.maxCoeff() / den.minCoeff();
    Eigen::MatrixXcd C;
    if (shrink == Shrinkage::kOff) {
      Eigen::MatrixXcd lhs = num;
      lhs.diagonal() -= (sigma2 * wp).cast<Complex>();
      C = (lhs.array() / den.array().cast<Complex>()).matrix();
    } else {
      const Eigen::VectorXd m = wp / N;
      const Eigen::VectorXd root = m.cwiseSqrt();
      const Eigen::VectorXd inv_root = root.cwiseInverse();
      Eigen::MatrixXcd S = inv_root.asDiagonal() * (num / N) * inv_root.asDiagonal();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(hermitian_part(S));
      Eigen::VectorXd signal(eig.eigenvalues().size());
      const double gamma = static_cast<double>(num.rows()) / N;
      for (Eigen::Index i = 0; i < signal.size(); ++i) {
        const double ell = eig.eigenvalues()[i];
        signal[i] = sigma2 > 0.0 ? sigma2 * shrink_eigenvalue(ell / sigma2, gamma)
                                 : std::max(ell, 0.0);
        if (signal[i] > 0.0) ++retained[n];
      }
      if (retained[n] == 0) {
        C = Eigen::MatrixXcd::Zero(num.rows(), num.cols());
      } else {
        Eigen::MatrixXcd P = eig.eigenvectors() * signal.asDiagonal() * eig.eigenvectors().adjoint();
        P = root.asDiagonal() * P * root.asDiagonal();
        C = (P.array() / (den / N).array().cast<Complex>()).matrix();
      }
    }
    C = hermitian_part(C);
    if (shrink == Shrinkage::kOn) C = psd_projection(C, nullptr);
    out.blocks[n] = std::move(C);
  });

  if (diagnostics) {
    diagnostics->block_condition = std::move(condition);
    diagnostics->retained = std::move(retained);
  }
  return out;
}

BlockDiagHermitian clip_negative(const BlockDiagHermitian& C, int* clipped) {
  BlockDiagHermitian out;
  out.basis_hash = C.basis_hash;
  int changed = 0;
  for (const auto& b : C.blocks) out.blocks.push_back(psd_projection(b, &changed));
  if (clipped) *clipped = changed;
  return out;
}

std::vector<Eigenimage> eigenimages(const BlockDiagHermitian& C, const BasisSpec& basis, int top) {
  if (C.basis_hash != basis.hash()) throw BasisMismatchError("covariance built against another basis");
  struct Pair {
    double value;
    int n;
    int rank;
    Eigen::VectorXcd vector;
  };
  std::vector<Pair> pairs;
  for (int n = 0; n < C.num_blocks(); ++n) {
    const auto& B = C.blocks[n];
    if (B.size() == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(B);
    const Eigen::Index K = B.rows();
    for (Eigen::Index r = 0; r < K; ++r) {
      const Eigen::Index col = K - 1 - r;  // ascending order from the solver
      pairs.push_back({std::max(eig.eigenvalues()[col], 0.0), n, static_cast<int>(r),
                       eig.eigenvectors().col(col)});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.n != b.n) return a.n < b.n;
    return a.rank < b.rank;
  });
  const std::size_t count = std::min<std::size_t>(pairs.size(), static_cast<std::size_t>(std::max(top, 0)));
  std::vector<Eigenimage> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Pair& p = pairs[i];
    // Fix the global phase so the largest entry is real positive; for a
    // real symmetric n = 0 block this makes the vector real.
    Eigen::Index arg = 0;
    p.vector.cwiseAbs().maxCoeff(&arg);
    const Complex phase = p.vector[arg] / std::abs(p.vector[arg]);
    p.vector *= std::conj(phase);
    CoeffVec alpha = CoeffVec::Zero(static_cast<Eigen::Index>(basis.size()));
    const auto& pos = basis.block_positions(p.n);
    for (std::size_t k = 0; k < pos.size(); ++k) {
      if (p.n == 0) {
        alpha[pos[k]] = Complex(p.vector[k].real(), 0.0);
      } else {
        alpha[pos[k]] = p.vector[k] / std::sqrt(2.0);
        alpha[basis.partner(pos[k])] = std::conj(p.vector[k]) / std::sqrt(2.0);
      }
    }
    Eigenimage e{p.value, p.n, p.rank, alpha, synthesize(alpha, basis)};
    out.push_back(std::move(e));
  }
  return out;
}

EstimationReport estimate_covariance(std::span<const CoeffVec> G, const ImageWeights& H,
                                     const BasisSpec& basis, const EstimateOptions& options) {
  using Clock = std::chrono::steady_clock;
  auto seconds = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  };
  EstimationReport report;
  report.sigma2 = options.sigma2;
  report.shrinkage = options.shrink == Shrinkage::kOn;
  report.basis_hash = basis.hash();

  if (options.check_identifiability) {
    const Wellposedness wp = check_wellposedness(H.groups, basis, H.multiplicity());
    report.delta = wp.delta;
    if (wp.warning) {
      std::ostringstream os;
      os << "identifiability margin delta=" << wp.delta << " is near zero";
      report.warnings.push_back(os.str());
    }
  }

  const auto t0 = Clock::now();
  report.mean = estimate_mean(G, H, basis);
  const auto t1 = Clock::now();
  const CovarianceAccumulator acc = accumulate(G, H, report.mean, basis, options.threads);
  const auto t2 = Clock::now();
  SolveDiagnostics diag;
  report.covariance = solve_covariance(acc, options.sigma2, options.shrink, &diag, options.threads);
  const auto t3 = Clock::now();
  report.block_condition = diag.block_condition;
  report.timings["mean"] = seconds(t0, t1);
  report.timings["accumulate"] = seconds(t1, t2);
  report.timings["solve"] = seconds(t2, t3);
  if (!report.shrinkage) {
    const double lowest = report.covariance.min_eigenvalue();
    if (lowest < 0.0) {
      std::ostringstream os;
      os << "covariance has negative eigenvalues (min " << lowest
         << "); consumers clip them at zero";
      report.warnings.push_back(os.str());
    }
  }
  return report;
}

}  // namespace scov
