#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "scov/denoise.h"
#include "scov/errors.h"
#include "scov/rng.h"
#include "scov/simulate.h"

namespace scov {
namespace {

CoeffVec random_symmetric(const BasisSpec& b, CounterRng& rng) {
  CoeffVec a(static_cast<Eigen::Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j) {
    const int n = b.indices()[j].n;
    if (n < 0) continue;
    a[j] = n == 0 ? Complex(rng.normal(), 0.0) : Complex(rng.normal(), rng.normal());
    if (n > 0) a[b.partner(j)] = std::conj(a[j]);
  }
  return a;
}

// Random PSD blocks; the n = 0 block is real symmetric.
BlockDiagHermitian random_psd(const BasisSpec& b, CounterRng& rng) {
  BlockDiagHermitian C = BlockDiagHermitian::zeros(b);
  for (int n = 0; n < C.num_blocks(); ++n) {
    const Eigen::Index K = C.blocks[n].rows();
    Eigen::MatrixXcd X(K, K);
    for (Eigen::Index i = 0; i < X.size(); ++i)
      X.data()[i] = n == 0 ? Complex(rng.normal(), 0.0) : Complex(rng.normal(), rng.normal());
    C.blocks[n] = X * X.adjoint();
  }
  return C;
}

Eigen::MatrixXcd dense(const BlockDiagHermitian& C, const BasisSpec& b) {
  const auto d = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(d, d);
  for (int n = 0; n < C.num_blocks(); ++n) {
    const auto& pos = b.block_positions(n);
    for (std::size_t r = 0; r < pos.size(); ++r)
      for (std::size_t c = 0; c < pos.size(); ++c) {
        M(pos[r], pos[c]) = C.blocks[n](r, c);
        if (n > 0) M(b.partner(pos[r]), b.partner(pos[c])) = std::conj(C.blocks[n](r, c));
      }
  }
  return M;
}

CoeffVec dense_wiener(const CoeffVec& G, const RadialWeightVec& h, const CoeffVec& mu,
                      const Eigen::MatrixXcd& C, double sigma2) {
  const Eigen::MatrixXcd H = h.cast<Complex>().asDiagonal();
  Eigen::MatrixXcd A = H * C * H;
  A.diagonal().array() += sigma2;
  const CoeffVec r = G - (h.array().cast<Complex>() * mu.array()).matrix();
  return mu + C * H * A.partialPivLu().solve(r);
}

TEST(Wiener, MatchesDenseFormula) {
  const BasisSpec b = build_basis(12, 1.0);
  CounterRng rng(1, stream_id(StreamPurpose::kTest, 10));
  const auto C = random_psd(b, rng);
  const CoeffVec mu = random_symmetric(b, rng);
  RadialWeightVec h(static_cast<Eigen::Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j)
    if (b.indices()[j].n >= 0) h[j] = h[b.partner(j)] = rng.uniform() * 2 - 1;
  const CoeffVec G = random_symmetric(b, rng);
  for (double sigma2 : {0.3, 2.0}) {
    WienerContext ctx(b, mu, C, sigma2);
    EXPECT_EQ(ctx.clipped_eigenvalues(), 0);
    const CoeffVec F = wiener_denoise(G, h, ctx);
    const CoeffVec ref = dense_wiener(G, h, mu, dense(C, b), sigma2);
    EXPECT_LT((F - ref).cwiseAbs().maxCoeff(), 1e-10 * ref.cwiseAbs().maxCoeff());
    EXPECT_EQ(conjugate_asymmetry(F, b), 0.0);
  }
}

TEST(Wiener, LimitingCases) {
  const BasisSpec b = build_basis(8, 1.0);
  CounterRng rng(2, stream_id(StreamPurpose::kTest, 11));
  const CoeffVec mu = random_symmetric(b, rng);
  const CoeffVec G = random_symmetric(b, rng);
  const RadialWeightVec ones = RadialWeightVec::Ones(static_cast<Eigen::Index>(b.size()));
  // No signal variance: the estimate is the mean.
  WienerContext zero(b, mu, BlockDiagHermitian::zeros(b), 1.0);
  EXPECT_LT((wiener_denoise(G, ones, zero) - mu).cwiseAbs().maxCoeff(), 1e-15);
  // No noise, identity CTF, full-rank covariance: the estimate is the data.
  WienerContext clean(b, mu, random_psd(b, rng), 0.0);
  EXPECT_LT((wiener_denoise(G, ones, clean) - G).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_FALSE(clean.build_filter(ones).pseudo_inverse);
}

TEST(Wiener, SingularSystemUsesPseudoInverse) {
  const BasisSpec b = build_basis(8, 1.0);
  CounterRng rng(3, stream_id(StreamPurpose::kTest, 12));
  RadialWeightVec h = RadialWeightVec::Ones(static_cast<Eigen::Index>(b.size()));
  const std::size_t j = b.index_of(0, 1);
  h[j] = 0.0;
  WienerContext ctx(b, CoeffVec::Zero(static_cast<Eigen::Index>(b.size())), random_psd(b, rng), 0.0);
  const GroupFilter& f = ctx.prepare(0, h);
  EXPECT_TRUE(f.pseudo_inverse);
  ASSERT_FALSE(ctx.warnings().empty());
  EXPECT_NE(ctx.warnings().back().find("pseudo-inverse"), std::string::npos);
  const CoeffVec F = ctx.apply(f, random_symmetric(b, rng), h);
  EXPECT_TRUE(F.allFinite());
}

TEST(Wiener, ClipsNegativeCovariance) {
  const BasisSpec b = build_basis(8, 1.0);
  BlockDiagHermitian C = BlockDiagHermitian::zeros(b);
  C.blocks[0](0, 0) = -1.0;
  WienerContext ctx(b, CoeffVec::Zero(static_cast<Eigen::Index>(b.size())), C, 1.0);
  EXPECT_EQ(ctx.clipped_eigenvalues(), 1);
  EXPECT_EQ(ctx.warnings().size(), 1u);
  EXPECT_EQ(ctx.covariance().blocks[0](0, 0), Complex(0.0, 0.0));
}

TEST(Wiener, RejectsForeignBasis) {
  const BasisSpec b = build_basis(8, 1.0);
  const BasisSpec other = build_basis(10, 1.0);
  EXPECT_THROW(WienerContext(b, CoeffVec::Zero(static_cast<Eigen::Index>(b.size())),
                             BlockDiagHermitian::zeros(other), 1.0),
               BasisMismatchError);
}

TEST(FilterCache, LeastRecentlyUsedEviction) {
  const BasisSpec b = build_basis(8, 1.0);
  CounterRng rng(4, stream_id(StreamPurpose::kTest, 13));
  WienerContext ctx(b, CoeffVec::Zero(static_cast<Eigen::Index>(b.size())), random_psd(b, rng), 1.0, 2);
  const RadialWeightVec h = RadialWeightVec::Ones(static_cast<Eigen::Index>(b.size()));
  ctx.prepare(0, h);
  ctx.prepare(1, h);
  ctx.prepare(0, h);  // hit; 1 becomes least recent
  ctx.prepare(2, h);  // evicts 1
  EXPECT_EQ(ctx.cache_hits(), 1u);
  EXPECT_EQ(ctx.cache_misses(), 3u);
  EXPECT_NE(ctx.cached(0), nullptr);
  EXPECT_EQ(ctx.cached(1), nullptr);
  EXPECT_NE(ctx.cached(2), nullptr);
}

class BatchTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    basis_ = new BasisSpec(build_basis(16, 1.0));
    SimulationOptions opt;
    opt.num_images = 40;
    opt.num_groups = 4;
    opt.snr = 1.0;
    opt.seed = 9;
    data_ = new Dataset(make_dataset(make_phantom(16, 9), *basis_, opt));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete basis_;
  }
  static BasisSpec* basis_;
  static Dataset* data_;
};
BasisSpec* BatchTest::basis_ = nullptr;
Dataset* BatchTest::data_ = nullptr;

TEST_F(BatchTest, MatchesPerImageFilterAndThreads) {
  CounterRng rng(5, stream_id(StreamPurpose::kTest, 14));
  const BasisSpec& b = *basis_;
  const auto C = random_psd(b, rng);
  const CoeffVec mu = random_symmetric(b, rng);
  const std::vector<std::size_t> sel{0, 5, 6, 13, 39, 22};
  WienerContext one(b, mu, C, 0.7);
  const auto r1 = denoise_batch(*data_, one, sel, 1);
  EXPECT_EQ(one.cache_misses(), 4u);
  WienerContext small(b, mu, C, 0.7, 1);
  const auto r3 = denoise_batch(*data_, small, sel, 3);
  EXPECT_EQ(small.cache_misses(), 4u);
  const auto weights = effective_weights(*data_, b);
  ASSERT_EQ(r1.size(), sel.size());
  for (std::size_t s = 0; s < sel.size(); ++s) {
    EXPECT_TRUE(r1[s].data == r3[s].data);
    const int g = data_->group_of[sel[s]];
    const Image ref = synthesize(wiener_denoise(expand(data_->images[sel[s]], b), weights[g], one), b);
    EXPECT_LT((ref.data - r1[s].data).cwiseAbs().maxCoeff(), 1e-12 * ref.data.cwiseAbs().maxCoeff());
  }
  const std::vector<std::size_t> bad{40};
  EXPECT_THROW(denoise_batch(*data_, one, bad), std::out_of_range);
}

}  // namespace
}  // namespace scov
