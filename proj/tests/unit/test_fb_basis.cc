#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <utility>

#include <gtest/gtest.h>

#include "scov/errors.h"
#include "scov/fb_basis.h"
#include "scov/rng.h"

namespace scov {
namespace {

CoeffVec random_real_coeffs(const BasisSpec& b, std::uint64_t seed) {
  CounterRng rng(seed, stream_id(StreamPurpose::kTest, 0));
  CoeffVec a(static_cast<Eigen::Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j) {
    const int n = b.indices()[j].n;
    if (n == 0) a[j] = rng.normal();
    if (n > 0) {
      a[j] = Complex(rng.normal(), rng.normal());
      a[b.partner(j)] = std::conj(a[j]);
    }
  }
  return a;
}

Image random_image(int L, std::uint64_t seed) {
  CounterRng rng(seed, stream_id(StreamPurpose::kTest, 1));
  Image g(L, 1.0);
  for (Eigen::Index k = 0; k < g.data.size(); ++k) g.data.data()[k] = rng.normal();
  return g;
}

TEST(BuildBasis, L4MembershipMatchesRootEnumeration) {
  const BasisSpec b = build_basis(4, 1.0);
  const double lambda_max = 2 * std::numbers::pi;
  std::set<std::pair<int, int>> expected;
  for (int n = 0; n <= 8; ++n) {
    int k = 0;
    double prev = std::cyl_bessel_j(static_cast<double>(n), 1e-4);
    for (double x = 2e-4; x <= lambda_max; x += 1e-4) {
      const double cur = std::cyl_bessel_j(static_cast<double>(n), x);
      if ((cur < 0) != (prev < 0)) {
        ++k;
        expected.insert({n, k});
        if (n > 0) expected.insert({-n, k});
      }
      prev = cur;
    }
  }
  std::set<std::pair<int, int>> got;
  for (const auto& idx : b.indices()) got.insert({idx.n, idx.k});
  EXPECT_EQ(got, expected);
  EXPECT_EQ(b.size(), expected.size());
  EXPECT_DOUBLE_EQ(b.lambda_max(), lambda_max);
  EXPECT_EQ(b.lambda_min(), 0.0);
}

TEST(BuildBasis, ConjugateClosedAndOrdered) {
  const BasisSpec b = build_basis(16, 1.0);
  const auto& idx = b.indices();
  std::set<std::pair<int, int>> all;
  for (const auto& i : idx) all.insert({i.n, i.k});
  for (const auto& i : idx) EXPECT_TRUE(all.count({-i.n, i.k}));
  EXPECT_TRUE(all.count({3, 2}) == all.count({-3, 2}));
  for (std::size_t j = 1; j < idx.size(); ++j) {
    const auto key = [](const BasisIndex& i) { return std::make_tuple(std::abs(i.n), i.k, i.n < 0); };
    EXPECT_LT(key(idx[j - 1]), key(idx[j]));
  }
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const std::size_t p = b.partner(j);
    EXPECT_EQ(idx[p].n, -idx[j].n);
    EXPECT_EQ(idx[p].k, idx[j].k);
    EXPECT_EQ(b.index_of(idx[j].n, idx[j].k), j);
  }
  for (int n = 0; n <= b.max_order(); ++n) {
    const auto& pos = b.block_positions(n);
    ASSERT_EQ(static_cast<int>(pos.size()), b.block_size(n));
    for (std::size_t k = 0; k < pos.size(); ++k) {
      EXPECT_EQ(idx[pos[k]].n, n);
      EXPECT_EQ(idx[pos[k]].k, static_cast<int>(k) + 1);
    }
  }
}

TEST(BuildBasis, SizeGrowsLikeLSquared) {
  const BasisSpec b = build_basis(16, 1.0);
  const double ratio = static_cast<double>(b.size()) / (16.0 * 16.0);
  EXPECT_GE(ratio, 0.5);
  EXPECT_LE(ratio, 1.0);
}

TEST(BuildBasis, NormalizersAndLambdas) {
  const BasisSpec b = build_basis(16, 0.7);
  for (std::size_t j = 0; j < b.size(); ++j) {
    const int m = std::abs(b.indices()[j].n);
    const double lam = b.lambdas()[j];
    EXPECT_LT(std::abs(std::cyl_bessel_j(static_cast<double>(m), lam)), 1e-13);
    EXPECT_LE(lam, b.lambda_max());
    const double gamma = 1.0 / (std::sqrt(std::numbers::pi) * std::abs(std::cyl_bessel_j(m + 1.0, lam)));
    EXPECT_NEAR(b.normalizers()[j] / gamma, 1.0, 1e-12);
  }
}

TEST(BuildBasis, ContinuousNormIsOne) {
  // Midpoint quadrature of |psi|^2 over the disk in polar coordinates.
  const BasisSpec b = build_basis(8, 1.0);
  for (std::size_t j : {b.index_of(0, 1), b.index_of(2, 1), b.index_of(-1, 2)}) {
    CoeffVec e = CoeffVec::Zero(static_cast<Eigen::Index>(b.size()));
    e[j] = 1.0;
    const int nr = 2000, nt = 64;
    double sum = 0.0;
    for (int a = 0; a < nr; ++a) {
      const double r = (a + 0.5) / nr;
      for (int t = 0; t < nt; ++t) {
        const double th = 2 * std::numbers::pi * (t + 0.5) / nt;
        sum += std::norm(evaluate(e, b, r * std::cos(th), r * std::sin(th))) * r;
      }
    }
    EXPECT_NEAR(sum * (1.0 / nr) * (2 * std::numbers::pi / nt), 1.0, 1e-5);
  }
}

TEST(BuildBasis, ValidatesArguments) {
  EXPECT_THROW(build_basis(7, 1.0), std::invalid_argument);
  EXPECT_THROW(build_basis(2, 1.0), std::invalid_argument);
  EXPECT_THROW(build_basis(8, 0.0), std::invalid_argument);
  EXPECT_THROW(build_basis(8, 1.5), std::invalid_argument);
}

TEST(BuildBasis, RankDeficientBandAdvisesSmallerRatio) {
  BasisOptions o;
  o.band_ratio = 2.0;
  try {
    build_basis(8, o);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("band_ratio"), std::string::npos);
  }
}

TEST(BuildBasis, HashIdentifiesBasis) {
  EXPECT_EQ(build_basis(8, 1.0).hash(), build_basis(8, 1.0).hash());
  EXPECT_NE(build_basis(8, 1.0).hash(), build_basis(10, 1.0).hash());
  EXPECT_NE(build_basis(8, 1.0).hash(), build_basis(8, 0.9).hash());
}

TEST(Synthesize, ZeroGivesZero) {
  const BasisSpec b = build_basis(8, 1.0);
  EXPECT_EQ(synthesize(CoeffVec::Zero(static_cast<Eigen::Index>(b.size())), b).data.norm(), 0.0);
}

TEST(Synthesize, CenterValueOfRadialFunction) {
  const BasisSpec b = build_basis(16, 1.0);
  CoeffVec e = CoeffVec::Zero(static_cast<Eigen::Index>(b.size()));
  const std::size_t j = b.index_of(0, 1);
  e[j] = 1.0;
  const double gamma = b.normalizers()[j];
  // The disk center sits on a pixel corner for even L.
  EXPECT_NEAR(evaluate(e, b, 0.0, 0.0).real(), gamma, 1e-14);
  const Image img = synthesize(e, b);
  const double x = grid_coordinate(8, 16), y = grid_coordinate(8, 16);
  EXPECT_NEAR(img(8, 8), gamma * std::cyl_bessel_j(0.0, b.lambdas()[j] * std::hypot(x, y)), 1e-13);
}

TEST(Synthesize, OutsideDiskIsZeroAndMatchesEvaluate) {
  const BasisSpec b = build_basis(12, 1.0);
  const CoeffVec a = random_real_coeffs(b, 3);
  const Image img = synthesize(a, b);
  for (int j = 0; j < 12; ++j)
    for (int i = 0; i < 12; ++i) {
      const double x = grid_coordinate(i, 12), y = grid_coordinate(j, 12);
      if (x * x + y * y > 1.0 + 1e-12) {
        EXPECT_EQ(img(i, j), 0.0);
      } else {
        EXPECT_NEAR(img(i, j), evaluate(a, b, x, y).real(), 1e-11);
      }
    }
}

TEST(Synthesize, Linear) {
  const BasisSpec b = build_basis(16, 1.0);
  const CoeffVec a = random_real_coeffs(b, 1), c = random_real_coeffs(b, 2);
  const Image lhs = synthesize(a + c, b);
  const Image rhs_a = synthesize(a, b), rhs_c = synthesize(c, b);
  EXPECT_LT((lhs.data - rhs_a.data - rhs_c.data).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Synthesize, RejectsWrongLength) {
  const BasisSpec b = build_basis(8, 1.0);
  EXPECT_THROW(synthesize(CoeffVec::Zero(3), b), std::invalid_argument);
}

TEST(Expand, BasisFunctionRoundTrip) {
  const BasisSpec b = build_basis(16, 1.0);
  const std::size_t j = b.index_of(2, 1);
  CoeffVec e = CoeffVec::Zero(static_cast<Eigen::Index>(b.size()));
  // A real image needs the conjugate partner; (e_21 + e_-21) has unit
  // weight at (2,1).
  e[j] = 1.0;
  e[b.partner(j)] = 1.0;
  const CoeffVec a = expand(synthesize(e, b), b);
  EXPECT_NEAR(std::abs(a[j] - 1.0), 0.0, 1e-8);
  for (std::size_t q = 0; q < b.size(); ++q)
    if (q != j && q != b.partner(j)) EXPECT_LE(std::abs(a[q]), 1e-8);
}

TEST(Expand, RoundTripRandom) {
  for (int L : {8, 16, 32}) {
    const BasisSpec b = build_basis(L, 1.0);
    const CoeffVec a = random_real_coeffs(b, 10 + L);
    const CoeffVec r = expand(synthesize(a, b), b);
    EXPECT_LE((r - a).norm() / a.norm(), 1e-8) << "L=" << L;
  }
}

TEST(Expand, RadialImageHasOnlyRadialCoefficients) {
  const BasisSpec b = build_basis(16, 1.0);
  CoeffVec a = random_real_coeffs(b, 4);
  for (std::size_t j = 0; j < b.size(); ++j)
    if (b.indices()[j].n != 0) a[j] = 0.0;
  const CoeffVec r = expand(synthesize(a, b), b);
  for (std::size_t j = 0; j < b.size(); ++j)
    if (b.indices()[j].n != 0) EXPECT_LE(std::abs(r[j]), 1e-8 * r.norm());
}

TEST(Expand, RealImageGivesExactConjugateSymmetry) {
  const BasisSpec b = build_basis(16, 1.0);
  const CoeffVec a = expand(random_image(16, 5), b);
  EXPECT_EQ(conjugate_asymmetry(a, b), 0.0);
  for (std::size_t j = 0; j < b.size(); ++j)
    if (b.indices()[j].n == 0) EXPECT_EQ(a[j].imag(), 0.0);
}

TEST(Expand, StabilityBound) {
  const BasisSpec b = build_basis(16, 1.0);
  EXPECT_GT(b.expansion_bound(), 0.0);
  EXPECT_GE(b.condition_number(), 1.0);
  for (int s = 0; s < 10; ++s) {
    const Image g = random_image(16, 100 + s);
    EXPECT_LE(expand(g, b).norm(), b.expansion_bound() * g.data.norm() * (1 + 1e-9));
  }
}

TEST(Expand, BatchMatchesSingleAndIgnoresThreads) {
  const BasisSpec b = build_basis(16, 1.0);
  std::vector<Image> imgs;
  for (int s = 0; s < 150; ++s) imgs.push_back(random_image(16, 200 + s));
  const auto one = expand_batch(imgs, b, 1);
  const auto four = expand_batch(imgs, b, 4);
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    EXPECT_TRUE(one[i] == four[i]);
    EXPECT_LE((one[i] - expand(imgs[i], b)).norm(), 1e-12 * one[i].norm());
  }
}

TEST(Expand, RejectsWrongSize) {
  const BasisSpec b = build_basis(8, 1.0);
  EXPECT_THROW(expand(Image(10, 1.0), b), std::invalid_argument);
}

TEST(Analyze, IsTheAdjointOfSynthesize) {
  for (int L : {8, 16, 32}) {
    const BasisSpec b = build_basis(L, 1.0);
    CounterRng rng(9, 9);
    CoeffVec a(static_cast<Eigen::Index>(b.size()));
    for (auto& x : a) x = Complex(rng.normal(), rng.normal());
    const Image g = random_image(L, 300 + L);
    const double lhs = (synthesize(a, b).data.array() * g.data.array()).sum();
    const double rhs = analyze(g, b).dot(a).real();
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(lhs) + 1e-12) << "L=" << L;
  }
}

TEST(Steer, IdentityAngles) {
  const BasisSpec b = build_basis(16, 1.0);
  const CoeffVec a = random_real_coeffs(b, 6);
  EXPECT_TRUE(steer(a, b, 0.0) == a);
  EXPECT_LE((steer(a, b, 2 * std::numbers::pi) - a).cwiseAbs().maxCoeff(), 1e-14 * a.cwiseAbs().maxCoeff());
}

TEST(Steer, HalfTurnFlipsOddFrequency) {
  const BasisSpec b = build_basis(8, 1.0);
  CoeffVec e = CoeffVec::Zero(static_cast<Eigen::Index>(b.size()));
  const std::size_t j = b.index_of(1, 1);
  e[j] = 1.0;
  const CoeffVec s = steer(e, b, std::numbers::pi);
  EXPECT_NEAR(std::abs(s[j] - Complex(-1.0)), 0.0, 1e-15);
}

TEST(Steer, Unitary) {
  const BasisSpec b = build_basis(16, 1.0);
  const CoeffVec a = random_real_coeffs(b, 7);
  for (double phi : {0.3, 1.7, -2.2, 10.0})
    EXPECT_NEAR(steer(a, b, phi).norm(), a.norm(), 4e-16 * a.norm());
}

TEST(Steer, RotatesTheContinuousImage) {
  // steer(alpha, phi) at angle theta equals alpha at angle theta + phi.
  const BasisSpec b = build_basis(16, 1.0);
  const CoeffVec a = random_real_coeffs(b, 8);
  const double phi = 0.9;
  const CoeffVec s = steer(a, b, phi);
  for (double r : {0.1, 0.5, 0.93})
    for (double th : {0.0, 1.0, 4.0}) {
      const Complex lhs = evaluate(s, b, r * std::cos(th), r * std::sin(th));
      const Complex rhs = evaluate(a, b, r * std::cos(th + phi), r * std::sin(th + phi));
      EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-10);
    }
}

TEST(RadialConvolve, TrivialWeights) {
  const BasisSpec b = build_basis(8, 1.0);
  const CoeffVec a = random_real_coeffs(b, 9);
  EXPECT_TRUE(radial_convolve(a, RadialWeightVec::Ones(static_cast<Eigen::Index>(b.size()))) == a);
  EXPECT_EQ(radial_convolve(a, RadialWeightVec::Zero(static_cast<Eigen::Index>(b.size()))).norm(), 0.0);
  EXPECT_THROW(radial_convolve(a, RadialWeightVec::Ones(2)), std::invalid_argument);
}

TEST(RadialConvolve, CommutesWithSteer) {
  const BasisSpec b = build_basis(16, 1.0);
  const CoeffVec a = random_real_coeffs(b, 10);
  const RadialWeightVec w = radial_weights(b, [](double lam) { return std::cos(0.1 * lam); });
  for (std::size_t j = 0; j < b.size(); ++j) EXPECT_EQ(w[j], w[b.partner(j)]);
  // Both maps are diagonal; the products differ only in rounding order.
  const CoeffVec lhs = radial_convolve(steer(a, b, 0.7), w);
  const CoeffVec rhs = steer(radial_convolve(a, w), b, 0.7);
  for (std::size_t j = 0; j < b.size(); ++j) EXPECT_LE(std::abs(lhs[j] - rhs[j]), 4e-16 * std::abs(a[j]));
}

}  // namespace
}  // namespace scov
