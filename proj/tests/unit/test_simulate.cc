#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <gtest/gtest.h>

#include "scov/rng.h"
#include "scov/simulate.h"

namespace scov {
namespace {

Eigen::Matrix3d rot_z(double a) {
  return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

TEST(Phantom, SeededAndWithinRanges) {
  const auto a = phantom_blobs(32, 4);
  const auto b = phantom_blobs(32, 4);
  const auto c = phantom_blobs(32, 5);
  ASSERT_EQ(a.size(), static_cast<std::size_t>(kPhantomBlobs));
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].center, b[i].center);
    differs = differs || a[i].center != c[i].center;
    EXPECT_GE(a[i].sigma.minCoeff(), 0.04 * 32);
    EXPECT_LE(a[i].sigma.maxCoeff(), 0.10 * 32);
    EXPECT_GE(a[i].amplitude, 0.5);
    EXPECT_LT(a[i].amplitude, 1.5);
    EXPECT_LE(a[i].center.norm(), 0.8 * 16 - 2 * 0.10 * 32 + 1e-12);
    EXPECT_NEAR(a[i].orientation.determinant(), 1.0, 1e-12);
  }
  EXPECT_TRUE(differs);
  EXPECT_NEAR(phantom_blobs(32, 4, 2.0)[0].amplitude, 2.0 * a[0].amplitude, 1e-15);
}

TEST(Phantom, VoxelsEvaluateBlobs) {
  const Volume v = make_phantom(16, 3);
  const auto blobs = phantom_blobs(16, 3);
  EXPECT_DOUBLE_EQ(v.at(2, 9, 11), blob_density(blobs, {2 - 7.5, 9 - 7.5, 11 - 7.5}));
  EXPECT_GT(v.sum(), 0.0);
}

TEST(Project, IdentityIsColumnSum) {
  Volume v = make_phantom(16, 1, 1.0, 1.5);
  const Image p = project(v, Eigen::Matrix3d::Identity());
  for (int j = 0; j < 16; j += 3)
    for (int i = 0; i < 16; i += 5) {
      double s = 0;
      for (int k = 0; k < 16; ++k) s += v.at(i, j, k);
      EXPECT_NEAR(p(i, j), 1.5 * s, 1e-12 * s);
    }
}

TEST(Project, QuarterTurnPermutesPixels) {
  const Volume v = make_phantom(16, 2);
  const Image p0 = project(v, Eigen::Matrix3d::Identity());
  Eigen::Matrix3d R;
  R << 0, -1, 0, 1, 0, 0, 0, 0, 1;  // exact quarter turn about z
  const Image p1 = project(v, R);
  // Sample point R^T (x, y) = (y, -x).
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i) EXPECT_NEAR(p1(i, j), p0(j, 15 - i), 1e-12);
}

TEST(Project, ConservesMass) {
  const Volume v = make_phantom(32, 6);
  CounterRng rng(1, stream_id(StreamPurpose::kTest, 20));
  for (int t = 0; t < 3; ++t) {
    const Image p = project(v, random_rotation(rng));
    EXPECT_NEAR(p.data.sum(), v.sum(), 0.02 * v.sum());
  }
}

TEST(Project, RejectsImproperMatrix) {
  const Volume v = make_phantom(8, 1);
  EXPECT_THROW(project(v, -Eigen::Matrix3d::Identity()), std::invalid_argument);
  EXPECT_THROW(project(v, 2.0 * Eigen::Matrix3d::Identity()), std::invalid_argument);
  EXPECT_NO_THROW(project(v, rot_z(0.3)));
}

TEST(Noise, Psd) {
  NoiseModel white{NoiseKind::kWhite, 2.0};
  NoiseModel colored{NoiseKind::kColored, 2.0};
  EXPECT_EQ(white.psd(0.7, 64), 1.0);
  EXPECT_EQ(colored.psd(0.0, 64), 1.0);
  EXPECT_DOUBLE_EQ(colored.psd(1.0, 40), 1.0 / 3.0);
  const BasisSpec b = build_basis(16, 1.0);
  const Eigen::VectorXd w = colored.psd_weights(b);
  const std::size_t j = b.index_of(3, 2);
  EXPECT_DOUBLE_EQ(w[j], colored.psd(b.lambdas()[j] / (std::numbers::pi * 8), 16));
}

class Simulation : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    basis_ = new BasisSpec(build_basis(16, 1.0));
    phantom_ = new Volume(make_phantom(16, 7));
  }
  static void TearDownTestSuite() {
    delete basis_;
    delete phantom_;
  }
  static SimulationOptions options(double snr) {
    SimulationOptions o;
    o.num_images = 300;
    o.num_groups = 5;
    o.snr = snr;
    o.seed = 17;
    return o;
  }
  static BasisSpec* basis_;
  static Volume* phantom_;
};
BasisSpec* Simulation::basis_ = nullptr;
Volume* Simulation::phantom_ = nullptr;

TEST_F(Simulation, GroupsAndDefocus) {
  const Dataset d = make_dataset(*phantom_, *basis_, options(0.5));
  EXPECT_EQ(d.size(), 300u);
  EXPECT_EQ(d.num_groups(), 5);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d.group_of[i], static_cast<int>(i % 5));
  EXPECT_DOUBLE_EQ(d.ctfs.front().defocus_um, 1.0);
  EXPECT_DOUBLE_EQ(d.ctfs[2].defocus_um, 2.5);
  EXPECT_DOUBLE_EQ(d.ctfs.back().defocus_um, 4.0);
  EXPECT_DOUBLE_EQ(d.pixel_size, 0.832 * 32);
  EXPECT_NO_THROW(d.validate());
}

TEST_F(Simulation, MeasuredSnrNearTarget) {
  for (double snr : {0.1, 1.0}) {
    const Dataset d = make_dataset(*phantom_, *basis_, options(snr));
    EXPECT_NEAR(d.measured_snr / snr, 1.0, 0.05);
  }
}

TEST_F(Simulation, ThreadCountDoesNotChangeBytes) {
  SimulationOptions o = options(0.2);
  o.random_steer = true;
  const Dataset a = make_dataset(*phantom_, *basis_, o);
  o.threads = 3;
  const Dataset b = make_dataset(*phantom_, *basis_, o);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(a.images[i].data == b.images[i].data);
    EXPECT_TRUE(a.clean_images[i].data == b.clean_images[i].data);
  }
}

TEST_F(Simulation, NoiselessImagesAreFilteredCleanImages) {
  const Dataset d = make_dataset(*phantom_, *basis_, options(std::numeric_limits<double>::infinity()));
  EXPECT_EQ(d.noise.sigma2, 0.0);
  EXPECT_TRUE(std::isinf(d.measured_snr));
  for (std::size_t i : {0u, 7u, 123u}) {
    const RadialWeightVec h = ctf_to_weights(d.ctfs[d.group_of[i]], *basis_);
    const Image ref = synthesize(radial_convolve(expand(d.clean_images[i], *basis_), h), *basis_);
    EXPECT_LT((ref.data - d.images[i].data).cwiseAbs().maxCoeff(),
              1e-8 * d.images[i].data.cwiseAbs().maxCoeff());
  }
}

TEST_F(Simulation, NoiseCoefficientVariance) {
  SimulationOptions o = options(0.05);
  o.num_images = 800;
  const Dataset noisy = make_dataset(*phantom_, *basis_, o);
  o.snr = std::numeric_limits<double>::infinity();
  const Dataset clean = make_dataset(*phantom_, *basis_, o);
  const Eigen::VectorXd psd = noisy.noise.psd_weights(*basis_);
  Eigen::VectorXd power = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis_->size()));
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    Image diff = noisy.images[i];
    diff.data -= clean.images[i].data;
    power += expand(diff, *basis_).cwiseAbs2();
  }
  power /= static_cast<double>(noisy.size()) * noisy.noise.sigma2;
  const Eigen::VectorXd ratio = power.cwiseQuotient(psd);
  // Per-index sampling error is about 1/sqrt(800) (or sqrt(2/800) at n = 0).
  EXPECT_NEAR(ratio.mean(), 1.0, 0.02);
  EXPECT_LT((ratio.array() - 1.0).abs().maxCoeff(), 0.25);
}

TEST_F(Simulation, WhiteningRescalesWeightsAndNoise) {
  SimulationOptions o = options(0.05);
  o.num_images = 800;
  const Dataset noisy = make_dataset(*phantom_, *basis_, o);
  o.snr = std::numeric_limits<double>::infinity();
  const Dataset clean = make_dataset(*phantom_, *basis_, o);
  const Dataset w = whiten(noisy, *basis_);
  ASSERT_TRUE(w.whitened_from.has_value());
  EXPECT_EQ(w.noise.kind, NoiseKind::kWhite);
  EXPECT_EQ(w.noise.sigma2, 1.0);
  const RadialWeightVec filt = whitening_weights(noisy.noise, *basis_);
  const auto eff = effective_weights(w, *basis_);
  const RadialWeightVec h0 = ctf_to_weights(noisy.ctfs[0], *basis_);
  EXPECT_LT((eff[0] - h0.cwiseProduct(filt)).cwiseAbs().maxCoeff(), 1e-15);
  double power = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const CoeffVec signal = radial_convolve(expand(clean.images[i], *basis_), filt);
    power += (expand(w.images[i], *basis_) - signal).squaredNorm();
  }
  EXPECT_NEAR(power / (static_cast<double>(w.size()) * basis_->size()), 1.0, 0.02);
}

TEST_F(Simulation, RandomSteerChangesCleanImages) {
  SimulationOptions o = options(1.0);
  o.num_images = 4;
  o.num_groups = 1;
  const Dataset a = make_dataset(*phantom_, *basis_, o);
  o.random_steer = true;
  const Dataset b = make_dataset(*phantom_, *basis_, o);
  EXPECT_FALSE(a.clean_images[1].data.isApprox(b.clean_images[1].data, 1e-3));
  // Steering preserves the coefficient norm.
  EXPECT_NEAR(expand(a.clean_images[1], *basis_).norm(), expand(b.clean_images[1], *basis_).norm(),
              1e-8 * expand(a.clean_images[1], *basis_).norm());
}

TEST_F(Simulation, RejectsBadOptions) {
  SimulationOptions o = options(1.0);
  o.num_groups = 400;
  EXPECT_THROW(make_dataset(*phantom_, *basis_, o), std::invalid_argument);
  o = options(0.0);
  EXPECT_THROW(make_dataset(*phantom_, *basis_, o), std::invalid_argument);
  EXPECT_THROW(make_dataset(make_phantom(8, 1), *basis_, options(1.0)), std::invalid_argument);
}

TEST(NoiseVariance, CornerEstimate) {
  CounterRng rng(2, stream_id(StreamPurpose::kTest, 21));
  std::vector<Image> imgs(400, Image(16, 1.0));
  for (auto& img : imgs)
    for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data.data()[i] = 3.0 * rng.normal();
  EXPECT_NEAR(estimate_noise_variance(imgs), 9.0 * 4.0 / 256.0, 0.1 * 9.0 * 4.0 / 256.0);
}

}  // namespace
}  // namespace scov
