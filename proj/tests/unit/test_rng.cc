#include <cmath>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "scov/rng.h"

namespace scov {
namespace {

// Known-answer vectors of the reference Philox4x32-10 implementation.
TEST(Philox, KnownAnswerZero) {
  const PhiloxBlock out = philox4x32_10({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (PhiloxBlock{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerOnes) {
  const PhiloxBlock out =
      philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (PhiloxBlock{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const PhiloxBlock out = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                        {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (PhiloxBlock{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(CounterRng, SameSeedAndStreamRepeat) {
  CounterRng a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u32(), b.next_u32());
}

TEST(CounterRng, StreamsDiffer) {
  CounterRng a(42, stream_id(StreamPurpose::kNoise, 0)), b(42, stream_id(StreamPurpose::kNoise, 1));
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.next_u32() == b.next_u32();
  EXPECT_LT(equal, 3);
}

TEST(CounterRng, UniformAndNormalMoments) {
  CounterRng rng(1, 2);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.01);
}

TEST(RandomRotation, IsProperOrthogonal) {
  CounterRng rng(3, 4);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Matrix3d R = random_rotation(rng);
    EXPECT_NEAR((R * R.transpose() - Eigen::Matrix3d::Identity()).norm(), 0.0, 1e-13);
    EXPECT_NEAR(R.determinant(), 1.0, 1e-13);
  }
}

TEST(RandomRotation, ViewingDirectionsAreUniform) {
  // The third row of R is the viewing direction; its z component is
  // uniform on [-1, 1] under the Haar measure.
  CounterRng rng(5, 6);
  const int n = 40000;
  double mean = 0, second = 0;
  for (int i = 0; i < n; ++i) {
    const double z = random_rotation(rng)(2, 2);
    mean += z;
    second += z * z;
  }
  EXPECT_NEAR(mean / n, 0.0, 0.015);
  EXPECT_NEAR(second / n, 1.0 / 3.0, 0.01);
}

}  // namespace
}  // namespace scov
