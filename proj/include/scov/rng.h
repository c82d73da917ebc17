#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

namespace scov {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// Multipliers 0xD2511F53 / 0xCD9E8D57, Weyl key increments 0x9E3779B9 /
// 0xBB67AE85, ten rounds. Each (seed, stream) pair owns an independent
// sequence: the 64-bit seed is the key, the 128-bit counter is
// (block index, stream id). Outputs are reproducible on any platform.
using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxBlock philox4x32_10(PhiloxBlock counter, PhiloxKey key);

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via the Box-Muller transform.
  double normal();

 private:
  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  PhiloxBlock buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream ids used by the simulator; combined with an image index so every
// image draws from its own sequence.
enum class StreamPurpose : std::uint64_t {
  kPhantom = 1,
  kRotation = 2,
  kNoise = 3,
  kSteer = 4,
  kTest = 5,
};

inline std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index) {
  return (static_cast<std::uint64_t>(purpose) << 48) ^ index;
}

// Uniformly distributed rotation (Haar measure on SO(3)) from a normalized
// Gaussian quaternion.
Eigen::Matrix3d random_rotation(CounterRng& rng);

}  // namespace scov
