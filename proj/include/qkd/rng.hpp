#pragma once

#include <array>
#include <cstdint>

namespace qkd {

/// Identifier embedded in every randomized report so runs can be
/// reproduced: generator algorithm plus the substream derivation scheme.
inline constexpr const char* kRngId =
    "xoshiro256** seeded via splitmix64; substream k uses "
    "seed XOR (k+1)*0x9E3779B97F4A7C15";

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

struct SplitMix64 {
  std::uint64_t state;

  std::uint64_t next() {
    std::uint64_t z = (state += kGoldenGamma);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

/// Substream derivation: child streams are indexed off a parent seed.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 sm{seed ^ ((index + 1) * kGoldenGamma)};
  return sm.next();
}

class Xoshiro256StarStar {
 public:
  explicit Xoshiro256StarStar(std::uint64_t seed) {
    SplitMix64 sm{seed};
    for (auto& word : state_) {
      word = sm.next();
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) {
      state_[0] = 1;  // all-zero state is the one forbidden fixed point
    }
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  bool bit() { return (next() >> 63) != 0; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_;
};

}  // namespace qkd
