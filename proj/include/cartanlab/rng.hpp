#pragma once

#include <cmath>
#include <cstdint>

namespace cartanlab {

/// splitmix64 stream.  Hand-rolled because std::uniform_real_distribution is
/// implementation-defined and reports must be byte-stable for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1) with 53 random bits.
  double uniform01() { return std::ldexp(static_cast<double>(next_u64() >> 11), -53); }

  /// Uniform in [-1,1).
  double symm() { return 2.0 * uniform01() - 1.0; }

 private:
  std::uint64_t state_;
};

}  // namespace cartanlab
