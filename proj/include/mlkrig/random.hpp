#ifndef MLKRIG_RANDOM_HPP
#define MLKRIG_RANDOM_HPP

#include "mlkrig/common.hpp"

#include <cstdint>

namespace mlkrig {

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based generator: draw k of stream s under seed is a pure function
/// of (seed, s, k), so prefixes of a stream never change and streams are
/// independent by construction.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t bits(std::uint64_t counter) const;
  /// Uniform on [0, 1) with 53 random bits.
  Scalar uniform(std::uint64_t counter) const;
  /// Standard normal by Box-Muller from the uniforms at 2k and 2k + 1.
  Scalar normal(std::uint64_t counter) const;

  CounterRng substream(std::uint64_t stream) const { return CounterRng(seed_, stream); }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
};

}  // namespace mlkrig

#endif  // MLKRIG_RANDOM_HPP
