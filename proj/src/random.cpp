#include "mlkrig/random.hpp"

#include <cmath>
#include <numbers>

namespace mlkrig {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), key_(splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL))) {}

std::uint64_t CounterRng::bits(std::uint64_t counter) const { return splitmix64(key_ ^ splitmix64(counter)); }

Scalar CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<Scalar>(bits(counter) >> 11) * 0x1.0p-53;
}

Scalar CounterRng::normal(std::uint64_t counter) const {
  const Scalar u1 = 1.0 - uniform(2 * counter);  // (0, 1]
  const Scalar u2 = uniform(2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace mlkrig
