#ifndef MLKRIG_COMMON_HPP
#define MLKRIG_COMMON_HPP

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mlkrig {

using Scalar = double;
using Index = Eigen::Index;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using IndexVector = Eigen::Matrix<Index, Eigen::Dynamic, 1>;

// Contrast levels run from -1 (the root extra group) to t.
inline constexpr int kExtraLevel = -1;

// Tapering radius used to mean "no tapering".
inline constexpr int kTauInfinity = 1 << 20;

/// Invalid user input: bad parameters, malformed files, inconsistent sizes.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not deliver its contract.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the Cholesky factorization on a non-positive pivot.
class NotPositiveDefinite : public NumericalError {
 public:
  NotPositiveDefinite(Index pivot, Scalar value)
      : NumericalError("matrix is not positive definite (pivot " +
                       std::to_string(pivot) + ", value " +
                       std::to_string(value) + ")"),
        pivot_(pivot),
        value_(value) {}

  Index pivot() const { return pivot_; }
  Scalar value() const { return value_; }

 private:
  Index pivot_;
  Scalar value_;
};

}  // namespace mlkrig

#endif  // MLKRIG_COMMON_HPP
