#ifndef MLKRIG_ORDERING_HPP
#define MLKRIG_ORDERING_HPP

#include "mlkrig/common.hpp"

#include <Eigen/SparseCore>

#include <string_view>

namespace mlkrig {

enum class OrderingMethod {
  natural,
  amd,                // approximate minimum degree
  nested_dissection,  // recursive coordinate bisection with vertex separators
};

std::string_view to_string(OrderingMethod method);
OrderingMethod parse_ordering(std::string_view name);

/// Fill-reducing symmetric permutation of a matrix given by its lower
/// triangle. Returns perm with perm[k] = original index eliminated k-th.
/// Nested dissection needs one coordinate column per row (d x n).
IndexVector fill_reducing_ordering(const Eigen::SparseMatrix<Scalar>& lower, OrderingMethod method,
                                   const Matrix* coordinates = nullptr);

/// Geometric nested dissection over the symmetric pattern of `lower`.
IndexVector nested_dissection(const Eigen::SparseMatrix<Scalar>& lower, const Matrix& coordinates,
                              Index leaf_size = 64);

}  // namespace mlkrig

#endif  // MLKRIG_ORDERING_HPP
