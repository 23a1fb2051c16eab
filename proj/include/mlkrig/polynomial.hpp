#ifndef MLKRIG_POLYNOMIAL_HPP
#define MLKRIG_POLYNOMIAL_HPP

#include "mlkrig/common.hpp"

#include <array>
#include <string_view>
#include <vector>

namespace mlkrig {

enum class PolynomialBasis { chebyshev, monomial };

std::string_view to_string(PolynomialBasis basis);
PolynomialBasis parse_polynomial_basis(std::string_view name);

using MultiIndex = std::array<int, 3>;

/// Number of d-variate monomials of total degree <= degree: C(d + degree, degree).
Index monomial_count(int dim, int degree);

/// Multi-indices of total degree <= degree, graded: all degree-0 terms, then
/// degree 1, and so on, so the first monomial_count(dim, g) entries span degree g.
std::vector<MultiIndex> graded_multi_indices(int dim, int degree);

/// Evaluates the graded tensor basis at the columns of `points` (d x m) after
/// mapping the box [lower, lower + side]^d affinely onto [-1, 1]^d.
/// Returns an m x monomial_count(dim, degree) matrix.
Matrix local_design(const Eigen::Ref<const Matrix>& points, const Eigen::Ref<const Vector>& lower,
                    Scalar side, int degree, PolynomialBasis basis);

/// Global monomial trend matrix M_f (n x p) in raw coordinates.
Matrix trend_matrix(const Eigen::Ref<const Matrix>& points, int degree);

/// Trend vector m(s0) (length p).
Vector trend_vector(const Eigen::Ref<const Vector>& s0, int degree);

}  // namespace mlkrig

#endif  // MLKRIG_POLYNOMIAL_HPP
