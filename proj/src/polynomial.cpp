#include "mlkrig/polynomial.hpp"

#include <string>

namespace mlkrig {

std::string_view to_string(PolynomialBasis basis) {
  return basis == PolynomialBasis::chebyshev ? "chebyshev" : "monomial";
}

PolynomialBasis parse_polynomial_basis(std::string_view name) {
  if (name == "chebyshev") return PolynomialBasis::chebyshev;
  if (name == "monomial") return PolynomialBasis::monomial;
  throw InputError("unknown polynomial basis '" + std::string(name) + "'");
}

Index monomial_count(int dim, int degree) {
  if (dim < 1 || degree < 0) throw InputError("monomial_count: bad dimension or degree");
  Index c = 1;
  for (int k = 1; k <= dim; ++k) c = c * (degree + k) / k;
  return c;
}

std::vector<MultiIndex> graded_multi_indices(int dim, int degree) {
  if (dim < 1 || dim > 3) throw InputError("dimension must be 1, 2 or 3");
  std::vector<MultiIndex> out;
  for (int g = 0; g <= degree; ++g) {
    if (dim == 1) {
      out.push_back({g, 0, 0});
    } else if (dim == 2) {
      for (int a = g; a >= 0; --a) out.push_back({a, g - a, 0});
    } else {
      for (int a = g; a >= 0; --a) {
        for (int b = g - a; b >= 0; --b) out.push_back({a, b, g - a - b});
      }
    }
  }
  return out;
}

namespace {

// table(k, j) = P_j(u_k) for the univariate family.
Matrix univariate_table(const Eigen::Ref<const Vector>& u, int degree, PolynomialBasis basis) {
  Matrix table(u.size(), degree + 1);
  table.col(0).setOnes();
  if (degree >= 1) table.col(1) = u;
  for (int j = 2; j <= degree; ++j) {
    if (basis == PolynomialBasis::chebyshev) {
      table.col(j) = 2.0 * u.cwiseProduct(table.col(j - 1)) - table.col(j - 2);
    } else {
      table.col(j) = u.cwiseProduct(table.col(j - 1));
    }
  }
  return table;
}

Matrix tensor_design(const std::vector<Matrix>& tables, int dim, int degree) {
  const std::vector<MultiIndex> indices = graded_multi_indices(dim, degree);
  const Index m = tables.front().rows();
  Matrix out(m, static_cast<Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    auto col = out.col(static_cast<Index>(c));
    col = tables[0].col(indices[c][0]);
    for (int k = 1; k < dim; ++k) col = col.cwiseProduct(tables[k].col(indices[c][k]));
  }
  return out;
}

}  // namespace

Matrix local_design(const Eigen::Ref<const Matrix>& points, const Eigen::Ref<const Vector>& lower,
                    Scalar side, int degree, PolynomialBasis basis) {
  const int dim = static_cast<int>(points.rows());
  if (lower.size() != dim || !(side > 0.0)) throw InputError("local_design: bad box");
  std::vector<Matrix> tables;
  tables.reserve(dim);
  for (int k = 0; k < dim; ++k) {
    const Vector u = (2.0 / side) * (points.row(k).transpose().array() - lower[k]) - 1.0;
    tables.push_back(univariate_table(u, degree, basis));
  }
  return tensor_design(tables, dim, degree);
}

Matrix trend_matrix(const Eigen::Ref<const Matrix>& points, int degree) {
  const int dim = static_cast<int>(points.rows());
  std::vector<Matrix> tables;
  tables.reserve(dim);
  for (int k = 0; k < dim; ++k) {
    tables.push_back(univariate_table(points.row(k).transpose(), degree, PolynomialBasis::monomial));
  }
  return tensor_design(tables, dim, degree);
}

Vector trend_vector(const Eigen::Ref<const Vector>& s0, int degree) {
  Matrix point = s0;
  return trend_matrix(point, degree).row(0).transpose();
}

}  // namespace mlkrig
