#ifndef MLKRIG_SPARSE_CHOLESKY_HPP
#define MLKRIG_SPARSE_CHOLESKY_HPP

#include "mlkrig/common.hpp"
#include "mlkrig/ordering.hpp"

#include <Eigen/SparseCore>

#include <vector>

namespace mlkrig {

struct CholeskyOptions {
  OrderingMethod ordering = OrderingMethod::amd;
  /// Switch to a dense blocked factorization when the predicted factor fills
  /// more than this fraction of the lower triangle. Values > 1 never switch.
  Scalar dense_threshold = 0.3;
};

/// P A P^T = G G^T with G lower triangular. perm()[k] is the original index
/// eliminated k-th.
class CholFactor {
 public:
  Index size() const { return perm_.size(); }
  const IndexVector& perm() const { return perm_; }
  /// Structural nonzeros of G, diagonal included.
  Index nnz() const { return nnz_; }
  bool is_dense() const { return dense_; }

  Vector diagonal() const;
  /// G as a dense matrix (tests and small problems).
  Matrix dense_factor() const;
  Vector solve(const Eigen::Ref<const Vector>& b) const;

  const std::vector<Index>& parent() const { return parent_; }

 private:
  friend CholFactor analyze_and_factor(const Eigen::SparseMatrix<Scalar>&, const CholeskyOptions&,
                                       const Matrix*);
  IndexVector perm_;
  Index nnz_ = 0;
  bool dense_ = false;
  std::vector<Index> parent_;
  // Sparse storage, CSC with the diagonal first in every column.
  std::vector<Index> col_ptr_;
  std::vector<Index> row_idx_;
  std::vector<Scalar> values_;
  Matrix dense_l_;
};

/// Orders, analyses (elimination tree, column counts) and factors a symmetric
/// matrix given by its lower triangle. Throws NotPositiveDefinite carrying the
/// original index of the failing pivot.
CholFactor analyze_and_factor(const Eigen::SparseMatrix<Scalar>& lower,
                              const CholeskyOptions& options = {},
                              const Matrix* coordinates = nullptr);

/// 2 sum log G_ii.
Scalar log_det(const CholFactor& factor);

Vector solve_chol(const CholFactor& factor, const Eigen::Ref<const Vector>& b);

/// In-place blocked dense Cholesky of the lower triangle of `a`; throws
/// NotPositiveDefinite with the failing row.
void dense_cholesky_inplace(Matrix& a, Index block = 128);

/// Elimination tree of the symmetric matrix whose upper triangle is given by
/// columns (CSC, row indices <= column).
std::vector<Index> elimination_tree(const std::vector<Index>& col_ptr, const std::vector<Index>& row_idx,
                                    Index n);

}  // namespace mlkrig

#endif  // MLKRIG_SPARSE_CHOLESKY_HPP
