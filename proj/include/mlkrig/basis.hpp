#ifndef MLKRIG_BASIS_HPP
#define MLKRIG_BASIS_HPP

#include "mlkrig/common.hpp"
#include "mlkrig/geometry.hpp"
#include "mlkrig/polynomial.hpp"

#include <Eigen/SparseCore>

#include <vector>

namespace mlkrig {

struct DesignSpec {
  int dim = 2;
  int f = 1;         // trend degree
  int f_tilde = 1;   // basis degree, >= f
  PolynomialBasis polynomial = PolynomialBasis::chebyshev;

  Index p() const { return monomial_count(dim, f); }
  Index p_tilde() const { return monomial_count(dim, f_tilde); }
  void validate() const;
};

/// Contrast vectors of one cube, stored densely over the cube's contiguous
/// tree-order point range.
struct ContrastGroup {
  int level = 0;          // kExtraLevel for the root extra group
  Index cube = 0;         // kExtraCube for the extra group
  Index row_begin = 0;    // first row of W
  Index point_begin = 0;  // first tree position of the support
  Matrix psi;             // support size x vector count, orthonormal columns

  Index rows() const { return psi.cols(); }
  Index row_end() const { return row_begin + psi.cols(); }
  Index point_end() const { return point_begin + psi.rows(); }
};

/// Orthonormal pair (W, L): W has n - p rows annihilating the degree-f trend,
/// with rows ordered [W_t, ..., W_0, W_{-1}]; L has p rows spanning the rest.
class MultiLevelBasis {
 public:
  Index n() const { return n_; }
  Index p() const { return spec_.p(); }
  Index p_tilde() const { return spec_.p_tilde(); }
  Index contrast_count() const { return n_ - spec_.p(); }
  int max_level() const { return max_level_; }
  /// Deepest level holding contrast rows (-1 when only the root group has any).
  /// Leaves never exceed p~ points, so this is usually below max_level().
  int finest_level() const;
  const DesignSpec& spec() const { return spec_; }

  const std::vector<ContrastGroup>& groups() const { return groups_; }
  /// Indices into groups() for one level (kExtraLevel allowed).
  const std::vector<Index>& level_groups(int level) const;
  /// Rows belonging to levels t..level form the prefix [0, rows_through(level)).
  Index rows_through(int level) const;
  Index level_row_begin(int level) const;
  Index level_row_count(int level) const;

  /// L as an n x p matrix in tree order (columns are the rows of L).
  const Matrix& l_columns() const { return l_columns_; }

  const IndexVector& permutation() const { return permutation_; }
  const IndexVector& inverse_permutation() const { return inverse_; }

  /// Level of the group containing a row, and that group's index.
  Index group_of_row(Index row) const;

  Index nnz_w() const;

 private:
  friend MultiLevelBasis build_basis(const DecompositionTree&, const SpatialDataset&, const DesignSpec&);

  Index n_ = 0;
  int max_level_ = 0;
  DesignSpec spec_;
  std::vector<ContrastGroup> groups_;
  std::vector<std::vector<Index>> level_groups_;  // slot 0 is level -1
  std::vector<Index> level_begin_;                // slot 0 is level -1
  std::vector<Index> row_group_;
  Matrix l_columns_;
  IndexVector permutation_;
  IndexVector inverse_;
};

/// Bottom-up orthogonal construction over the tree. Throws InputError when
/// n < p or the degree-f trend design is rank deficient.
MultiLevelBasis build_basis(const DecompositionTree& tree, const SpatialDataset& data,
                            const DesignSpec& spec);

/// Threshold relative to the leading singular value below which a moment
/// direction counts as null.
inline constexpr Scalar kRankTolerance = 1e-12;

/// W v for v in original point order.
Vector apply_W(const MultiLevelBasis& basis, const Eigen::Ref<const Vector>& v);
/// Rows t..min_level only.
Vector apply_W(const MultiLevelBasis& basis, const Eigen::Ref<const Vector>& v, int min_level);
Vector apply_Wt(const MultiLevelBasis& basis, const Eigen::Ref<const Vector>& u);
Vector apply_L(const MultiLevelBasis& basis, const Eigen::Ref<const Vector>& v);
Vector apply_Lt(const MultiLevelBasis& basis, const Eigen::Ref<const Vector>& u);

/// Column-wise versions for n x k blocks.
Matrix apply_W_block(const MultiLevelBasis& basis, const Eigen::Ref<const Matrix>& v);
Matrix apply_L_block(const MultiLevelBasis& basis, const Eigen::Ref<const Matrix>& v);

using SparseRowMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

/// Explicit W ((n - p) x n) and L (p x n) over original point order.
SparseRowMatrix w_matrix(const MultiLevelBasis& basis);
Matrix l_matrix(const MultiLevelBasis& basis);

struct BasisStats {
  std::vector<std::pair<int, Index>> rows_per_level;  // t..0, then -1
  Index nnz_w = 0;
  Scalar trend_residual = 0;     // max |W M_f| with unit-norm columns of M_f
  Scalar accuracy_residual = 0;  // max |W_{0..t} M_ftilde| with unit-norm columns
};
BasisStats basis_stats(const MultiLevelBasis& basis, const SpatialDataset& data);

}  // namespace mlkrig

#endif  // MLKRIG_BASIS_HPP
