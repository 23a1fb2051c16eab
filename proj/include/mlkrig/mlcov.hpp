#ifndef MLKRIG_MLCOV_HPP
#define MLKRIG_MLCOV_HPP

#include "mlkrig/basis.hpp"
#include "mlkrig/geometry.hpp"
#include "mlkrig/kernels.hpp"

#include <Eigen/SparseCore>

#include <vector>

namespace mlkrig {

using SparseMatrix = Eigen::SparseMatrix<Scalar>;

struct AssemblyOptions {
  int tau = 1;                  // kTauInfinity disables tapering
  int min_level = kExtraLevel;  // keep contrast rows of levels t..min_level
  Index chunk = 512;            // kernel columns evaluated per block
};

/// Lower triangle (diagonal included) of the tapered contrast covariance
/// C~^i_W, in the basis row order restricted to levels t..min_level.
class TaperedCovariance {
 public:
  TaperedCovariance() = default;
  TaperedCovariance(SparseMatrix lower, int tau, int min_level)
      : lower_(std::move(lower)), tau_(tau), min_level_(min_level) {}

  Index size() const { return lower_.rows(); }
  int tau() const { return tau_; }
  int min_level() const { return min_level_; }
  const SparseMatrix& lower() const { return lower_; }

  Index stored_entries() const { return lower_.nonZeros(); }
  /// Entries of the full symmetric matrix.
  Index full_nonzeros() const { return 2 * lower_.nonZeros() - size(); }
  /// full_nonzeros / size^2.
  Scalar density() const;
  /// stored_entries / (size (size + 1) / 2).
  Scalar half_density() const;

  Vector diagonal() const;
  Matrix to_dense() const;
  SparseMatrix full() const;
  Vector multiply(const Eigen::Ref<const Vector>& x) const;

 private:
  SparseMatrix lower_;
  int tau_ = 0;
  int min_level_ = kExtraLevel;
};

/// Every admissible entry psi_a^T C psi_b by direct summation over the two
/// supports, one coarse cube and its tau-neighbourhood at a time.
TaperedCovariance assemble(const MultiLevelBasis& basis, const DecompositionTree& tree,
                           const CovarianceFunction& phi, const AssemblyOptions& options);

/// Same entries written to a dense symmetric matrix.
Matrix assemble_dense(const MultiLevelBasis& basis, const DecompositionTree& tree,
                      const CovarianceFunction& phi, const AssemblyOptions& options);

/// y = C x for the full kernel matrix over a point set; caches C when n is
/// at most `dense_limit`, otherwise sums directly on every call.
class KernelOperator {
 public:
  KernelOperator(Matrix points, CovarianceFunction phi, Index dense_limit = 10000);

  Index size() const { return points_.cols(); }
  Vector apply(const Eigen::Ref<const Vector>& x) const;
  Matrix apply_block(const Eigen::Ref<const Matrix>& x) const;
  const Matrix& points() const { return points_; }
  const CovarianceFunction& phi() const { return phi_; }
  bool cached() const { return cache_.size() > 0; }
  /// The dense matrix (computed on demand when not cached).
  Matrix dense() const;

 private:
  Matrix points_;
  CovarianceFunction phi_;
  Matrix cache_;
};

/// v -> W C W^T v over original point order, exact up to rounding.
class ContrastOperator {
 public:
  ContrastOperator(const MultiLevelBasis& basis, const SpatialDataset& data,
                   CovarianceFunction phi, Index dense_limit = 10000);

  Index size() const { return basis_->contrast_count(); }
  Vector apply(const Eigen::Ref<const Vector>& v) const;
  const KernelOperator& kernel() const { return kernel_; }
  const MultiLevelBasis& basis() const { return *basis_; }

 private:
  const MultiLevelBasis* basis_;
  KernelOperator kernel_;
};

Vector matvec_exact(const MultiLevelBasis& basis, const SpatialDataset& data,
                    const CovarianceFunction& phi, const Eigen::Ref<const Vector>& v);

/// Exact diag(C_W); throws NumericalError on a non-positive entry.
Vector diag_preconditioner(const MultiLevelBasis& basis, const DecompositionTree& tree,
                           const CovarianceFunction& phi);

/// Centre of the owning cube for each row t..min_level (the root centre for
/// the level -1 group); the coordinates used by nested dissection.
Matrix row_centers(const MultiLevelBasis& basis, const DecompositionTree& tree, int min_level);

struct CovStats {
  Index size = 0;
  Index stored = 0;
  Scalar density = 0;
  Scalar half_density = 0;
  Scalar min_diagonal = 0;
  Scalar max_diagonal = 0;
  std::vector<std::pair<int, Index>> rows_per_level;
};
CovStats cov_stats(const TaperedCovariance& cov, const MultiLevelBasis& basis);

}  // namespace mlkrig

#endif  // MLKRIG_MLCOV_HPP
