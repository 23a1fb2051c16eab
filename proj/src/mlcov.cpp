#include "mlkrig/mlcov.hpp"

#include <algorithm>
#include <sstream>

namespace mlkrig {

Scalar TaperedCovariance::density() const {
  const Scalar m = static_cast<Scalar>(size());
  return m > 0 ? static_cast<Scalar>(full_nonzeros()) / (m * m) : 0.0;
}

Scalar TaperedCovariance::half_density() const {
  const Scalar m = static_cast<Scalar>(size());
  return m > 0 ? static_cast<Scalar>(stored_entries()) / (0.5 * m * (m + 1.0)) : 0.0;
}

Vector TaperedCovariance::diagonal() const { return lower_.diagonal(); }

Matrix TaperedCovariance::to_dense() const {
  Matrix out = Matrix(lower_);
  out.triangularView<Eigen::StrictlyUpper>() = out.transpose().triangularView<Eigen::StrictlyUpper>();
  return out;
}

SparseMatrix TaperedCovariance::full() const {
  return lower_.selfadjointView<Eigen::Lower>();
}

Vector TaperedCovariance::multiply(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != size()) throw InputError("TaperedCovariance::multiply: length mismatch");
  Vector y = lower_.selfadjointView<Eigen::Lower>() * x;
  return y;
}

namespace {

// Calls sink(b, a, block) with block = psi_b^T C psi_a for every admissible
// group pair, each unordered pair exactly once; a is never coarser than b
// and same-level pairs have a.row_begin >= b.row_begin.
template <class Sink>
void for_each_block(const MultiLevelBasis& basis, const DecompositionTree& tree,
                    const CovarianceFunction& phi, const AssemblyOptions& options, Sink&& sink) {
  if (options.tau < 0) throw InputError("assemble: tau must be non-negative");
  if (options.min_level < kExtraLevel || options.min_level > basis.max_level()) {
    throw InputError("assemble: min_level out of range");
  }
  if (tree.num_points() != basis.n() || tree.max_level() != basis.max_level()) {
    throw InputError("assemble: basis was not built on this tree");
  }
  const Index chunk = std::max<Index>(options.chunk, 1);
  const auto& groups = basis.groups();
  const Matrix& pts = tree.sorted_points();
  std::vector<Index> cube_group(tree.cubes().size(), -1);
  for (Index gi = 0; gi < static_cast<Index>(groups.size()); ++gi) {
    if (groups[gi].cube >= 0) cube_group[static_cast<std::size_t>(groups[gi].cube)] = gi;
  }

  Matrix kbuf;
  Matrix r;
  auto project = [&](const ContrastGroup& b, Index begin, Index count) {
    const auto pb = pts.middleCols(b.point_begin, b.psi.rows());
    r.resize(b.rows(), count);
    for (Index c0 = 0; c0 < count; c0 += chunk) {
      const Index w = std::min(chunk, count - c0);
      kbuf.resize(b.psi.rows(), w);
      kernel_block(phi, pb, pts.middleCols(begin + c0, w), kbuf);
      r.middleCols(c0, w).noalias() = b.psi.transpose() * kbuf;
    }
  };

  std::vector<Index> found;
  std::vector<Index> stack;
  const int lowest = std::max(options.min_level, 0);
  for (int j = basis.max_level(); j >= lowest; --j) {
    for (Index gb : basis.level_groups(j)) {
      const ContrastGroup& b = groups[gb];
      for (Index u : expanded_cube(tree, b.cube, options.tau)) {
        found.clear();
        stack.assign(1, u);
        while (!stack.empty()) {
          const Index c = stack.back();
          stack.pop_back();
          const Index gi = cube_group[static_cast<std::size_t>(c)];
          if (gi >= 0 && (tree.cube(c).level > j || groups[gi].row_begin >= b.row_begin)) found.push_back(gi);
          const Cube& cube = tree.cube(c);
          for (int k = 0; k < cube.child_count; ++k) stack.push_back(cube.first_child + k);
        }
        if (found.empty()) continue;
        const Cube& cu = tree.cube(u);
        project(b, cu.begin, cu.count());
        for (Index ga : found) {
          const ContrastGroup& a = groups[ga];
          const Matrix block = r.middleCols(a.point_begin - cu.begin, a.psi.rows()) * a.psi;
          sink(b, a, block);
        }
      }
    }
  }

  if (options.min_level == kExtraLevel) {
    for (Index gb : basis.level_groups(kExtraLevel)) {
      const ContrastGroup& b = groups[gb];
      project(b, 0, basis.n());
      for (const ContrastGroup& a : groups) {
        const Matrix block = r.middleCols(a.point_begin, a.psi.rows()) * a.psi;
        sink(b, a, block);
      }
    }
  }
}

}  // namespace

TaperedCovariance assemble(const MultiLevelBasis& basis, const DecompositionTree& tree,
                           const CovarianceFunction& phi, const AssemblyOptions& options) {
  const Index size = basis.rows_through(options.min_level);
  std::vector<Eigen::Triplet<Scalar>> triplets;
  for_each_block(basis, tree, phi, options,
                 [&](const ContrastGroup& b, const ContrastGroup& a, const Matrix& block) {
                   const bool same = &a == &b;
                   for (Index jj = 0; jj < block.cols(); ++jj) {
                     for (Index ii = same ? jj : 0; ii < block.rows(); ++ii) {
                       Index row = b.row_begin + ii;
                       Index col = a.row_begin + jj;
                       if (row < col) std::swap(row, col);
                       triplets.emplace_back(row, col, block(ii, jj));
                     }
                   }
                 });
  SparseMatrix lower(size, size);
  lower.setFromTriplets(triplets.begin(), triplets.end());
  lower.makeCompressed();
  return TaperedCovariance(std::move(lower), options.tau, options.min_level);
}

Matrix assemble_dense(const MultiLevelBasis& basis, const DecompositionTree& tree,
                      const CovarianceFunction& phi, const AssemblyOptions& options) {
  const Index size = basis.rows_through(options.min_level);
  Matrix out = Matrix::Zero(size, size);
  for_each_block(basis, tree, phi, options,
                 [&](const ContrastGroup& b, const ContrastGroup& a, const Matrix& block) {
                   out.block(b.row_begin, a.row_begin, block.rows(), block.cols()) = block;
                   out.block(a.row_begin, b.row_begin, block.cols(), block.rows()) = block.transpose();
                 });
  return out;
}

KernelOperator::KernelOperator(Matrix points, CovarianceFunction phi, Index dense_limit)
    : points_(std::move(points)), phi_(std::move(phi)) {
  if (points_.cols() <= dense_limit) cache_ = kernel_matrix(phi_, points_, points_);
}

Matrix KernelOperator::dense() const {
  if (cached()) return cache_;
  return kernel_matrix(phi_, points_, points_);
}

Vector KernelOperator::apply(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != size()) throw InputError("KernelOperator: length mismatch");
  if (cached()) return cache_ * x;
  return apply_block(Matrix(x)).col(0);
}

Matrix KernelOperator::apply_block(const Eigen::Ref<const Matrix>& x) const {
  if (x.rows() != size()) throw InputError("KernelOperator: length mismatch");
  if (cached()) return cache_ * x;
  constexpr Index chunk = 256;
  Matrix y = Matrix::Zero(size(), x.cols());
  Matrix kbuf(size(), chunk);
  for (Index c0 = 0; c0 < size(); c0 += chunk) {
    const Index w = std::min(chunk, size() - c0);
    kbuf.resize(size(), w);
    kernel_block(phi_, points_, points_.middleCols(c0, w), kbuf);
    y.noalias() += kbuf * x.middleRows(c0, w);
  }
  return y;
}

ContrastOperator::ContrastOperator(const MultiLevelBasis& basis, const SpatialDataset& data,
                                   CovarianceFunction phi, Index dense_limit)
    : basis_(&basis), kernel_(data.locations, std::move(phi), dense_limit) {
  if (data.size() != basis.n()) throw InputError("ContrastOperator: dataset size differs from basis");
}

Vector ContrastOperator::apply(const Eigen::Ref<const Vector>& v) const {
  if (v.size() != size()) throw InputError("ContrastOperator: length must equal n - p");
  return apply_W(*basis_, kernel_.apply(apply_Wt(*basis_, v)));
}

Vector matvec_exact(const MultiLevelBasis& basis, const SpatialDataset& data,
                    const CovarianceFunction& phi, const Eigen::Ref<const Vector>& v) {
  return ContrastOperator(basis, data, phi, 0).apply(v);
}

Vector diag_preconditioner(const MultiLevelBasis& basis, const DecompositionTree& tree,
                           const CovarianceFunction& phi) {
  const Matrix& pts = tree.sorted_points();
  Vector diag(basis.contrast_count());
  constexpr Index chunk = 512;
  for (const ContrastGroup& g : basis.groups()) {
    const Index m = g.psi.rows();
    const auto pg = pts.middleCols(g.point_begin, m);
    Matrix kpsi = Matrix::Zero(m, g.rows());
    Matrix kbuf;
    for (Index c0 = 0; c0 < m; c0 += chunk) {
      const Index w = std::min(chunk, m - c0);
      kbuf.resize(m, w);
      kernel_block(phi, pg, pg.middleCols(c0, w), kbuf);
      kpsi.noalias() += kbuf * g.psi.middleRows(c0, w);
    }
    diag.segment(g.row_begin, g.rows()) = g.psi.cwiseProduct(kpsi).colwise().sum().transpose();
  }
  for (Index k = 0; k < diag.size(); ++k) {
    if (!(diag[k] > 0.0)) {
      std::ostringstream os;
      os << "diagonal entry " << k << " of C_W is not positive (" << diag[k] << ")";
      throw NumericalError(os.str());
    }
  }
  return diag;
}

CovStats cov_stats(const TaperedCovariance& cov, const MultiLevelBasis& basis) {
  CovStats s;
  s.size = cov.size();
  s.stored = cov.stored_entries();
  s.density = cov.density();
  s.half_density = cov.half_density();
  const Vector d = cov.diagonal();
  if (d.size() > 0) {
    s.min_diagonal = d.minCoeff();
    s.max_diagonal = d.maxCoeff();
  }
  for (int level = basis.max_level(); level >= cov.min_level(); --level) {
    s.rows_per_level.emplace_back(level, basis.level_row_count(level));
  }
  return s;
}

Matrix row_centers(const MultiLevelBasis& basis, const DecompositionTree& tree, int min_level) {
  const Index rows = basis.rows_through(min_level);
  Matrix out(tree.dim(), rows);
  for (const ContrastGroup& g : basis.groups()) {
    if (g.row_begin >= rows) continue;
    const Vector c = tree.center(g.cube == kExtraCube ? tree.root() : g.cube);
    for (Index r = g.row_begin; r < g.row_end(); ++r) out.col(r) = c;
  }
  return out;
}

}  // namespace mlkrig
