#include "mlkrig/basis.hpp"

#include <Eigen/SVD>

#include <sstream>

namespace mlkrig {

void DesignSpec::validate() const {
  if (dim != 2 && dim != 3) throw InputError("design: dimension must be 2 or 3");
  if (f < 0) throw InputError("design: trend degree f must be non-negative");
  if (f_tilde < f) throw InputError("design: basis degree f~ must be at least f");
}

namespace {

struct Split {
  Matrix scaling;
  Matrix contrasts;
};

// Rotates the orthonormal columns of V so that the first `rank` columns carry
// the moments against `design` and the rest are annihilated by it.
Split split_moments(const Matrix& v, const Matrix& design) {
  const Matrix moments = v.transpose() * design;
  Eigen::JacobiSVD<Matrix> svd(moments, Eigen::ComputeFullU);
  const auto& sigma = svd.singularValues();
  Index rank = 0;
  if (sigma.size() > 0 && sigma[0] > 0.0) {
    while (rank < sigma.size() && sigma[rank] > kRankTolerance * sigma[0]) ++rank;
  }
  const Matrix q = v * svd.matrixU();
  return {q.leftCols(rank), q.rightCols(q.cols() - rank)};
}

}  // namespace

MultiLevelBasis build_basis(const DecompositionTree& tree, const SpatialDataset& data,
                            const DesignSpec& spec) {
  spec.validate();
  if (spec.dim != tree.dim() || data.dim() != tree.dim()) throw InputError("basis: dimension mismatch");
  const Index n = tree.num_points();
  if (data.size() != n) throw InputError("basis: dataset and tree sizes differ");
  const Index p = spec.p();
  if (n < p) {
    std::ostringstream os;
    os << "basis: need at least p = " << p << " points for trend degree " << spec.f << ", got " << n;
    throw InputError(os.str());
  }

  const int t = tree.max_level();
  const Matrix& pts = tree.sorted_points();
  std::vector<Matrix> scaling(tree.cubes().size());
  std::vector<std::vector<ContrastGroup>> by_level(static_cast<std::size_t>(t + 2));

  for (int level = t; level >= 0; --level) {
    for (Index id : tree.level_cubes(level)) {
      const Cube& c = tree.cube(id);
      const Index m = c.count();
      Matrix v;
      if (c.is_leaf()) {
        v = Matrix::Identity(m, m);
      } else {
        Index q = 0;
        for (int j = 0; j < c.child_count; ++j) q += scaling[c.first_child + j].cols();
        v = Matrix::Zero(m, q);
        Index col = 0;
        for (int j = 0; j < c.child_count; ++j) {
          const Index child = c.first_child + j;
          Matrix& s = scaling[child];
          v.block(tree.cube(child).begin - c.begin, col, s.rows(), s.cols()) = s;
          col += s.cols();
          s.resize(0, 0);
        }
      }
      const Matrix design = local_design(pts.middleCols(c.begin, m), tree.lower_corner(id),
                                         tree.side_length(id), spec.f_tilde, spec.polynomial);
      Split split = split_moments(v, design);
      scaling[id] = std::move(split.scaling);
      if (split.contrasts.cols() > 0) {
        ContrastGroup g;
        g.level = level;
        g.cube = id;
        g.point_begin = c.begin;
        g.psi = std::move(split.contrasts);
        by_level[static_cast<std::size_t>(level + 1)].push_back(std::move(g));
      }
    }
  }

  // Root: separate the degree-f trend directions from the remaining scaling vectors.
  const Matrix trend_design = local_design(pts, Vector::Zero(spec.dim), 1.0, spec.f, spec.polynomial);
  const Matrix& survivors = scaling[tree.root()];
  const Matrix moments = survivors.transpose() * trend_design;
  Eigen::JacobiSVD<Matrix> svd(moments, Eigen::ComputeFullU);
  const auto& sigma = svd.singularValues();
  Index rank = 0;
  if (sigma.size() > 0 && sigma[0] > 0.0) {
    while (rank < sigma.size() && sigma[rank] > kRankTolerance * sigma[0]) ++rank;
  }
  if (rank < p) {
    std::ostringstream os;
    os << "basis: the degree-" << spec.f << " trend design is rank deficient (rank " << rank
       << " < p = " << p << ")";
    throw InputError(os.str());
  }
  const Matrix rotated = survivors * svd.matrixU();

  MultiLevelBasis basis;
  basis.n_ = n;
  basis.max_level_ = t;
  basis.spec_ = spec;
  basis.permutation_ = tree.permutation();
  basis.inverse_ = tree.inverse_permutation();
  basis.l_columns_ = rotated.leftCols(p);
  if (rotated.cols() > p) {
    ContrastGroup g;
    g.level = kExtraLevel;
    g.cube = kExtraCube;
    g.point_begin = 0;
    g.psi = rotated.rightCols(rotated.cols() - p);
    by_level[0].push_back(std::move(g));
  }

  basis.level_groups_.assign(static_cast<std::size_t>(t + 2), {});
  basis.level_begin_.assign(static_cast<std::size_t>(t + 3), 0);
  Index row = 0;
  auto emit = [&](int level) {
    const std::size_t slot = static_cast<std::size_t>(level + 1);
    basis.level_begin_[slot] = row;
    for (ContrastGroup& g : by_level[slot]) {
      g.row_begin = row;
      row += g.rows();
      basis.level_groups_[slot].push_back(static_cast<Index>(basis.groups_.size()));
      basis.groups_.push_back(std::move(g));
    }
  };
  for (int level = t; level >= 0; --level) emit(level);
  emit(kExtraLevel);
  basis.level_begin_[static_cast<std::size_t>(t + 2)] = row;
  if (row != n - p) {
    std::ostringstream os;
    os << "basis: produced " << row << " contrasts, expected " << n - p;
    throw NumericalError(os.str());
  }
  basis.row_group_.resize(static_cast<std::size_t>(row));
  for (Index gi = 0; gi < static_cast<Index>(basis.groups_.size()); ++gi) {
    const ContrastGroup& g = basis.groups_[gi];
    for (Index r = g.row_begin; r < g.row_end(); ++r) basis.row_group_[r] = gi;
  }
  return basis;
}

const std::vector<Index>& MultiLevelBasis::level_groups(int level) const {
  if (level < kExtraLevel || level > max_level_) throw InputError("basis: level out of range");
  return level_groups_[static_cast<std::size_t>(level + 1)];
}

int MultiLevelBasis::finest_level() const {
  for (int level = max_level_; level > kExtraLevel; --level) {
    if (level_row_count(level) > 0) return level;
  }
  return kExtraLevel;
}

Index MultiLevelBasis::level_row_begin(int level) const {
  if (level < kExtraLevel || level > max_level_) throw InputError("basis: level out of range");
  return level_begin_[static_cast<std::size_t>(level + 1)];
}

Index MultiLevelBasis::level_row_count(int level) const {
  Index total = 0;
  for (Index gi : level_groups(level)) total += groups_[gi].rows();
  return total;
}

Index MultiLevelBasis::rows_through(int level) const {
  if (level == kExtraLevel) return contrast_count();
  return level_row_begin(level) + level_row_count(level);
}

Index MultiLevelBasis::group_of_row(Index row) const {
  if (row < 0 || row >= contrast_count()) throw InputError("basis: row out of range");
  return row_group_[static_cast<std::size_t>(row)];
}

Index MultiLevelBasis::nnz_w() const {
  Index total = 0;
  for (const ContrastGroup& g : groups_) total += g.psi.size();
  return total;
}

namespace {

Matrix gather(const MultiLevelBasis& basis, const Eigen::Ref<const Matrix>& v) {
  const auto& perm = basis.permutation();
  Matrix out(v.rows(), v.cols());
  for (Index pos = 0; pos < perm.size(); ++pos) out.row(pos) = v.row(perm[pos]);
  return out;
}

Matrix scatter(const MultiLevelBasis& basis, const Matrix& x) {
  const auto& perm = basis.permutation();
  Matrix out(x.rows(), x.cols());
  for (Index pos = 0; pos < perm.size(); ++pos) out.row(perm[pos]) = x.row(pos);
  return out;
}

Matrix w_prefix(const MultiLevelBasis& basis, const Matrix& tree_order, Index rows) {
  Matrix out(rows, tree_order.cols());
  for (const ContrastGroup& g : basis.groups()) {
    if (g.row_begin >= rows) break;
    out.middleRows(g.row_begin, g.rows()).noalias() =
        g.psi.transpose() * tree_order.middleRows(g.point_begin, g.psi.rows());
  }
  return out;
}

void check_rows(const MultiLevelBasis& basis, Index rows, const char* what) {
  if (rows != basis.n()) throw InputError(std::string(what) + ": length must equal n");
}

}  // namespace

Vector apply_W(const MultiLevelBasis& basis, const Eigen::Ref<const Vector>& v) {
  return apply_W(basis, v, kExtraLevel);
}

Vector apply_W(const MultiLevelBasis& basis, const Eigen::Ref<const Vector>& v, int min_level) {
  check_rows(basis, v.size(), "apply_W");
  return w_prefix(basis, gather(basis, v), basis.rows_through(min_level));
}

Matrix apply_W_block(const MultiLevelBasis& basis, const Eigen::Ref<const Matrix>& v) {
  check_rows(basis, v.rows(), "apply_W");
  return w_prefix(basis, gather(basis, v), basis.contrast_count());
}

Vector apply_Wt(const MultiLevelBasis& basis, const Eigen::Ref<const Vector>& u) {
  if (u.size() != basis.contrast_count()) throw InputError("apply_Wt: length must equal n - p");
  Matrix x = Matrix::Zero(basis.n(), 1);
  for (const ContrastGroup& g : basis.groups()) {
    x.middleRows(g.point_begin, g.psi.rows()).noalias() += g.psi * u.segment(g.row_begin, g.rows());
  }
  return scatter(basis, x);
}

Vector apply_L(const MultiLevelBasis& basis, const Eigen::Ref<const Vector>& v) {
  check_rows(basis, v.size(), "apply_L");
  return basis.l_columns().transpose() * gather(basis, v);
}

Matrix apply_L_block(const MultiLevelBasis& basis, const Eigen::Ref<const Matrix>& v) {
  check_rows(basis, v.rows(), "apply_L");
  return basis.l_columns().transpose() * gather(basis, v);
}

Vector apply_Lt(const MultiLevelBasis& basis, const Eigen::Ref<const Vector>& u) {
  if (u.size() != basis.p()) throw InputError("apply_Lt: length must equal p");
  return scatter(basis, basis.l_columns() * u);
}

SparseRowMatrix w_matrix(const MultiLevelBasis& basis) {
  std::vector<Eigen::Triplet<Scalar>> triplets;
  triplets.reserve(static_cast<std::size_t>(basis.nnz_w()));
  const auto& perm = basis.permutation();
  for (const ContrastGroup& g : basis.groups()) {
    for (Index j = 0; j < g.psi.cols(); ++j) {
      for (Index i = 0; i < g.psi.rows(); ++i) {
        triplets.emplace_back(g.row_begin + j, perm[g.point_begin + i], g.psi(i, j));
      }
    }
  }
  SparseRowMatrix w(basis.contrast_count(), basis.n());
  w.setFromTriplets(triplets.begin(), triplets.end());
  return w;
}

Matrix l_matrix(const MultiLevelBasis& basis) {
  return scatter(basis, basis.l_columns()).transpose();
}

BasisStats basis_stats(const MultiLevelBasis& basis, const SpatialDataset& data) {
  BasisStats s;
  for (int level = basis.max_level(); level >= kExtraLevel; --level) {
    s.rows_per_level.emplace_back(level, basis.level_row_count(level));
  }
  s.nnz_w = basis.nnz_w();
  auto unit_columns = [](Matrix m) {
    for (Index j = 0; j < m.cols(); ++j) m.col(j).normalize();
    return m;
  };
  const Matrix mf = unit_columns(trend_matrix(data.locations, basis.spec().f));
  const Matrix wm = apply_W_block(basis, mf);
  s.trend_residual = wm.size() ? wm.cwiseAbs().maxCoeff() : 0.0;
  const Matrix mft = unit_columns(trend_matrix(data.locations, basis.spec().f_tilde));
  const Index rows = basis.rows_through(0);
  if (rows > 0) {
    const Matrix wt = apply_W_block(basis, mft).topRows(rows);
    s.accuracy_residual = wt.cwiseAbs().maxCoeff();
  }
  return s;
}

}  // namespace mlkrig
