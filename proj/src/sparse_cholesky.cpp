#include "mlkrig/sparse_cholesky.hpp"

#include <cmath>

namespace mlkrig {

std::vector<Index> elimination_tree(const std::vector<Index>& col_ptr, const std::vector<Index>& row_idx,
                                    Index n) {
  std::vector<Index> parent(static_cast<std::size_t>(n), -1);
  std::vector<Index> ancestor(static_cast<std::size_t>(n), -1);
  for (Index k = 0; k < n; ++k) {
    for (Index p = col_ptr[k]; p < col_ptr[k + 1]; ++p) {
      Index i = row_idx[p];
      while (i != -1 && i < k) {
        const Index next = ancestor[i];
        ancestor[i] = k;
        if (next == -1) parent[i] = k;
        i = next;
      }
    }
  }
  return parent;
}

namespace {

// Nonzero pattern of row k of G in topological order, written to s[top..n).
Index ereach(const std::vector<Index>& col_ptr, const std::vector<Index>& row_idx, Index k,
             const std::vector<Index>& parent, std::vector<Index>& s, std::vector<Index>& mark) {
  const Index n = static_cast<Index>(parent.size());
  Index top = n;
  mark[k] = k;
  for (Index p = col_ptr[k]; p < col_ptr[k + 1]; ++p) {
    Index i = row_idx[p];
    if (i > k) continue;
    Index len = 0;
    for (; mark[i] != k; i = parent[i]) {
      s[len++] = i;
      mark[i] = k;
    }
    while (len > 0) s[--top] = s[--len];
  }
  return top;
}

}  // namespace

void dense_cholesky_inplace(Matrix& a, Index block) {
  const Index n = a.rows();
  if (a.cols() != n) throw InputError("dense_cholesky: matrix must be square");
  block = std::max<Index>(block, 1);
  for (Index k0 = 0; k0 < n; k0 += block) {
    const Index kb = std::min(block, n - k0);
    auto a11 = a.block(k0, k0, kb, kb);
    for (Index j = 0; j < kb; ++j) {
      const Scalar d = a11(j, j) - a11.row(j).head(j).squaredNorm();
      if (!(d > 0.0) || !std::isfinite(d)) throw NotPositiveDefinite(k0 + j, d);
      const Scalar ljj = std::sqrt(d);
      a11(j, j) = ljj;
      for (Index i = j + 1; i < kb; ++i) {
        a11(i, j) = (a11(i, j) - a11.row(i).head(j).dot(a11.row(j).head(j))) / ljj;
      }
    }
    const Index rest = n - k0 - kb;
    if (rest == 0) continue;
    auto a21 = a.block(k0 + kb, k0, rest, kb);
    a11.triangularView<Eigen::Lower>().transpose().solveInPlace<Eigen::OnTheRight>(a21);
    a.block(k0 + kb, k0 + kb, rest, rest).selfadjointView<Eigen::Lower>().rankUpdate(a21, -1.0);
  }
  a.triangularView<Eigen::StrictlyUpper>().setZero();
}

CholFactor analyze_and_factor(const Eigen::SparseMatrix<Scalar>& lower, const CholeskyOptions& options,
                              const Matrix* coordinates) {
  const Index n = lower.rows();
  if (lower.cols() != n) throw InputError("cholesky: matrix must be square");
  CholFactor f;
  f.perm_ = fill_reducing_ordering(lower, options.ordering, coordinates);
  std::vector<Index> pinv(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) pinv[f.perm_[k]] = k;

  // Upper triangle of P A P^T by columns.
  std::vector<Index> cp(static_cast<std::size_t>(n + 1), 0);
  for (Index j = 0; j < lower.outerSize(); ++j) {
    for (Eigen::SparseMatrix<Scalar>::InnerIterator it(lower, j); it; ++it) {
      if (it.row() < j) continue;
      ++cp[std::max(pinv[it.row()], pinv[j]) + 1];
    }
  }
  for (Index k = 0; k < n; ++k) cp[k + 1] += cp[k];
  std::vector<Index> ci(static_cast<std::size_t>(cp[n]));
  std::vector<Scalar> cx(static_cast<std::size_t>(cp[n]));
  {
    std::vector<Index> next(cp.begin(), cp.end() - 1);
    for (Index j = 0; j < lower.outerSize(); ++j) {
      for (Eigen::SparseMatrix<Scalar>::InnerIterator it(lower, j); it; ++it) {
        if (it.row() < j) continue;
        const Index a = pinv[it.row()];
        const Index b = pinv[j];
        const Index q = next[std::max(a, b)]++;
        ci[q] = std::min(a, b);
        cx[q] = it.value();
      }
    }
  }

  f.parent_ = elimination_tree(cp, ci, n);
  std::vector<Index> counts(static_cast<std::size_t>(n), 1);
  std::vector<Index> s(static_cast<std::size_t>(n));
  std::vector<Index> mark(static_cast<std::size_t>(n), -1);
  for (Index k = 0; k < n; ++k) {
    for (Index top = ereach(cp, ci, k, f.parent_, s, mark); top < n; ++top) ++counts[s[top]];
  }
  f.nnz_ = 0;
  for (Index c : counts) f.nnz_ += c;

  const Scalar triangle = 0.5 * static_cast<Scalar>(n) * static_cast<Scalar>(n + 1);
  if (n > 0 && static_cast<Scalar>(f.nnz_) > options.dense_threshold * triangle) {
    f.dense_ = true;
    f.dense_l_ = Matrix::Zero(n, n);
    for (Index k = 0; k < n; ++k) {
      for (Index p = cp[k]; p < cp[k + 1]; ++p) f.dense_l_(k, ci[p]) = cx[p];
    }
    try {
      dense_cholesky_inplace(f.dense_l_);
    } catch (const NotPositiveDefinite& e) {
      throw NotPositiveDefinite(f.perm_[e.pivot()], e.value());
    }
    return f;
  }

  f.col_ptr_.assign(static_cast<std::size_t>(n + 1), 0);
  for (Index k = 0; k < n; ++k) f.col_ptr_[k + 1] = f.col_ptr_[k] + counts[k];
  f.row_idx_.resize(static_cast<std::size_t>(f.nnz_));
  f.values_.resize(static_cast<std::size_t>(f.nnz_));
  std::vector<Index> c(f.col_ptr_.begin(), f.col_ptr_.end() - 1);
  std::vector<Scalar> x(static_cast<std::size_t>(n), 0.0);
  std::fill(mark.begin(), mark.end(), -1);
  for (Index k = 0; k < n; ++k) {
    Index top = ereach(cp, ci, k, f.parent_, s, mark);
    x[k] = 0.0;
    for (Index p = cp[k]; p < cp[k + 1]; ++p) x[ci[p]] += cx[p];
    Scalar d = x[k];
    x[k] = 0.0;
    for (; top < n; ++top) {
      const Index i = s[top];
      const Scalar lki = x[i] / f.values_[f.col_ptr_[i]];
      x[i] = 0.0;
      for (Index p = f.col_ptr_[i] + 1; p < c[i]; ++p) x[f.row_idx_[p]] -= f.values_[p] * lki;
      d -= lki * lki;
      const Index p = c[i]++;
      f.row_idx_[p] = k;
      f.values_[p] = lki;
    }
    if (!(d > 0.0) || !std::isfinite(d)) throw NotPositiveDefinite(f.perm_[k], d);
    const Index p = c[k]++;
    f.row_idx_[p] = k;
    f.values_[p] = std::sqrt(d);
  }
  return f;
}

Vector CholFactor::diagonal() const {
  Vector d(size());
  for (Index k = 0; k < size(); ++k) d[k] = dense_ ? dense_l_(k, k) : values_[col_ptr_[k]];
  return d;
}

Matrix CholFactor::dense_factor() const {
  if (dense_) return dense_l_;
  Matrix g = Matrix::Zero(size(), size());
  for (Index j = 0; j < size(); ++j) {
    for (Index p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) g(row_idx_[p], j) = values_[p];
  }
  return g;
}

Vector CholFactor::solve(const Eigen::Ref<const Vector>& b) const {
  const Index n = size();
  if (b.size() != n) throw InputError("cholesky solve: dimension mismatch");
  Vector y(n);
  for (Index k = 0; k < n; ++k) y[k] = b[perm_[k]];
  if (dense_) {
    dense_l_.triangularView<Eigen::Lower>().solveInPlace(y);
    dense_l_.triangularView<Eigen::Lower>().transpose().solveInPlace(y);
  } else {
    for (Index j = 0; j < n; ++j) {
      y[j] /= values_[col_ptr_[j]];
      const Scalar yj = y[j];
      for (Index p = col_ptr_[j] + 1; p < col_ptr_[j + 1]; ++p) y[row_idx_[p]] -= values_[p] * yj;
    }
    for (Index j = n - 1; j >= 0; --j) {
      Scalar acc = y[j];
      for (Index p = col_ptr_[j] + 1; p < col_ptr_[j + 1]; ++p) acc -= values_[p] * y[row_idx_[p]];
      y[j] = acc / values_[col_ptr_[j]];
    }
  }
  Vector x(n);
  for (Index k = 0; k < n; ++k) x[perm_[k]] = y[k];
  return x;
}

Scalar log_det(const CholFactor& factor) {
  return 2.0 * factor.diagonal().array().log().sum();
}

Vector solve_chol(const CholFactor& factor, const Eigen::Ref<const Vector>& b) { return factor.solve(b); }

}  // namespace mlkrig
