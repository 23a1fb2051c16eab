#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace mlkrig;
using namespace mlkrig::testing;

namespace {

Matrix unit_columns(Matrix m) {
  for (Index j = 0; j < m.cols(); ++j) m.col(j).normalize();
  return m;
}

Matrix dense_p(const MultiLevelBasis& basis) {
  const Matrix w = Matrix(w_matrix(basis));
  Matrix p(basis.n(), basis.n());
  p << w, l_matrix(basis);
  return p;
}

}  // namespace

TEST_SUITE("basis") {
  TEST_CASE("monomial counts") {
    CHECK(monomial_count(2, 0) == 1);
    CHECK(monomial_count(2, 1) == 3);
    CHECK(monomial_count(2, 3) == 10);
    CHECK(monomial_count(2, 4) == 15);
    CHECK(monomial_count(3, 1) == 4);
    CHECK(monomial_count(3, 3) == 20);
    for (int d : {2, 3}) {
      for (int f = 0; f < 6; ++f) {
        CHECK(static_cast<Index>(graded_multi_indices(d, f).size()) == monomial_count(d, f));
        CHECK(monomial_count(d, f) == std::lround(std::tgamma(d + f + 1) / (std::tgamma(d + 1) * std::tgamma(f + 1))));
      }
    }
  }

  TEST_CASE("small example is orthonormal and annihilates linears") {
    const Fixture fx = make_fixture(10, 2, 1, 1, 5);
    CHECK(fx.basis.contrast_count() == 7);
    const Matrix w = Matrix(w_matrix(fx.basis));
    const Matrix m = trend_matrix(fx.data.locations, 1);
    CHECK(max_abs(w * m) <= 1e-12);
    const Matrix p = dense_p(fx.basis);
    CHECK(max_abs(p * p.transpose() - Matrix::Identity(10, 10)) <= 1e-12);
  }

  TEST_CASE("n equal to p~ leaves only the level -1 group") {
    const Fixture fx = make_fixture(6, 2, 1, 2, 3);
    for (int level = fx.basis.max_level(); level >= 0; --level) CHECK(fx.basis.level_row_count(level) == 0);
    CHECK(fx.basis.level_row_count(kExtraLevel) == 3);
    CHECK(fx.basis.contrast_count() == 3);
    CHECK(max_abs(Matrix(w_matrix(fx.basis)) * trend_matrix(fx.data.locations, 1)) <= 1e-12);
  }

  TEST_CASE("moment conditions per level") {
    const Fixture fx = make_fixture(1500, 2, 2, 3, 11);
    const Matrix w = Matrix(w_matrix(fx.basis));
    const Matrix mf = unit_columns(trend_matrix(fx.data.locations, 2));
    const Matrix mft = unit_columns(trend_matrix(fx.data.locations, 3));
    const Index fine_rows = fx.basis.rows_through(0);
    CHECK(max_abs(w.topRows(fine_rows) * mft) <= 1e-10);
    CHECK(max_abs(w * mf) <= 1e-10);
    const BasisStats s = basis_stats(fx.basis, fx.data);
    CHECK(s.trend_residual <= 1e-10);
    CHECK(s.accuracy_residual <= 1e-10);
    Index total = 0;
    for (const auto& [level, rows] : s.rows_per_level) total += rows;
    CHECK(total == 1500 - 6);
  }

  TEST_CASE("nnz audit at n = 4096") {
    const Fixture fx = make_fixture(4096, 2, 3, 4, 1);
    CHECK(fx.basis.contrast_count() == 4096 - 10);
    Index from_groups = 0;
    for (const ContrastGroup& g : fx.basis.groups()) {
      from_groups += g.psi.size();
      // Support of a level-i vector is the points of its cube.
      if (g.level >= 0) CHECK(g.psi.rows() == fx.tree.cube(g.cube).count());
    }
    CHECK(fx.basis.nnz_w() == from_groups);
    CHECK(Index(w_matrix(fx.basis).nonZeros()) <= from_groups);
    // Every point sits in one cube per level, and a cube keeps at most
    // (2^d - 1) p~ of the moments its children pass up, so
    // nnz(W) <= n (t + 2) (2^d - 1) p~.
    const Index t = fx.tree.max_level();
    CHECK(fx.basis.nnz_w() <= 4096 * (t + 2) * 3 * fx.basis.p_tilde());
  }

  TEST_CASE("apply W and its transpose") {
    const Fixture fx = make_fixture(700, 2, 3, 3, 2);
    const Index n = 700;
    const Matrix mf = trend_matrix(fx.data.locations, 3);
    const Matrix w = Matrix(w_matrix(fx.basis));
    for (Index j = 0; j < mf.cols(); ++j) CHECK(apply_W(fx.basis, mf.col(j)).cwiseAbs().maxCoeff() <= 1e-12 * mf.col(j).norm());
    const Vector e1 = Vector::Unit(n, 0);
    CHECK(max_abs(apply_W(fx.basis, e1) - w.col(0)) <= 1e-15);

    const Vector beta = random_vector(mf.cols(), 3);
    const Vector eps = random_vector(n, 4);
    CHECK(max_abs(apply_W(fx.basis, mf * beta + eps) - apply_W(fx.basis, eps)) <= 1e-12 * (mf * beta).norm());

    CHECK(apply_Wt(fx.basis, Vector::Zero(n - 10)).isZero(0.0));
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Vector u = random_vector(n - 10, 100 + s);
      const Vector back = apply_W(fx.basis, apply_Wt(fx.basis, u));
      CHECK(max_abs(back - u) <= 1e-12 * u.cwiseAbs().maxCoeff() * 10);
      if (s < 5) CHECK(max_abs(mf.transpose() * apply_Wt(fx.basis, u)) <= 1e-11 * u.norm() * mf.norm());
    }
    const Index fine = fx.basis.rows_through(fx.basis.finest_level());
    CHECK(apply_W(fx.basis, eps, fx.basis.finest_level()).size() == fine);
    CHECK(max_abs(apply_W(fx.basis, eps, fx.basis.finest_level()) - apply_W(fx.basis, eps).head(fine)) == 0.0);
    CHECK(max_abs(apply_W_block(fx.basis, mf.leftCols(2)).col(1) - apply_W(fx.basis, mf.col(1))) <= 1e-14 * mf.col(1).norm());
  }

  TEST_CASE("apply L and the isometry") {
    const Fixture fx = make_fixture(400, 3, 1, 2, 6);
    const Index n = 400;
    const Matrix l = l_matrix(fx.basis);
    CHECK(max_abs(l * l.transpose() - Matrix::Identity(4, 4)) <= 1e-12);
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Vector v = random_vector(n, 500 + s);
      const Scalar split = apply_W(fx.basis, v).squaredNorm() + apply_L(fx.basis, v).squaredNorm();
      CHECK(std::abs(split - v.squaredNorm()) <= 1e-12 * v.squaredNorm());
    }
    const Vector g = trend_matrix(fx.data.locations, 1) * Vector{{0.3, -1.0, 2.0, 0.5}};
    CHECK(apply_W(fx.basis, g).norm() <= 1e-12 * g.norm());
    CHECK(apply_L(fx.basis, g).norm() == doctest::Approx(g.norm()).epsilon(1e-12));
    const Vector u = random_vector(4, 9);
    CHECK(max_abs(apply_Lt(fx.basis, u) - l.transpose() * u) <= 1e-14);
  }

  TEST_CASE("finest contrast level") {
    const Fixture fx = make_fixture(4000, 2, 3, 4, 1);
    const int t = fx.basis.finest_level();
    CHECK(fx.basis.level_row_count(t) > 0);
    for (int level = fx.basis.max_level(); level > t; --level) CHECK(fx.basis.level_row_count(level) == 0);
  }

  TEST_CASE("design validation") {
    CHECK_THROWS_AS((DesignSpec{2, 3, 2, PolynomialBasis::chebyshev}.validate()), InputError);
    CHECK_THROWS_AS(make_fixture(2, 2, 1, 1), InputError);
  }
}
