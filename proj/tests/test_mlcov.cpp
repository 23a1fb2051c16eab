#include "support.hpp"

#include "mlkrig/lemma1.hpp"
#include "mlkrig/mlcov.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace mlkrig;
using namespace mlkrig::testing;

namespace {

Matrix dense_cw(const Fixture& fx, const KernelModel& k) {
  const Matrix w = Matrix(w_matrix(fx.basis));
  return w * kernel_matrix(CovarianceFunction(k), fx.data.locations, fx.data.locations) * w.transpose();
}

Index cube_of_row(const MultiLevelBasis& basis, Index row) {
  return basis.groups()[static_cast<std::size_t>(basis.group_of_row(row))].cube;
}

}  // namespace

TEST_SUITE("mlcov") {
  TEST_CASE("untapered assembly is the congruence W C W^T") {
    const Fixture fx = make_fixture(200, 2, 2, 2, 3);
    const KernelModel k = KernelModel::matern(0.75, 1.0 / 6.0);
    const TaperedCovariance cov = assemble(fx.basis, fx.tree, CovarianceFunction(k), {kTauInfinity, kExtraLevel});
    const Matrix dense = dense_cw(fx, k);
    CHECK(max_abs(cov.to_dense() - dense) <= 1e-10);
    CHECK(cov.size() == 194);
    CHECK(cov.density() == doctest::Approx(1.0));
    CHECK(max_abs(assemble_dense(fx.basis, fx.tree, CovarianceFunction(k), {kTauInfinity, kExtraLevel}) - dense) <= 1e-10);
  }

  TEST_CASE("an entry is the explicit double sum") {
    const Fixture fx = make_fixture(120, 2, 1, 1, 8);
    const KernelModel k = KernelModel::exponential(0.3);
    const TaperedCovariance cov = assemble(fx.basis, fx.tree, CovarianceFunction(k), {kTauInfinity, kExtraLevel});
    const Matrix w = Matrix(w_matrix(fx.basis));
    const Matrix full = cov.to_dense();
    for (auto [a, b] : {std::pair<Index, Index>{0, 5}, {3, 40}, {17, 116}}) {
      Scalar sum = 0.0;
      for (Index h = 0; h < 120; ++h) {
        if (w(a, h) == 0.0) continue;
        for (Index e = 0; e < 120; ++e) {
          if (w(b, e) == 0.0) continue;
          sum += w(a, h) * w(b, e) * k((fx.data.locations.col(h) - fx.data.locations.col(e)).norm());
        }
      }
      CHECK(full(a, b) == doctest::Approx(sum).epsilon(1e-12).scale(1.0));
    }
  }

  TEST_CASE("tapered pattern follows the predicate") {
    const Fixture fx = make_fixture(600, 2, 2, 3, 4);
    const CovarianceFunction phi(KernelModel::matern(1.5, 0.1));
    for (int tau : {0, 1, 2}) {
      const TaperedCovariance cov = assemble(fx.basis, fx.tree, phi, {tau, kExtraLevel});
      const auto& lower = cov.lower();
      Index stored = 0;
      for (Index j = 0; j < lower.outerSize(); ++j) {
        for (SparseMatrix::InnerIterator it(lower, j); it; ++it) {
          CHECK(it.row() >= it.col());
          CHECK(taper_predicate(fx.tree, cube_of_row(fx.basis, it.row()), cube_of_row(fx.basis, it.col()), tau));
          ++stored;
        }
      }
      Index expected = 0;
      for (Index a = 0; a < cov.size(); ++a) {
        for (Index b = 0; b <= a; ++b) {
          if (taper_predicate(fx.tree, cube_of_row(fx.basis, a), cube_of_row(fx.basis, b), tau)) ++expected;
        }
      }
      CHECK(stored == expected);
      const Matrix full = cov.to_dense();
      CHECK(max_abs(full - full.transpose()) == 0.0);
    }
  }

  TEST_CASE("restricting the levels keeps the leading block") {
    const Fixture fx = make_fixture(900, 2, 2, 3, 5);
    const CovarianceFunction phi(KernelModel::matern(0.75, 0.2));
    const TaperedCovariance all = assemble(fx.basis, fx.tree, phi, {1, kExtraLevel});
    const int i = fx.basis.finest_level() - 1;
    const TaperedCovariance part = assemble(fx.basis, fx.tree, phi, {1, i});
    REQUIRE(part.size() == fx.basis.rows_through(i));
    CHECK(max_abs(part.to_dense() - all.to_dense().topLeftCorner(part.size(), part.size())) == 0.0);
  }

  TEST_CASE("matrix-free product") {
    const Fixture fx = make_fixture(300, 2, 2, 2, 6);
    const KernelModel k = KernelModel::matern(0.75, 1.0 / 6.0);
    const CovarianceFunction phi(k);
    const Matrix dense = dense_cw(fx, k);
    CHECK(matvec_exact(fx.basis, fx.data, phi, Vector::Zero(294)).isZero(0.0));
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Vector v = random_vector(294, 40 + s);
      const Vector y = matvec_exact(fx.basis, fx.data, phi, v);
      if (s < 5) CHECK((y - dense * v).norm() <= 1e-10 * (dense * v).norm());
      CHECK(v.dot(y) > 0.0);
    }
    const ContrastOperator op(fx.basis, fx.data, phi);
    const Vector v = random_vector(294, 1);
    CHECK((op.apply(v) - dense * v).norm() <= 1e-10 * (dense * v).norm());
  }

  TEST_CASE("diagonal preconditioner") {
    const Fixture fx = make_fixture(200, 3, 1, 2, 7);
    const KernelModel k = KernelModel::exponential(0.2);
    const Vector d = diag_preconditioner(fx.basis, fx.tree, CovarianceFunction(k));
    CHECK((d.array() > 0.0).all());
    CHECK(max_abs(d - dense_cw(fx, k).diagonal()) <= 1e-12);
  }

  TEST_CASE("three point toy") {
    SpatialDataset data;
    data.locations = Matrix{{0.1, 0.5, 0.8}, {0.2, 0.7, 0.3}};
    const DesignSpec spec{2, 0, 0, PolynomialBasis::chebyshev};
    const auto tree = build_tree(data, 1);
    const auto basis = build_basis(tree, data, spec);
    REQUIRE(basis.contrast_count() == 2);
    const KernelModel k = KernelModel::exponential(0.5);
    Matrix c(3, 3);
    for (Index a = 0; a < 3; ++a) {
      for (Index b = 0; b < 3; ++b) c(a, b) = k((data.locations.col(a) - data.locations.col(b)).norm());
    }
    const Matrix w = Matrix(w_matrix(basis));
    const Vector d = diag_preconditioner(basis, tree, CovarianceFunction(k));
    for (Index r = 0; r < 2; ++r) {
      Scalar q = 0.0;
      for (Index a = 0; a < 3; ++a) {
        for (Index b = 0; b < 3; ++b) q += w(r, a) * c(a, b) * w(r, b);
      }
      CHECK(d[r] == doctest::Approx(q).epsilon(1e-14));
      CHECK(std::abs(w.row(r).sum()) <= 1e-15);
    }
  }

  TEST_CASE("conditioning never worsens") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const Fixture fx = make_fixture(150, 2, 1, 2, seed);
      const KernelModel k = KernelModel::matern(1.0, 0.2);
      const Matrix c = kernel_matrix(CovarianceFunction(k), fx.data.locations, fx.data.locations);
      const Vector ec = Eigen::SelfAdjointEigenSolver<Matrix>(c, Eigen::EigenvaluesOnly).eigenvalues();
      const Vector ew = Eigen::SelfAdjointEigenSolver<Matrix>(dense_cw(fx, k), Eigen::EigenvaluesOnly).eigenvalues();
      CHECK(ew[0] >= ec[0] * (1 - 1e-8));
      CHECK(ew[ew.size() - 1] <= ec[ec.size() - 1] * (1 + 1e-12));
    }
  }

  TEST_CASE("cov stats") {
    const Fixture fx = make_fixture(400, 2, 1, 2, 2);
    const TaperedCovariance cov = assemble(fx.basis, fx.tree, CovarianceFunction(KernelModel::exponential(0.2)), {1, kExtraLevel});
    const CovStats s = cov_stats(cov, fx.basis);
    CHECK(s.size == cov.size());
    CHECK(s.stored == cov.lower().nonZeros());
    CHECK(s.half_density == doctest::Approx(Scalar(s.stored) / (s.size * (s.size + 1) / 2.0)));
    CHECK(s.min_diagonal > 0.0);
    CHECK(s.min_diagonal <= s.max_diagonal);
  }

  TEST_CASE("assembly options are validated") {
    const Fixture fx = make_fixture(100, 2, 1, 1, 2);
    const CovarianceFunction phi(KernelModel::exponential(0.2));
    CHECK_THROWS_AS(assemble(fx.basis, fx.tree, phi, {-1, kExtraLevel}), InputError);
    CHECK_THROWS_AS(assemble(fx.basis, fx.tree, phi, {1, fx.basis.max_level() + 1}), InputError);
  }
}

TEST_SUITE("lemma1") {
  TEST_CASE("gaussian bound in one dimension matches analytic derivatives") {
    const Scalar rho = 0.3;
    const KernelModel k = KernelModel::gaussian(rho);
    const Vector ca{{0.1}}, cb{{0.9}}, ra{{0.05}}, rb{{0.08}};
    const Lemma1Bound b = lemma1_bound(k, ca, ra, cb, rb, 1);
    // |alpha| = |beta| = 2, so the sup of |phi''''| over z in (ca - cb) +- (ra + rb).
    auto d4 = [rho](Scalar z) {
      const Scalar r2 = rho * rho;
      return (z * z * z * z - 6 * z * z * r2 + 3 * r2 * r2) / (r2 * r2 * r2 * r2) * std::exp(-z * z / (2 * r2));
    };
    Scalar sup = 0.0;
    for (int j = 0; j <= 20000; ++j) sup = std::max(sup, std::abs(d4(-0.93 + 0.26 * j / 20000)));
    const Scalar expected = 0.05 * 0.05 / 2 * 0.08 * 0.08 / 2 * sup;
    CHECK(b.value == doctest::Approx(expected).epsilon(0.05));
    CHECK(b.order == 2);
  }

  TEST_CASE("bound scales like r_a^(f~+1)") {
    const KernelModel k = KernelModel::matern(1.5, 0.5);
    const Vector ca{{0.1, 0.1}}, cb{{0.8, 0.7}}, r{{0.02, 0.02}};
    const Scalar full = lemma1_bound(k, ca, r, cb, r, 1).value;
    const Scalar half = lemma1_bound(k, ca, Vector(r / 2), cb, r, 1).value;
    CHECK(half / full == doctest::Approx(0.25).epsilon(0.05));
  }

  TEST_CASE("overlapping boxes are rejected") {
    const KernelModel k = KernelModel::matern(1.5, 0.2);
    CHECK_THROWS_AS(lemma1_bound(k, Vector{{0.5, 0.5}}, Vector{{0.1, 0.1}}, Vector{{0.6, 0.55}}, Vector{{0.1, 0.1}}, 1),
                    InputError);
  }

  TEST_CASE("entries of separated pairs stay under the bound") {
    const Fixture fx = make_fixture(500, 2, 1, 1, 1);
    const KernelModel k = KernelModel::matern(1.5, 1.0 / 6.0);
    const auto pairs = separated_group_pairs(fx.basis, fx.tree, 1.0);
    REQUIRE(pairs.size() >= 100);
    const std::size_t stride = pairs.size() / 100;
    for (std::size_t q = 0; q < 100; ++q) {
      const auto [a, b] = pairs[q * stride];
      const Matrix block = contrast_block(fx.basis, fx.tree, CovarianceFunction(k), a, b);
      const Lemma1Bound bound =
          lemma1_bound(fx.tree, k, 1, fx.basis.groups()[a].cube, fx.basis.groups()[b].cube);
      CHECK(max_abs(block) <= bound.value);
    }
  }
}
