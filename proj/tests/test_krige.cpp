#include "support.hpp"

#include "mlkrig/krige.hpp"

#include <doctest.h>

#include <Eigen/LU>

#include <cmath>

using namespace mlkrig;
using namespace mlkrig::testing;

namespace {

struct Saddle {
  Vector gamma;
  Vector beta;
};

// [C M; M^T 0] [gamma; beta] = [Z; 0].
Saddle dense_saddle(const SpatialDataset& data, const KernelModel& k, int f) {
  const Index n = data.size();
  const Matrix c = kernel_matrix(CovarianceFunction(k), data.locations, data.locations);
  const Matrix m = trend_matrix(data.locations, f);
  const Index p = m.cols();
  Matrix a = Matrix::Zero(n + p, n + p);
  a.topLeftCorner(n, n) = c;
  a.topRightCorner(n, p) = m;
  a.bottomLeftCorner(p, n) = m.transpose();
  Vector rhs = Vector::Zero(n + p);
  rhs.head(n) = *data.values;
  const Vector x = a.fullPivLu().solve(rhs);
  return {x.head(n), x.tail(p)};
}

Fixture sampled(Index n, int dim, int f, int f_tilde, const KernelModel& k, std::uint64_t seed) {
  Fixture fx = make_fixture(n, dim, f, f_tilde, seed);
  fx.data.values = sample_gp(fx.data, k, f, Vector::Ones(monomial_count(dim, f)), seed + 1);
  return fx;
}

KrigingOptions with_eps(Scalar eps) {
  KrigingOptions o;
  o.eps = eps;
  return o;
}

}  // namespace

TEST_SUITE("krige") {
  TEST_CASE("matches the dense saddle-point system") {
    const KernelModel k = KernelModel::matern(0.75, 1.0 / 6.0);
    const Fixture fx = sampled(400, 2, 1, 2, k, 3);
    const KrigingContext ctx(fx.basis, fx.tree, fx.data, k, with_eps(1e-6));
    const KrigingSolution sol = solve_kriging_system(ctx);
    const Saddle ref = dense_saddle(fx.data, k, 1);
    CHECK((sol.gamma_hat - ref.gamma).norm() <= 1e-5 * ref.gamma.norm());
    CHECK((sol.beta_hat - ref.beta).norm() <= 1e-5 * ref.beta.norm());
    const Matrix m = trend_matrix(fx.data.locations, 1);
    CHECK((m.transpose() * sol.gamma_hat).cwiseAbs().maxCoeff() <= 1e-8 * sol.gamma_hat.norm());
    const Matrix c = kernel_matrix(CovarianceFunction(k), fx.data.locations, fx.data.locations);
    const Vector z = *fx.data.values;
    CHECK((c * sol.gamma_hat + m * sol.beta_hat - z).norm() <= 1e-5 * z.norm());
  }

  TEST_CASE("pure trend data") {
    const KernelModel k = KernelModel::matern(1.0, 0.2);
    Fixture fx = make_fixture(300, 2, 2, 2, 4);
    const Vector beta{{1.0, -0.5, 2.0, 0.3, -1.2, 0.7}};
    fx.data.values = trend_matrix(fx.data.locations, 2) * beta;
    const KrigingContext ctx(fx.basis, fx.tree, fx.data, k);
    const KrigingSolution sol = solve_kriging_system(ctx);
    CHECK(sol.gamma_hat.norm() <= 1e-12);
    CHECK((sol.beta_hat - beta).norm() <= 1e-8 * beta.norm());
  }

  TEST_CASE("as many points as trend terms") {
    SpatialDataset data;
    data.locations = Matrix{{0.1, 0.8, 0.3}, {0.2, 0.4, 0.9}};
    data.values = Vector{{1.0, 2.0, -1.0}};
    const DesignSpec spec{2, 1, 1, PolynomialBasis::chebyshev};
    const auto tree = build_tree(data, spec.p_tilde());
    const auto basis = build_basis(tree, data, spec);
    CHECK(basis.contrast_count() == 0);
    const KrigingContext ctx(basis, tree, data, KernelModel::exponential(0.3));
    const KrigingSolution sol = solve_kriging_system(ctx);
    CHECK(sol.gamma_hat.isZero(0.0));
    const Vector expected = trend_matrix(data.locations, 1).lu().solve(*data.values);
    CHECK((sol.beta_hat - expected).norm() <= 1e-12 * expected.norm());
  }

  TEST_CASE("prediction interpolates and extrapolates the trend") {
    const KernelModel k = KernelModel::matern(0.75, 1.0 / 6.0);
    const Fixture fx = sampled(300, 2, 1, 2, k, 5);
    const KrigingContext ctx(fx.basis, fx.tree, fx.data, k, with_eps(1e-8));
    const KrigingSolution sol = solve_kriging_system(ctx);
    for (Index i : {0, 17, 299}) {
      CHECK(std::abs(predict(sol, fx.data, fx.data.locations.col(i)) - (*fx.data.values)[i]) <= 1e-5);
    }
    const Matrix targets = fx.data.locations.leftCols(10);
    CHECK((predict_many(sol, fx.data, targets) - fx.data.values->head(10)).cwiseAbs().maxCoeff() <= 1e-5);

    // A kernel whose cross-covariance underflows leaves only the trend.
    Fixture g = sampled(200, 2, 1, 1, KernelModel::gaussian(0.02), 6);
    const KrigingContext gctx(g.basis, g.tree, g.data, KernelModel::gaussian(1e-3));
    const KrigingSolution gsol = solve_kriging_system(gctx);
    Vector s0{{0.5, 0.5}};
    while ((g.data.locations.colwise() - s0).colwise().norm().minCoeff() < 0.05) s0[0] += 0.001;
    CHECK(cross_covariance(KernelModel::gaussian(1e-3), g.data.locations, s0).isZero(0.0));
    CHECK(predict(gsol, g.data, s0) == doctest::Approx(trend_vector(s0, 1).dot(gsol.beta_hat)).epsilon(1e-14));
  }

  TEST_CASE("mse workspace for a constant trend") {
    const KernelModel k = KernelModel::matern(1.0, 0.2);
    const Fixture fx = sampled(50, 2, 0, 0, k, 7);
    const KrigingContext ctx(fx.basis, fx.tree, fx.data, k, with_eps(1e-10));
    const MseWorkspace ws = build_mse_workspace(ctx);
    const DenseKriging ref(fx.data, k, 0);
    CHECK((ws.trend_inverse - ref.trend_gram().inverse()).cwiseAbs().maxCoeff() <= 1e-6 * ref.trend_gram().inverse().norm());
    CHECK((ws.s_tilde - ws.s_tilde.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    const Matrix lhs = ws.l_mf.transpose() * ws.s_tilde * ws.l_mf;
    CHECK((lhs - ref.trend_gram()).norm() <= 1e-6 * ref.trend_gram().norm());
  }

  TEST_CASE("mse against the dense formula") {
    const KernelModel k = KernelModel::matern(0.75, 1.0 / 6.0);
    const Fixture fx = sampled(300, 2, 1, 2, k, 8);
    const KrigingContext ctx(fx.basis, fx.tree, fx.data, k, with_eps(1e-8));
    const MseWorkspace ws = build_mse_workspace(ctx);
    const DenseKriging ref(fx.data, k, 1);
    const SpatialDataset targets = uniform_points(20, 2, 99);
    for (Index j = 0; j < 20; ++j) {
      const MseValue v = mse(ctx, ws, targets.locations.col(j));
      const Scalar d = ref.mse(targets.locations.col(j));
      CHECK(std::abs(v.value - d) <= 1e-5 * std::abs(d));
    }
    for (Index i : {3, 150}) CHECK(std::abs(mse(ctx, ws, fx.data.locations.col(i)).value) <= 1e-5);
    // Reusing the workspace gives what a rebuilt one gives.
    const MseWorkspace again = build_mse_workspace(ctx);
    const Vector s0 = targets.locations.col(4);
    CHECK(mse(ctx, ws, s0).value == mse(ctx, again, s0).value);
  }

  TEST_CASE("mse far from the data") {
    const KernelModel k = KernelModel::gaussian(1e-3);
    Fixture fx = sampled(200, 2, 1, 1, KernelModel::gaussian(0.02), 9);
    const KrigingContext ctx(fx.basis, fx.tree, fx.data, k, with_eps(1e-10));
    const MseWorkspace ws = build_mse_workspace(ctx);
    Vector s0{{0.5, 0.5}};
    while ((fx.data.locations.colwise() - s0).colwise().norm().minCoeff() < 0.05) s0[1] += 0.001;
    const Vector m = trend_vector(s0, 1);
    const Scalar expected = 1.0 + m.dot(ws.trend_inverse * m);
    const MseValue v = mse(ctx, ws, s0);
    CHECK(v.value == doctest::Approx(expected).epsilon(1e-10));
    CHECK(v.value >= 1.0);
  }

  TEST_CASE("three dimensional exponential kernel against dense kriging") {
    const KernelModel k = KernelModel::exponential(1.0 / 5.9915);
    const Fixture fx = sampled(500, 3, 3, 3, k, 10);
    const KrigingContext ctx(fx.basis, fx.tree, fx.data, k, with_eps(1e-5));
    const KrigingSolution sol = solve_kriging_system(ctx);
    const DenseKriging ref(fx.data, k, 3);
    const SpatialDataset targets = uniform_points(200, 3, 77);
    const Vector ours = predict_many(sol, fx.data, targets.locations);
    Vector dense(200);
    for (Index j = 0; j < 200; ++j) dense[j] = ref.predict(targets.locations.col(j));
    CHECK((ours - dense).norm() <= 1e-4 * dense.norm());
  }

  TEST_CASE("missing values are rejected") {
    const Fixture fx = make_fixture(100, 2, 1, 1, 1);
    const KrigingContext ctx(fx.basis, fx.tree, fx.data, KernelModel::exponential(0.2));
    CHECK_THROWS_AS(solve_kriging_system(ctx), InputError);
  }
}
