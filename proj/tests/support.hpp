#ifndef MLKRIG_TESTS_SUPPORT_HPP
#define MLKRIG_TESTS_SUPPORT_HPP

#include "mlkrig/basis.hpp"
#include "mlkrig/geometry.hpp"
#include "mlkrig/harness.hpp"
#include "mlkrig/kernels.hpp"
#include "mlkrig/polynomial.hpp"
#include "mlkrig/random.hpp"

namespace mlkrig::testing {

inline SpatialDataset uniform_points(Index n, int dim, std::uint64_t seed) {
  return generate_dataset({dim == 3 ? DatasetKind::uniform3d : DatasetKind::uniform2d, n, seed});
}

struct Fixture {
  SpatialDataset data;
  DecompositionTree tree;
  MultiLevelBasis basis;
};

/// Tree with leaf threshold p~ and the Chebyshev basis.
inline Fixture make_fixture(Index n, int dim, int f, int f_tilde, std::uint64_t seed = 1) {
  Fixture fx;
  fx.data = uniform_points(n, dim, seed);
  const DesignSpec spec{dim, f, f_tilde, PolynomialBasis::chebyshev};
  fx.tree = build_tree(fx.data, spec.p_tilde());
  fx.basis = build_basis(fx.tree, fx.data, spec);
  return fx;
}

inline Vector random_vector(Index n, std::uint64_t seed) {
  const CounterRng rng(seed, 7);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal(static_cast<std::uint64_t>(i));
  return v;
}

inline Scalar max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace mlkrig::testing

#endif  // MLKRIG_TESTS_SUPPORT_HPP
