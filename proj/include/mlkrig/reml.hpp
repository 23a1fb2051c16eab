#ifndef MLKRIG_REML_HPP
#define MLKRIG_REML_HPP

#include "mlkrig/basis.hpp"
#include "mlkrig/geometry.hpp"
#include "mlkrig/kernels.hpp"
#include "mlkrig/nelder_mead.hpp"
#include "mlkrig/sparse_cholesky.hpp"

#include <vector>

namespace mlkrig {

/// Multi-resolution REML setup: contrasts of levels t..min_level, covariance
/// tapered with radius tau, parameters searched over `box`.
struct RemlProblem {
  const SpatialDataset* data = nullptr;
  const DecompositionTree* tree = nullptr;
  const MultiLevelBasis* basis = nullptr;
  KernelFamily family = KernelFamily::matern;
  int tau = 1;
  int min_level = kExtraLevel;
  Box box;  // (nu, rho) for Matern, (rho) otherwise
  NelderMeadOptions optimizer;
  bool use_spline = true;
  Scalar spline_tol = 5e-9;
  CholeskyOptions cholesky;

  void validate() const;
  KernelModel kernel_at(const Eigen::Ref<const Vector>& theta) const;
  /// One level below the finest contrast level, or -1.
  static int default_min_level(const MultiLevelBasis& basis);
};

struct LoglikEvaluation {
  Scalar value = 0;
  Index n_tilde = 0;
  Scalar log_det = 0;
  Scalar quadratic = 0;
  Index factor_nnz = 0;
  Scalar t_cons = 0;  // seconds spent assembling
  Scalar t_chol = 0;  // seconds spent factoring and solving
};

/// l~(theta) = -n~/2 log(2 pi) - 1/2 log det C~ - 1/2 Z~^T C~^-1 Z~ with one
/// factorization. `z_tilde` holds the first n~ contrasts of the data.
/// Throws NotPositiveDefinite when the tapered matrix is indefinite.
LoglikEvaluation evaluate_loglik(const RemlProblem& problem, const Eigen::Ref<const Vector>& z_tilde,
                                 const Eigen::Ref<const Vector>& theta);

Scalar restricted_loglik(const RemlProblem& problem, const Eigen::Ref<const Vector>& theta);

/// Same quantity from dense W C W^T without tapering (small n only).
Scalar dense_restricted_loglik(const MultiLevelBasis& basis, const SpatialDataset& data,
                               const KernelModel& kernel, int min_level);

struct RemlTraceRow {
  Index evaluation = 0;
  Vector theta;
  Scalar loglik = 0;  // -infinity when not positive definite
  bool positive_definite = true;
  Index factor_nnz = 0;
  Scalar t_cons = 0;
  Scalar t_chol = 0;
};

struct RemlResult {
  Vector theta_hat;
  Scalar loglik = 0;
  Index iterations = 0;
  Index evaluations = 0;
  Index n_tilde = 0;
  Index factor_nnz = 0;  // at theta_hat
  Index non_pd_count = 0;
  bool hit_iteration_cap = false;
  bool degenerate = false;  // Z~ vanishes; optimization skipped
  std::vector<RemlTraceRow> trace;

  /// 100 nnz(G) / (n~ (n~ + 1) / 2).
  Scalar factor_percent() const;
  Scalar total_t_cons() const;
  Scalar total_t_chol() const;
};

/// Maximizes l~ over the box from `start` (the box centre when empty).
RemlResult estimate(const RemlProblem& problem, const Eigen::Ref<const Vector>& z,
                    const Vector& start = Vector());

}  // namespace mlkrig

#endif  // MLKRIG_REML_HPP
