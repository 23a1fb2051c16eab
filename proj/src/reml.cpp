#include "mlkrig/reml.hpp"

#include "mlkrig/mlcov.hpp"

#include <Eigen/Cholesky>

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace mlkrig {

namespace {

Scalar seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - start).count();
}

Scalar gaussian_constant(Index n_tilde) {
  return -0.5 * static_cast<Scalar>(n_tilde) * std::log(2.0 * std::numbers::pi);
}

}  // namespace

void RemlProblem::validate() const {
  if (data == nullptr || tree == nullptr || basis == nullptr) throw InputError("reml: problem is incomplete");
  if (min_level < kExtraLevel || min_level > basis->max_level()) {
    throw InputError("reml: min_level must lie in [-1, " + std::to_string(basis->max_level()) + "]");
  }
  if (tau < 0) throw InputError("reml: tau must be non-negative");
  box.validate();
  if (!(box.lower.array() > 0.0).all()) throw InputError("reml: parameter bounds must be positive");
  const Index expected = family == KernelFamily::matern ? 2 : 1;
  if (box.size() != expected) throw InputError("reml: box has the wrong number of parameters");
}

KernelModel RemlProblem::kernel_at(const Eigen::Ref<const Vector>& theta) const {
  if (family == KernelFamily::matern) return KernelModel::matern(theta[0], theta[1]);
  return KernelModel(family, 0.5, theta[0]);
}

int RemlProblem::default_min_level(const MultiLevelBasis& basis) {
  return std::max(basis.finest_level() - 1, kExtraLevel);
}

LoglikEvaluation evaluate_loglik(const RemlProblem& problem, const Eigen::Ref<const Vector>& z_tilde,
                                 const Eigen::Ref<const Vector>& theta) {
  const KernelModel kernel = problem.kernel_at(theta);
  const auto t0 = std::chrono::steady_clock::now();
  const CovarianceFunction phi = problem.use_spline
                                     ? CovarianceFunction::accelerated(kernel, problem.spline_tol)
                                     : CovarianceFunction(kernel);
  const TaperedCovariance cov =
      assemble(*problem.basis, *problem.tree, phi, {problem.tau, problem.min_level});
  LoglikEvaluation ev;
  ev.t_cons = seconds_since(t0);
  ev.n_tilde = cov.size();
  if (z_tilde.size() != ev.n_tilde) throw InputError("reml: contrast vector has the wrong length");

  const auto t1 = std::chrono::steady_clock::now();
  Matrix centers;
  const Matrix* coords = nullptr;
  if (problem.cholesky.ordering == OrderingMethod::nested_dissection) {
    centers = row_centers(*problem.basis, *problem.tree, problem.min_level);
    coords = &centers;
  }
  const CholFactor factor = analyze_and_factor(cov.lower(), problem.cholesky, coords);
  ev.log_det = log_det(factor);
  ev.quadratic = z_tilde.dot(factor.solve(z_tilde));
  ev.t_chol = seconds_since(t1);
  ev.factor_nnz = factor.nnz();
  ev.value = gaussian_constant(ev.n_tilde) - 0.5 * ev.log_det - 0.5 * ev.quadratic;
  return ev;
}

Scalar restricted_loglik(const RemlProblem& problem, const Eigen::Ref<const Vector>& theta) {
  problem.validate();
  if (!problem.data->values) throw InputError("reml: dataset has no observations");
  const Vector z_tilde = apply_W(*problem.basis, *problem.data->values, problem.min_level);
  return evaluate_loglik(problem, z_tilde, theta).value;
}

Scalar dense_restricted_loglik(const MultiLevelBasis& basis, const SpatialDataset& data,
                               const KernelModel& kernel, int min_level) {
  if (!data.values) throw InputError("reml: dataset has no observations");
  const Index rows = basis.rows_through(min_level);
  const Matrix w = Matrix(w_matrix(basis)).topRows(rows);
  const Matrix c = kernel_matrix(CovarianceFunction(kernel), data.locations, data.locations);
  const Matrix cw = w * c * w.transpose();
  const Eigen::LLT<Matrix> llt(cw);
  if (llt.info() != Eigen::Success) throw NumericalError("dense contrast covariance is not positive definite");
  const Vector z = w * *data.values;
  const Scalar logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return gaussian_constant(rows) - 0.5 * logdet - 0.5 * z.dot(llt.solve(z));
}

Scalar RemlResult::factor_percent() const {
  if (n_tilde == 0) return 0.0;
  const Scalar tri = 0.5 * static_cast<Scalar>(n_tilde) * static_cast<Scalar>(n_tilde + 1);
  return 100.0 * static_cast<Scalar>(factor_nnz) / tri;
}

Scalar RemlResult::total_t_cons() const {
  Scalar s = 0.0;
  for (const RemlTraceRow& r : trace) s += r.t_cons;
  return s;
}

Scalar RemlResult::total_t_chol() const {
  Scalar s = 0.0;
  for (const RemlTraceRow& r : trace) s += r.t_chol;
  return s;
}

RemlResult estimate(const RemlProblem& problem, const Eigen::Ref<const Vector>& z, const Vector& start) {
  problem.validate();
  if (z.size() != problem.basis->n()) throw InputError("reml: observation vector has the wrong length");
  if (!z.allFinite()) throw InputError("reml: observations must be finite");
  const Vector x0 = start.size() == 0 ? Vector(0.5 * (problem.box.lower + problem.box.upper)) : start;
  if (!problem.box.contains(x0)) throw InputError("reml: start lies outside the box");

  const Vector z_tilde = apply_W(*problem.basis, z, problem.min_level);
  RemlResult result;
  result.n_tilde = z_tilde.size();

  constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
  auto record = [&](const Vector& theta) -> Scalar {
    RemlTraceRow row;
    row.evaluation = static_cast<Index>(result.trace.size());
    row.theta = theta;
    try {
      const LoglikEvaluation ev = evaluate_loglik(problem, z_tilde, theta);
      row.loglik = ev.value;
      row.factor_nnz = ev.factor_nnz;
      row.t_cons = ev.t_cons;
      row.t_chol = ev.t_chol;
    } catch (const NotPositiveDefinite&) {
      row.loglik = -kInf;
      row.positive_definite = false;
      ++result.non_pd_count;
    }
    result.trace.push_back(row);
    return -row.loglik;
  };

  const Scalar scale = std::max(z.norm(), std::numeric_limits<Scalar>::min());
  if (z_tilde.norm() <= 1e-12 * scale) {
    result.degenerate = true;
    record(x0);
  } else {
    const NelderMeadResult nm = nelder_mead(record, x0, problem.box, problem.optimizer);
    result.iterations = nm.iterations;
    result.hit_iteration_cap = nm.hit_iteration_cap;
  }
  result.evaluations = static_cast<Index>(result.trace.size());

  const RemlTraceRow* best = nullptr;
  for (const RemlTraceRow& row : result.trace) {
    if (row.positive_definite && (best == nullptr || row.loglik > best->loglik)) best = &row;
  }
  if (best == nullptr) {
    throw NotPositiveDefinite(-1, 0.0);
  }
  result.theta_hat = best->theta;
  result.loglik = best->loglik;
  result.factor_nnz = best->factor_nnz;
  return result;
}

}  // namespace mlkrig
