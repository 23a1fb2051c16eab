#include "mlkrig/krige.hpp"

#include "mlkrig/polynomial.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>

namespace mlkrig {

namespace {

Matrix cholesky_inverse(const Matrix& a, const char* what) {
  const Matrix sym = 0.5 * (a + a.transpose());
  const Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success) throw NumericalError(std::string(what) + " is not positive definite");
  Matrix inv = llt.solve(Matrix::Identity(a.rows(), a.cols()));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

KrigingContext::KrigingContext(const MultiLevelBasis& basis, const DecompositionTree& tree,
                               const SpatialDataset& data, const KernelModel& kernel,
                               const KrigingOptions& options)
    : basis_(&basis), data_(&data), kernel_(kernel), options_(options) {
  if (!(options.eps > 0.0)) throw InputError("kriging: eps must be positive");
  if (data.size() != basis.n()) throw InputError("kriging: dataset size differs from basis");
  const CovarianceFunction phi = options.use_spline
                                     ? CovarianceFunction::accelerated(kernel, options.spline_tol)
                                     : CovarianceFunction(kernel);
  op_ = std::make_unique<ContrastOperator>(basis, data, phi, options.dense_limit);
  scaling_ = diag_preconditioner(basis, tree, phi).cwiseSqrt();
}

PcgResult KrigingContext::solve(const Eigen::Ref<const Vector>& rhs, Scalar eps) const {
  PcgOptions opts;
  opts.eps = eps;
  opts.max_iter = options_.max_iter;
  const ContrastOperator& op = *op_;
  return pcg([&op](const Vector& v) { return op.apply(v); }, scaling_, rhs, opts);
}

KrigingSolution solve_kriging_system(const KrigingContext& context) {
  const SpatialDataset& data = context.data();
  if (!data.values) throw InputError("kriging: dataset has no observations");
  const MultiLevelBasis& basis = context.basis();
  const Vector& z = *data.values;

  KrigingSolution sol;
  sol.kernel = context.kernel();
  sol.f = basis.spec().f;
  if (basis.contrast_count() > 0) {
    PcgResult res = context.solve(apply_W(basis, z), context.options().eps);
    sol.gamma_w = std::move(res.x);
    sol.report = std::move(res.report);
  } else {
    sol.report.converged = true;
  }
  sol.gamma_hat = sol.gamma_w.size() > 0 ? apply_Wt(basis, sol.gamma_w) : Vector(Vector::Zero(basis.n()));
  const Matrix mf = trend_matrix(data.locations, sol.f);
  const Vector resid = z - context.op().kernel().apply(sol.gamma_hat);
  sol.beta_hat = mf.colPivHouseholderQr().solve(resid);
  return sol;
}

Vector predict_many(const KrigingSolution& solution, const SpatialDataset& data,
                    const Eigen::Ref<const Matrix>& targets) {
  if (targets.rows() != data.dim()) throw InputError("predict: target dimension differs from data");
  if (!targets.allFinite()) throw InputError("predict: targets must be finite");
  const CovarianceFunction phi(solution.kernel);
  Vector out(targets.cols());
  constexpr Index chunk = 256;
  Matrix kbuf;
  for (Index c0 = 0; c0 < targets.cols(); c0 += chunk) {
    const Index w = std::min(chunk, targets.cols() - c0);
    kbuf.resize(data.size(), w);
    kernel_block(phi, data.locations, targets.middleCols(c0, w), kbuf);
    out.segment(c0, w) = kbuf.transpose() * solution.gamma_hat;
    out.segment(c0, w) += trend_matrix(targets.middleCols(c0, w), solution.f) * solution.beta_hat;
  }
  return out;
}

Scalar predict(const KrigingSolution& solution, const SpatialDataset& data, const Eigen::Ref<const Vector>& s0) {
  return predict_many(solution, data, Matrix(s0))[0];
}

MseWorkspace build_mse_workspace(const KrigingContext& context) {
  const MultiLevelBasis& basis = context.basis();
  const Index p = basis.p();
  const KernelOperator& kop = context.op().kernel();

  MseWorkspace ws;
  const Matrix lt = l_matrix(basis).transpose();  // n x p
  const Matrix clt = kop.apply_block(lt);
  ws.a_w = apply_W_block(basis, clt);
  ws.s_w = apply_L_block(basis, clt);
  ws.s_w = 0.5 * (ws.s_w + ws.s_w.transpose()).eval();

  Matrix cinv_a(ws.a_w.rows(), p);
  for (Index k = 0; k < p; ++k) {
    cinv_a.col(k) = ws.a_w.rows() > 0 ? context.solve(ws.a_w.col(k), context.options().eps / 10.0).x
                                      : Vector();
  }
  ws.s_tilde = cholesky_inverse(ws.s_w - ws.a_w.transpose() * cinv_a, "mse: Schur complement S_W - a_W^T C_W^-1 a_W");
  ws.l_mf = apply_L_block(basis, trend_matrix(context.data().locations, basis.spec().f));
  ws.trend_inverse = cholesky_inverse(ws.l_mf.transpose() * ws.s_tilde * ws.l_mf, "mse: M_f^T C^-1 M_f");
  return ws;
}

MseValue mse(const KrigingContext& context, const MseWorkspace& workspace, const Eigen::Ref<const Vector>& s0) {
  const MultiLevelBasis& basis = context.basis();
  const SpatialDataset& data = context.data();
  const Vector c = cross_covariance(context.kernel(), data.locations, s0);
  const Vector wc = apply_W(basis, c);
  const Vector lc = apply_L(basis, c);

  MseValue out;
  Vector y;
  if (wc.size() > 0) {
    PcgResult res = context.solve(wc, context.options().eps);
    y = std::move(res.x);
    out.report = std::move(res.report);
  } else {
    y = Vector();
    out.report.converged = true;
  }
  const Vector q = lc - workspace.a_w.transpose() * y;
  const Vector sq = workspace.s_tilde * q;
  const Scalar c_cinv_c = wc.dot(y) + q.dot(sq);
  const Vector u = workspace.l_mf.transpose() * sq - trend_vector(s0, basis.spec().f);
  out.raw = context.kernel()(0.0) + u.dot(workspace.trend_inverse * u) - c_cinv_c;
  if (out.raw < -1e-6) {
    throw NumericalError("mse: negative prediction variance " + std::to_string(out.raw) +
                         " (tighten eps or check the kernel)");
  }
  out.clamped = out.raw < 0.0;
  out.value = std::max(out.raw, 0.0);
  return out;
}

DenseKriging::DenseKriging(const SpatialDataset& data, const KernelModel& kernel, int f)
    : data_(&data), kernel_(kernel), f_(f) {
  if (!data.values) throw InputError("kriging: dataset has no observations");
  const Matrix c = kernel_matrix(CovarianceFunction(kernel), data.locations, data.locations);
  const Eigen::LLT<Matrix> llt(c);
  if (llt.info() != Eigen::Success) throw NumericalError("dense kriging: covariance is not positive definite");
  chol_l_ = llt.matrixL();
  mf_ = trend_matrix(data.locations, f);
  const Matrix cinv_m = llt.solve(mf_);
  trend_gram_ = mf_.transpose() * cinv_m;
  const Vector& z = *data.values;
  beta_hat = trend_gram_.llt().solve(cinv_m.transpose() * z);
  gamma_hat = llt.solve(z - mf_ * beta_hat);
}

Matrix DenseKriging::trend_gram() const { return trend_gram_; }

Scalar DenseKriging::predict(const Eigen::Ref<const Vector>& s0) const {
  return trend_vector(s0, f_).dot(beta_hat) + cross_covariance(kernel_, data_->locations, s0).dot(gamma_hat);
}

Scalar DenseKriging::mse(const Eigen::Ref<const Vector>& s0) const {
  const Vector c = cross_covariance(kernel_, data_->locations, s0);
  const Vector half = chol_l_.triangularView<Eigen::Lower>().solve(c);
  const Matrix half_m = chol_l_.triangularView<Eigen::Lower>().solve(mf_);
  const Vector u = half_m.transpose() * half - trend_vector(s0, f_);
  return kernel_(0.0) + u.dot(trend_gram_.llt().solve(u)) - half.squaredNorm();
}

}  // namespace mlkrig
