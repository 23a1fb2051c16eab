#ifndef MLKRIG_KRIGE_HPP
#define MLKRIG_KRIGE_HPP

#include "mlkrig/basis.hpp"
#include "mlkrig/geometry.hpp"
#include "mlkrig/kernels.hpp"
#include "mlkrig/mlcov.hpp"
#include "mlkrig/pcg.hpp"

#include <memory>

namespace mlkrig {

struct KrigingOptions {
  Scalar eps = 1e-5;         // unpreconditioned relative residual for C_W
  Index max_iter = 10000;
  Index dense_limit = 10000;  // cache C when n is at most this
  bool use_spline = false;
  Scalar spline_tol = 5e-9;
};

/// gamma_hat = W^T gamma_W with C_W gamma_W = W Z, and beta_hat from the
/// least-squares fit of M_f beta to Z - C gamma_hat.
struct KrigingSolution {
  Vector gamma_w;
  Vector gamma_hat;  // original point order
  Vector beta_hat;
  PcgReport report;
  KernelModel kernel;
  int f = 0;
};

/// Shared state for one (basis, data, theta): the contrast operator and the
/// Jacobi scaling sqrt(diag C_W).
class KrigingContext {
 public:
  KrigingContext(const MultiLevelBasis& basis, const DecompositionTree& tree, const SpatialDataset& data,
                 const KernelModel& kernel, const KrigingOptions& options = {});

  const MultiLevelBasis& basis() const { return *basis_; }
  const SpatialDataset& data() const { return *data_; }
  const KernelModel& kernel() const { return kernel_; }
  const KrigingOptions& options() const { return options_; }
  const ContrastOperator& op() const { return *op_; }
  const Vector& scaling() const { return scaling_; }

  /// C_W^-1 rhs by scaled CG to tolerance eps.
  PcgResult solve(const Eigen::Ref<const Vector>& rhs, Scalar eps) const;

 private:
  const MultiLevelBasis* basis_;
  const SpatialDataset* data_;
  KernelModel kernel_;
  KrigingOptions options_;
  std::unique_ptr<ContrastOperator> op_;
  Vector scaling_;
};

KrigingSolution solve_kriging_system(const KrigingContext& context);

/// zhat(s0) = m(s0)^T beta_hat + c(s0)^T gamma_hat for every column of `targets`.
Vector predict_many(const KrigingSolution& solution, const SpatialDataset& data,
                    const Eigen::Ref<const Matrix>& targets);
Scalar predict(const KrigingSolution& solution, const SpatialDataset& data,
               const Eigen::Ref<const Vector>& s0);

struct MseWorkspace {
  Matrix a_w;            // W C L^T, (n - p) x p
  Matrix s_w;            // L C L^T
  Matrix s_tilde;        // (S_W - a_W^T C_W^-1 a_W)^-1, symmetrized
  Matrix l_mf;           // L M_f
  Matrix trend_inverse;  // ((L M_f)^T S~ (L M_f))^-1 = (M_f^T C^-1 M_f)^-1
};

/// Runs p solves with C_W at eps / 10. Throws NumericalError when S~ is not
/// positive definite.
MseWorkspace build_mse_workspace(const KrigingContext& context);

struct MseValue {
  Scalar value = 0;
  Scalar raw = 0;        // before clamping small negatives
  bool clamped = false;
  PcgReport report;
};

/// phi(0) + u^T (M_f^T C^-1 M_f)^-1 u - c^T C^-1 c with u = M_f^T C^-1 c - m(s0).
MseValue mse(const KrigingContext& context, const MseWorkspace& workspace,
             const Eigen::Ref<const Vector>& s0);

/// The same quantities from a dense factorization of C (small n only).
struct DenseKriging {
  DenseKriging(const SpatialDataset& data, const KernelModel& kernel, int f);

  Vector beta_hat;
  Vector gamma_hat;
  Scalar predict(const Eigen::Ref<const Vector>& s0) const;
  Scalar mse(const Eigen::Ref<const Vector>& s0) const;
  /// M_f^T C^-1 M_f.
  Matrix trend_gram() const;

 private:
  const SpatialDataset* data_;
  KernelModel kernel_;
  int f_;
  Matrix chol_l_;  // C = L L^T
  Matrix mf_;
  Matrix trend_gram_;
};

}  // namespace mlkrig

#endif  // MLKRIG_KRIGE_HPP
