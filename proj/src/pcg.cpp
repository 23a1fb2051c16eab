#include "mlkrig/pcg.hpp"

#include <cmath>
#include <sstream>

namespace mlkrig {

PcgResult pcg(const LinearOperator& a, const Eigen::Ref<const Vector>& scaling,
              const Eigen::Ref<const Vector>& b, const PcgOptions& options,
              const std::function<void(Index, const Vector&)>& observer) {
  const Index n = b.size();
  if (scaling.size() != n) throw InputError("pcg: scaling length differs from right-hand side");
  if (!(scaling.array() > 0.0).all()) throw InputError("pcg: scaling must be strictly positive");
  if (!(options.eps > 0.0)) throw InputError("pcg: eps must be positive");

  PcgResult result;
  PcgReport& rep = result.report;
  rep.eps = options.eps;
  rep.eps_pcg = options.eps_pcg;
  result.x = Vector::Zero(n);

  const Scalar bnorm = b.norm();
  if (bnorm == 0.0) {
    rep.converged = true;
    return result;
  }
  const Vector inv_s = scaling.cwiseInverse();
  const Scalar bbar_norm = inv_s.cwiseProduct(b).norm();

  // Scaled iterate y = S x; residual rbar = S^-1 (b - A x).
  Vector y = Vector::Zero(n);
  Vector rbar = inv_s.cwiseProduct(b);
  Vector dir = rbar;
  Scalar rho = rbar.squaredNorm();
  Index since_recompute = 0;

  auto recompute = [&]() {
    const Vector x = inv_s.cwiseProduct(y);
    const Vector r = b - a(x);
    ++rep.matvecs;
    rbar = inv_s.cwiseProduct(r);
    rho = rbar.squaredNorm();
    since_recompute = 0;
    return r.norm() / bnorm;
  };

  while (rep.iterations < options.max_iter) {
    const Vector adir = inv_s.cwiseProduct(a(inv_s.cwiseProduct(dir)));
    ++rep.matvecs;
    const Scalar curvature = dir.dot(adir);
    if (!(curvature > 0.0)) {
      std::ostringstream os;
      os << "pcg: operator is not positive definite (p^T A p = " << curvature << ")";
      result.x = inv_s.cwiseProduct(y);
      rep.relative_residual = (b - a(result.x)).norm() / bnorm;
      throw PcgFailure(os.str(), result);
    }
    const Scalar alpha = rho / curvature;
    y.noalias() += alpha * dir;
    rbar.noalias() -= alpha * adir;
    ++rep.iterations;
    ++since_recompute;
    const Scalar pre = rbar.norm() / bbar_norm;
    rep.preconditioned_history.push_back(pre);
    if (observer) observer(rep.iterations, inv_s.cwiseProduct(y));

    const Scalar estimate = scaling.cwiseProduct(rbar).norm() / bnorm;
    const bool triggered = estimate <= options.eps || (options.eps_pcg > 0.0 && pre <= options.eps_pcg);
    const Scalar rho_old = rho;
    if (triggered || since_recompute >= options.recompute_every) {
      const Scalar true_rel = recompute();
      if (true_rel <= options.eps) {
        result.x = inv_s.cwiseProduct(y);
        rep.relative_residual = true_rel;
        rep.converged = true;
        return result;
      }
    } else {
      rho = rbar.squaredNorm();
    }
    dir = rbar + (rho / rho_old) * dir;
  }

  result.x = inv_s.cwiseProduct(y);
  rep.relative_residual = (b - a(result.x)).norm() / bnorm;
  ++rep.matvecs;
  std::ostringstream os;
  os << "pcg: no convergence after " << rep.iterations << " iterations (relative residual "
     << rep.relative_residual << ", target " << options.eps << ")";
  throw PcgFailure(os.str(), result);
}

}  // namespace mlkrig
