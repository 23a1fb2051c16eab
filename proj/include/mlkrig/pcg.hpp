#ifndef MLKRIG_PCG_HPP
#define MLKRIG_PCG_HPP

#include "mlkrig/common.hpp"

#include <functional>
#include <vector>

namespace mlkrig {

using LinearOperator = std::function<Vector(const Vector&)>;

struct PcgOptions {
  Scalar eps = 1e-5;      // target ||A x - b|| / ||b|| (unpreconditioned)
  Scalar eps_pcg = 0.0;   // optional trigger on the scaled residual; 0 disables
  Index max_iter = 10000;
  Index recompute_every = 20;
};

struct PcgReport {
  Index iterations = 0;
  Index matvecs = 0;
  std::vector<Scalar> preconditioned_history;  // ||r~|| / ||b~|| per iteration
  Scalar relative_residual = 0;               // recomputed from the returned x
  Scalar eps_pcg = 0;
  Scalar eps = 0;
  bool converged = false;
};

struct PcgResult {
  Vector x;
  PcgReport report;
};

class PcgFailure : public NumericalError {
 public:
  PcgFailure(const std::string& what, PcgResult best) : NumericalError(what), best_(std::move(best)) {}
  const PcgResult& best() const { return best_; }

 private:
  PcgResult best_;
};

/// Conjugate gradients on the symmetrically scaled system
/// (S^-1 A S^-1)(S x) = S^-1 b, i.e. CG preconditioned by S^2. The true
/// residual b - A x is recomputed every `recompute_every` iterations and
/// before any termination; only recomputed residuals decide convergence.
/// A unit `scaling` gives plain CG. `observer` sees every iterate.
PcgResult pcg(const LinearOperator& a, const Eigen::Ref<const Vector>& scaling,
              const Eigen::Ref<const Vector>& b, const PcgOptions& options,
              const std::function<void(Index, const Vector&)>& observer = {});

}  // namespace mlkrig

#endif  // MLKRIG_PCG_HPP
