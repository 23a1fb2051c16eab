#ifndef MLKRIG_NELDER_MEAD_HPP
#define MLKRIG_NELDER_MEAD_HPP

#include "mlkrig/common.hpp"

#include <functional>

namespace mlkrig {

struct Box {
  Vector lower;
  Vector upper;

  Index size() const { return lower.size(); }
  bool contains(const Eigen::Ref<const Vector>& x) const;
  void validate() const;
};

struct NelderMeadOptions {
  Scalar tol = 1e-3;         // on both the simplex diameter (box coordinates) and the f spread
  Index max_iter = 1000;
  Scalar initial_step = 0.5; // simplex edge in logit coordinates
};

struct NelderMeadResult {
  Vector x;
  Scalar f = 0;
  Index iterations = 0;
  Index evaluations = 0;
  bool hit_iteration_cap = false;
};

/// Minimizes f over the open box with the standard simplex moves (reflection
/// 1, expansion 2, contraction 1/2, shrink 1/2) in logit coordinates.
/// f may return +infinity to reject a point.
NelderMeadResult nelder_mead(const std::function<Scalar(const Vector&)>& f,
                             const Eigen::Ref<const Vector>& start, const Box& box,
                             const NelderMeadOptions& options = {});

Vector to_logit(const Box& box, const Eigen::Ref<const Vector>& x);
Vector from_logit(const Box& box, const Eigen::Ref<const Vector>& u);

}  // namespace mlkrig

#endif  // MLKRIG_NELDER_MEAD_HPP
