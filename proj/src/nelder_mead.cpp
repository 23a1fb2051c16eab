#include "mlkrig/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace mlkrig {

bool Box::contains(const Eigen::Ref<const Vector>& x) const {
  return x.size() == size() && (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

void Box::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0) throw InputError("box: bounds must have equal, nonzero length");
  if (!lower.allFinite() || !upper.allFinite()) throw InputError("box: bounds must be finite");
  if (!(lower.array() < upper.array()).all()) throw InputError("box: lower bound must be below upper bound");
}

Vector to_logit(const Box& box, const Eigen::Ref<const Vector>& x) {
  Vector u(x.size());
  for (Index k = 0; k < x.size(); ++k) {
    const Scalar w = box.upper[k] - box.lower[k];
    const Scalar s = std::clamp((x[k] - box.lower[k]) / w, 1e-12, 1.0 - 1e-12);
    u[k] = std::log(s / (1.0 - s));
  }
  return u;
}

Vector from_logit(const Box& box, const Eigen::Ref<const Vector>& u) {
  Vector x(u.size());
  for (Index k = 0; k < u.size(); ++k) {
    const Scalar s = 1.0 / (1.0 + std::exp(-u[k]));
    x[k] = box.lower[k] + (box.upper[k] - box.lower[k]) * s;
  }
  return x;
}

NelderMeadResult nelder_mead(const std::function<Scalar(const Vector&)>& f,
                             const Eigen::Ref<const Vector>& start, const Box& box,
                             const NelderMeadOptions& options) {
  box.validate();
  if (!box.contains(start)) throw InputError("nelder_mead: start lies outside the box");
  const Index dim = box.size();
  NelderMeadResult res;

  auto eval = [&](const Vector& u) {
    ++res.evaluations;
    const Scalar v = f(from_logit(box, u));
    return std::isnan(v) ? std::numeric_limits<Scalar>::infinity() : v;
  };

  std::vector<Vector> simplex(static_cast<std::size_t>(dim + 1));
  std::vector<Scalar> values(simplex.size());
  simplex[0] = to_logit(box, start);
  for (Index k = 0; k < dim; ++k) {
    simplex[k + 1] = simplex[0];
    simplex[k + 1][k] += options.initial_step;
  }
  for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(simplex.size());
  auto sort_simplex = [&]() {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<Vector> s2;
    std::vector<Scalar> v2;
    for (std::size_t i : order) {
      s2.push_back(simplex[i]);
      v2.push_back(values[i]);
    }
    simplex = std::move(s2);
    values = std::move(v2);
  };

  auto converged = [&]() {
    if (!std::isfinite(values.back())) return false;
    const Vector best = from_logit(box, simplex[0]);
    Scalar diameter = 0.0;
    Scalar spread = 0.0;
    for (std::size_t i = 1; i < simplex.size(); ++i) {
      diameter = std::max(diameter, (from_logit(box, simplex[i]) - best).cwiseAbs().maxCoeff());
      spread = std::max(spread, std::abs(values[i] - values[0]));
    }
    return diameter < options.tol && spread < options.tol;
  };

  sort_simplex();
  while (!converged()) {
    if (res.iterations >= options.max_iter) {
      res.hit_iteration_cap = true;
      break;
    }
    ++res.iterations;
    const std::size_t worst = simplex.size() - 1;
    Vector centroid = Vector::Zero(dim);
    for (std::size_t i = 0; i < worst; ++i) centroid += simplex[i];
    centroid /= static_cast<Scalar>(dim);

    const Vector xr = centroid + (centroid - simplex[worst]);
    const Scalar fr = eval(xr);
    bool shrink = false;
    if (fr < values[0]) {
      const Vector xe = centroid + 2.0 * (centroid - simplex[worst]);
      const Scalar fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        values[worst] = fe;
      } else {
        simplex[worst] = xr;
        values[worst] = fr;
      }
    } else if (fr < values[worst - 1]) {
      simplex[worst] = xr;
      values[worst] = fr;
    } else if (fr < values[worst]) {
      const Vector xc = centroid + 0.5 * (xr - centroid);
      const Scalar fc = eval(xc);
      if (fc <= fr) {
        simplex[worst] = xc;
        values[worst] = fc;
      } else {
        shrink = true;
      }
    } else {
      const Vector xc = centroid + 0.5 * (simplex[worst] - centroid);
      const Scalar fc = eval(xc);
      if (fc < values[worst]) {
        simplex[worst] = xc;
        values[worst] = fc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (std::size_t i = 1; i < simplex.size(); ++i) {
        simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0]);
        values[i] = eval(simplex[i]);
      }
    }
    sort_simplex();
  }
  res.x = from_logit(box, simplex[0]);
  res.f = values[0];
  return res;
}

}  // namespace mlkrig
