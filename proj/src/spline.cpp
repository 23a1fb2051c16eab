#include "mlkrig/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace mlkrig {

namespace {

struct Element {
  Scalar a;
  Scalar b;
};

class MeshBuilder {
 public:
  MeshBuilder(const std::function<Scalar(Scalar)>& f, Scalar tol, std::size_t node_cap)
      : f_(f), tol_(tol), node_cap_(node_cap) {}

  Scalar estimate(Scalar a, Scalar b) const {
    const Scalar h = b - a;
    return h * h * h * h / 384.0 * SplineInterpolant::fourth_derivative_sup(f_, a, h);
  }

  // Returns true when [a, b] passed without being split.
  bool refine(Scalar a, Scalar b) {
    const Scalar err = estimate(a, b);
    if (err < tol_) {
      accept(a, b, err);
      return true;
    }
    check_budget(a, b, err);
    const Scalar m = 0.5 * (a + b);
    refine(a, m);
    refine(m, b);
    return false;
  }

  // The element touching the origin: split until its right half passes as a
  // whole, then hand [0, m) to the exact kernel.
  void refine_origin(Scalar b) {
    const Scalar err = estimate(0.0, b);
    if (err < tol_) {
      accept(0.0, b, err);
      return;
    }
    check_budget(0.0, b, err);
    const Scalar m = 0.5 * b;
    std::vector<Element> right;
    right.swap(elements_);
    const bool whole = refine(m, b);
    std::vector<Element> upper;
    upper.swap(elements_);
    elements_ = std::move(right);
    if (!whole) refine_origin(m);
    elements_.insert(elements_.end(), upper.begin(), upper.end());
  }

  // Right to left; each step takes the longest element ending at b that
  // passes, found by growing or shrinking the previous length by 5%.
  void march(Scalar r_max) {
    std::vector<Element> reversed;
    Scalar b = r_max;
    Scalar h = r_max;
    for (;;) {
      const Scalar half_err = estimate(0.5 * b, b);
      h = std::min(h, b);
      Scalar err = estimate(b - h, b);
      if (err < tol_) {
        while (h < b) {
          const Scalar grown = std::min(1.05 * h, b);
          const Scalar grown_err = estimate(b - grown, b);
          if (!(grown_err < tol_)) break;
          h = grown;
          err = grown_err;
        }
      } else {
        while (!(err < tol_)) {
          h *= 0.95;
          if (h < 1e-12) check_budget(b - h, b, err, true);
          err = estimate(b - h, b);
        }
      }
      if (h >= b) {
        reversed.push_back({0.0, b});
        update_worst(0.0, b, err);
        break;
      }
      if (half_err < tol_ && h <= 0.5 * b) {
        reversed.push_back({0.5 * b, b});
        update_worst(0.5 * b, b, half_err);
        break;
      }
      reversed.push_back({b - h, b});
      update_worst(b - h, b, err);
      if (reversed.size() + 1 > node_cap_) check_budget(b - h, b, err, true);
      b -= h;
    }
    elements_.assign(reversed.rbegin(), reversed.rend());
  }

  std::vector<Element> take() { return std::move(elements_); }

 private:
  void accept(Scalar a, Scalar b, Scalar err) {
    elements_.push_back({a, b});
    update_worst(a, b, err);
  }

  void update_worst(Scalar a, Scalar b, Scalar err) {
    if (err > worst_err_) {
      worst_err_ = err;
      worst_ = {a, b};
    }
  }

  void check_budget(Scalar a, Scalar b, Scalar err, bool exhausted = false) {
    ++splits_;
    if (exhausted || splits_ + 1 > node_cap_ || b - a < 1e-12) {
      std::ostringstream os;
      os.precision(6);
      os << "spline mesh exceeds " << node_cap_ << " nodes; worst element [" << a << ", " << b
         << "] with error estimate " << err;
      throw NumericalError(os.str());
    }
  }

  const std::function<Scalar(Scalar)>& f_;
  Scalar tol_;
  std::size_t node_cap_;
  std::size_t splits_ = 0;
  std::vector<Element> elements_;
  Scalar worst_err_ = 0.0;
  Element worst_{0.0, 0.0};
};

}  // namespace

Scalar SplineInterpolant::fourth_derivative_sup(const std::function<Scalar(Scalar)>& f, Scalar a,
                                                Scalar h) {
  // 9 samples at a + j h/8 with a 5-point stencil of step h/16: a 21-point grid.
  const Scalar step = h / 16.0;
  std::array<Scalar, 21> grid{};
  for (int m = 0; m < 21; ++m) grid[m] = f(std::abs(a + (m - 2) * step));
  const Scalar inv = 1.0 / (step * step * step * step);
  Scalar sup = 0.0;
  for (int j = 0; j <= 8; ++j) {
    const int c = 2 * j + 2;
    const Scalar d4 =
        (grid[c - 2] - 4.0 * grid[c - 1] + 6.0 * grid[c] - 4.0 * grid[c + 1] + grid[c + 2]) * inv;
    sup = std::max(sup, std::abs(d4));
  }
  return sup;
}

SplineInterpolant::SplineInterpolant(const KernelModel& kernel, Scalar tol, Scalar r_max,
                                     std::size_t node_cap, SplineMesh mesh)
    : SplineInterpolant([kernel](Scalar r) { return kernel(r); },
                        [kernel](Scalar r) { return kernel.derivative(r); }, tol, r_max,
                        node_cap, mesh) {}

SplineInterpolant::SplineInterpolant(std::function<Scalar(Scalar)> value,
                                     std::function<Scalar(Scalar)> slope, Scalar tol, Scalar r_max,
                                     std::size_t node_cap, SplineMesh mesh)
    : exact_(std::move(value)), tol_(tol), r_max_(r_max) {
  if (!(tol > 0.0)) throw InputError("spline: tol must be positive");
  if (!(r_max > 0.0) || !std::isfinite(r_max)) throw InputError("spline: r_max must be positive");
  if (node_cap < 2) throw InputError("spline: node cap must be at least 2");

  MeshBuilder builder(exact_, tol, node_cap);
  if (mesh == SplineMesh::bisection) {
    builder.refine_origin(r_max);
  } else {
    builder.march(r_max);
  }
  const std::vector<Element> elements = builder.take();

  nodes_.reserve(elements.size() + 1);
  nodes_.push_back(elements.front().a);
  for (const Element& e : elements) nodes_.push_back(e.b);
  values_.resize(nodes_.size());
  slopes_.resize(nodes_.size());
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    values_[k] = exact_(nodes_[k]);
    slopes_[k] = slope(nodes_[k]);
  }
}

Scalar SplineInterpolant::operator()(Scalar r) const {
  if (r < nodes_.front() || r > r_max_) return exact_(r);
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r);
  std::size_t j = static_cast<std::size_t>(it - nodes_.begin());
  j = j == 0 ? 0 : j - 1;
  if (j + 1 >= nodes_.size()) j = nodes_.size() - 2;
  const Scalar h = nodes_[j + 1] - nodes_[j];
  const Scalar t = (r - nodes_[j]) / h;
  const Scalar s = 1.0 - t;
  const Scalar h00 = (1.0 + 2.0 * t) * s * s;
  const Scalar h10 = t * s * s;
  const Scalar h01 = t * t * (3.0 - 2.0 * t);
  const Scalar h11 = -t * t * s;
  return h00 * values_[j] + h10 * h * slopes_[j] + h01 * values_[j + 1] + h11 * h * slopes_[j + 1];
}

}  // namespace mlkrig
