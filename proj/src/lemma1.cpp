#include "mlkrig/lemma1.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace mlkrig {

namespace {

// All d-tuples of non-negative integers summing to `total`.
void compositions(int dim, int total, std::vector<int>& current, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == dim - 1) {
    current.push_back(total);
    out.push_back(current);
    current.pop_back();
    return;
  }
  for (int k = total; k >= 0; --k) {
    current.push_back(k);
    compositions(dim, total - k, current, out);
    current.pop_back();
  }
}

Scalar factorial(int k) { return std::tgamma(k + 1.0); }

Scalar binomial(int m, int j) { return factorial(m) / (factorial(j) * factorial(m - j)); }

// Tensor central difference of multi-order gamma at z with per-axis steps.
Scalar central_difference(const KernelModel& kernel, const Vector& z, const std::vector<int>& gamma,
                          const Vector& step) {
  const Index d = z.size();
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  Scalar sum = 0.0;
  for (;;) {
    Vector pt = z;
    Scalar weight = 1.0;
    for (Index k = 0; k < d; ++k) {
      const int m = gamma[static_cast<std::size_t>(k)];
      const int j = idx[static_cast<std::size_t>(k)];
      pt[k] += (0.5 * m - j) * step[k];
      weight *= ((j % 2) ? -1.0 : 1.0) * binomial(m, j);
    }
    sum += weight * kernel(pt.norm());
    Index k = 0;
    for (; k < d; ++k) {
      auto& j = idx[static_cast<std::size_t>(k)];
      if (++j <= gamma[static_cast<std::size_t>(k)]) break;
      j = 0;
    }
    if (k == d) break;
  }
  for (Index k = 0; k < d; ++k) sum /= std::pow(step[k], gamma[static_cast<std::size_t>(k)]);
  return sum;
}

}  // namespace

Scalar derivative_sup(const KernelModel& kernel, const Eigen::Ref<const Vector>& lower,
                      const Eigen::Ref<const Vector>& upper, const std::vector<int>& gamma,
                      int samples_per_axis) {
  const Index d = lower.size();
  if (upper.size() != d || static_cast<Index>(gamma.size()) != d) throw InputError("derivative_sup: size mismatch");
  if (samples_per_axis < 2) throw InputError("derivative_sup: need at least two samples per axis");

  // Nearest point of the box to the origin bounds the step from below.
  Vector nearest(d);
  for (Index k = 0; k < d; ++k) nearest[k] = std::clamp(0.0, lower[k], upper[k]);
  const Scalar gap = nearest.norm();
  if (!(gap > 0.0)) throw InputError("derivative_sup: box contains the origin");
  int total = 0;
  for (int g : gamma) total += g;
  const Scalar h =
      std::pow(std::numeric_limits<Scalar>::epsilon(), 1.0 / (total + 2)) * std::max(gap, 1e-3);
  const Vector step = Vector::Constant(d, h);

  Scalar sup = std::abs(central_difference(kernel, nearest, gamma, step));
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  for (;;) {
    Vector z(d);
    for (Index k = 0; k < d; ++k) {
      const Scalar t = static_cast<Scalar>(idx[static_cast<std::size_t>(k)]) / (samples_per_axis - 1);
      z[k] = lower[k] + t * (upper[k] - lower[k]);
    }
    sup = std::max(sup, std::abs(central_difference(kernel, z, gamma, step)));
    Index k = 0;
    for (; k < d; ++k) {
      auto& j = idx[static_cast<std::size_t>(k)];
      if (++j < samples_per_axis) break;
      j = 0;
    }
    if (k == d) break;
  }
  return sup;
}

Lemma1Bound lemma1_bound(const KernelModel& kernel, const Eigen::Ref<const Vector>& center_a,
                         const Eigen::Ref<const Vector>& radius_a, const Eigen::Ref<const Vector>& center_b,
                         const Eigen::Ref<const Vector>& radius_b, int f_tilde, const Lemma1Options& options) {
  const Index d = center_a.size();
  if (d < 1 || center_b.size() != d || radius_a.size() != d || radius_b.size() != d) {
    throw InputError("lemma1_bound: inconsistent dimensions");
  }
  if (f_tilde < 0) throw InputError("lemma1_bound: f~ must be non-negative");
  if ((radius_a.array() < 0.0).any() || (radius_b.array() < 0.0).any()) {
    throw InputError("lemma1_bound: radii must be non-negative");
  }
  // z = x - y ranges over (c_a - c_b) +- (r_a + r_b).
  const Vector mid = center_a - center_b;
  const Vector spread = radius_a + radius_b;
  const Vector lower = mid - spread;
  const Vector upper = mid + spread;
  if (((lower.array() <= 0.0) && (upper.array() >= 0.0)).all()) {
    throw InputError("lemma1_bound: the boxes overlap, so the kernel derivatives are unbounded");
  }
  int samples = options.samples_per_axis;
  if (samples == 0) samples = d == 1 ? 65 : (d == 2 ? 9 : 5);

  Lemma1Bound out;
  out.center_a = center_a;
  out.radius_a = radius_a;
  out.center_b = center_b;
  out.radius_b = radius_b;
  out.order = f_tilde + 1;

  std::vector<std::vector<int>> multi;
  std::vector<int> scratch;
  compositions(static_cast<int>(d), out.order, scratch, multi);

  auto weight = [&](const std::vector<int>& m, const Eigen::Ref<const Vector>& r) {
    Scalar w = 1.0;
    for (Index k = 0; k < d; ++k) {
      const int e = m[static_cast<std::size_t>(k)];
      w *= std::pow(r[k], e) / factorial(e);
    }
    return w;
  };

  std::map<std::vector<int>, Scalar> sup_cache;
  Scalar total = 0.0;
  for (const auto& alpha : multi) {
    const Scalar wa = weight(alpha, radius_a);
    if (wa == 0.0) continue;
    for (const auto& beta : multi) {
      const Scalar wb = weight(beta, radius_b);
      if (wb == 0.0) continue;
      std::vector<int> gamma(static_cast<std::size_t>(d));
      for (Index k = 0; k < d; ++k) gamma[static_cast<std::size_t>(k)] = alpha[static_cast<std::size_t>(k)] + beta[static_cast<std::size_t>(k)];
      auto it = sup_cache.find(gamma);
      if (it == sup_cache.end()) it = sup_cache.emplace(gamma, derivative_sup(kernel, lower, upper, gamma, samples)).first;
      total += wa * wb * it->second;
    }
  }
  out.value = total;
  return out;
}

Lemma1Bound lemma1_bound(const DecompositionTree& tree, const KernelModel& kernel, int f_tilde, Index cube_a,
                         Index cube_b, const Lemma1Options& options) {
  const Vector ra = Vector::Constant(tree.dim(), 0.5 * tree.side_length(cube_a));
  const Vector rb = Vector::Constant(tree.dim(), 0.5 * tree.side_length(cube_b));
  return lemma1_bound(kernel, tree.center(cube_a), ra, tree.center(cube_b), rb, f_tilde, options);
}

Matrix contrast_block(const MultiLevelBasis& basis, const DecompositionTree& tree, const CovarianceFunction& phi,
                      Index group_a, Index group_b) {
  const ContrastGroup& a = basis.groups().at(static_cast<std::size_t>(group_a));
  const ContrastGroup& b = basis.groups().at(static_cast<std::size_t>(group_b));
  const Matrix& pts = tree.sorted_points();
  const Matrix k = kernel_matrix(phi, pts.middleCols(a.point_begin, a.psi.rows()),
                                 pts.middleCols(b.point_begin, b.psi.rows()));
  return a.psi.transpose() * k * b.psi;
}

std::vector<std::pair<Index, Index>> separated_group_pairs(const MultiLevelBasis& basis,
                                                           const DecompositionTree& tree, Scalar separation) {
  std::vector<std::pair<Index, Index>> out;
  const auto& groups = basis.groups();
  const Index count = static_cast<Index>(groups.size());
  for (Index a = 0; a < count; ++a) {
    const ContrastGroup& ga = groups[static_cast<std::size_t>(a)];
    if (ga.level < 0) continue;
    const Vector la = tree.lower_corner(ga.cube);
    const Scalar sa = tree.side_length(ga.cube);
    for (Index b = a + 1; b < count; ++b) {
      const ContrastGroup& gb = groups[static_cast<std::size_t>(b)];
      if (gb.level < 0) continue;
      const Vector lb = tree.lower_corner(gb.cube);
      const Scalar sb = tree.side_length(gb.cube);
      Scalar gap = 0.0;
      for (Index k = 0; k < la.size(); ++k) {
        gap = std::max(gap, std::max(lb[k] - (la[k] + sa), la[k] - (lb[k] + sb)));
      }
      if (gap >= separation * std::max(sa, sb)) out.emplace_back(a, b);
    }
  }
  return out;
}

}  // namespace mlkrig
