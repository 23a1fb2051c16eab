#ifndef MLKRIG_KERNELS_HPP
#define MLKRIG_KERNELS_HPP

#include "mlkrig/common.hpp"

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace mlkrig {

enum class KernelFamily { matern, exponential, gaussian };

std::string_view to_string(KernelFamily family);
KernelFamily parse_kernel_family(std::string_view name);

/// Isotropic unit-variance covariance function phi(r; theta).
///
///   matern       2^{1-nu}/Gamma(nu) (sqrt(2 nu) r/rho)^nu K_nu(sqrt(2 nu) r/rho)
///   exponential  exp(-r/rho)
///   gaussian     exp(-r^2 / (2 rho^2))
///
/// Matern orders 1/2, 3/2 and 5/2 take their closed forms.
class KernelModel {
 public:
  KernelModel() = default;
  KernelModel(KernelFamily family, Scalar nu, Scalar rho);

  static KernelModel matern(Scalar nu, Scalar rho) { return {KernelFamily::matern, nu, rho}; }
  static KernelModel exponential(Scalar rho) { return {KernelFamily::exponential, 0.5, rho}; }
  static KernelModel gaussian(Scalar rho) { return {KernelFamily::gaussian, 0.0, rho}; }

  /// Parses "matern:0.75,0.1667", "exponential:0.2" or "gaussian:0.3".
  static KernelModel parse(std::string_view text);
  std::string describe() const;

  KernelFamily family() const { return family_; }
  Scalar nu() const { return nu_; }
  Scalar rho() const { return rho_; }
  Scalar variance_at_zero() const { return 1.0; }

  /// Free parameters: (nu, rho) for Matern, (rho) otherwise.
  Vector theta() const;
  KernelModel with_theta(const Vector& theta) const;

  Scalar operator()(Scalar r) const;
  /// d phi / d r.
  Scalar derivative(Scalar r) const;

  /// True when evaluation needs no Bessel function.
  bool has_closed_form() const { return family_ != KernelFamily::matern || path_ != Path::general; }

 private:
  enum class Path { general, half, three_halves, five_halves };

  KernelFamily family_ = KernelFamily::exponential;
  Scalar nu_ = 0.5;
  Scalar rho_ = 1.0;
  Path path_ = Path::half;
  Scalar scale_ = 1.0;       // sqrt(2 nu) / rho
  Scalar log_norm_ = 0.0;    // log(2^{1-nu} / Gamma(nu))
};

enum class SplineMesh {
  bisection,  // halve failing elements
  marching,   // sweep down from r_max taking the longest passing element
};

/// Piecewise cubic Hermite interpolant of a kernel on (0, r_max].
///
/// Every element satisfies h^4/384 * sup|phi''''| < tol, with the sup
/// estimated from central differences. Near the origin refinement stops once
/// an element [m, 2m] passes; arguments below `exact_below()` and above r_max
/// go to the exact kernel.
class SplineInterpolant {
 public:
  static constexpr Scalar kDefaultRangeMax = 2.5;
  static constexpr std::size_t kDefaultNodeCap = 2000;

  SplineInterpolant(const KernelModel& kernel, Scalar tol, Scalar r_max = kDefaultRangeMax,
                    std::size_t node_cap = kDefaultNodeCap,
                    SplineMesh mesh = SplineMesh::marching);

  /// Interpolates an arbitrary even function given its value and slope.
  SplineInterpolant(std::function<Scalar(Scalar)> value, std::function<Scalar(Scalar)> slope,
                    Scalar tol, Scalar r_max = kDefaultRangeMax,
                    std::size_t node_cap = kDefaultNodeCap,
                    SplineMesh mesh = SplineMesh::marching);

  Scalar operator()(Scalar r) const;

  const std::vector<Scalar>& breakpoints() const { return nodes_; }
  std::size_t node_count() const { return nodes_.size(); }
  Scalar exact_below() const { return nodes_.front(); }
  Scalar r_max() const { return r_max_; }
  Scalar tol() const { return tol_; }

  /// Fourth-derivative sup estimate used by the refinement test on [a, a+h].
  static Scalar fourth_derivative_sup(const std::function<Scalar(Scalar)>& f, Scalar a, Scalar h);

 private:
  std::function<Scalar(Scalar)> exact_;
  Scalar tol_;
  Scalar r_max_;
  std::vector<Scalar> nodes_;
  std::vector<Scalar> values_;
  std::vector<Scalar> slopes_;
};

/// Covariance evaluation used in hot loops: exact, or spline-accelerated.
class CovarianceFunction {
 public:
  explicit CovarianceFunction(KernelModel kernel) : kernel_(std::move(kernel)) {}
  CovarianceFunction(KernelModel kernel, std::shared_ptr<const SplineInterpolant> spline)
      : kernel_(std::move(kernel)), spline_(std::move(spline)) {}

  /// Builds the spline with the given tolerance unless the kernel has a cheap
  /// closed form.
  static CovarianceFunction accelerated(const KernelModel& kernel, Scalar tol = 5e-9);

  Scalar operator()(Scalar r) const { return spline_ ? (*spline_)(r) : kernel_(r); }
  const KernelModel& kernel() const { return kernel_; }
  bool uses_spline() const { return static_cast<bool>(spline_); }

 private:
  KernelModel kernel_;
  std::shared_ptr<const SplineInterpolant> spline_;
};

/// Kernel block K[a, b] = phi(|x_a - y_b|) for columns of `x` (d x m) and `y` (d x k).
void kernel_block(const CovarianceFunction& phi, const Eigen::Ref<const Matrix>& x,
                  const Eigen::Ref<const Matrix>& y, Eigen::Ref<Matrix> out);

Matrix kernel_matrix(const CovarianceFunction& phi, const Eigen::Ref<const Matrix>& x,
                     const Eigen::Ref<const Matrix>& y);

/// c(s0)_i = phi(|s_i - s0|) over the columns of `locations`.
Vector cross_covariance(const KernelModel& kernel, const Eigen::Ref<const Matrix>& locations,
                        const Eigen::Ref<const Vector>& s0);

}  // namespace mlkrig

#endif  // MLKRIG_KERNELS_HPP
