#include "mlkrig/kernels.hpp"

#include "mlkrig/special.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace mlkrig {

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::matern: return "matern";
    case KernelFamily::exponential: return "exponential";
    case KernelFamily::gaussian: return "gaussian";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "matern") return KernelFamily::matern;
  if (name == "exponential" || name == "exp") return KernelFamily::exponential;
  if (name == "gaussian" || name == "gauss") return KernelFamily::gaussian;
  throw InputError("unknown kernel family '" + std::string(name) + "'");
}

KernelModel::KernelModel(KernelFamily family, Scalar nu, Scalar rho)
    : family_(family), nu_(nu), rho_(rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw InputError("kernel: rho must be positive and finite");
  switch (family) {
    case KernelFamily::matern:
      if (!(nu > 0.0) || !std::isfinite(nu)) throw InputError("kernel: nu must be positive and finite");
      if (nu == 0.5) {
        path_ = Path::half;
      } else if (nu == 1.5) {
        path_ = Path::three_halves;
      } else if (nu == 2.5) {
        path_ = Path::five_halves;
      } else {
        path_ = Path::general;
      }
      scale_ = std::sqrt(2.0 * nu) / rho;
      log_norm_ = (1.0 - nu) * std::log(2.0) - std::lgamma(nu);
      break;
    case KernelFamily::exponential:
      nu_ = 0.5;
      path_ = Path::half;
      scale_ = 1.0 / rho;
      break;
    case KernelFamily::gaussian:
      nu_ = 0.0;
      path_ = Path::general;
      scale_ = 1.0 / rho;
      break;
  }
}

KernelModel KernelModel::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw InputError("kernel spec must look like family:params");
  const KernelFamily family = parse_kernel_family(text.substr(0, colon));
  std::vector<Scalar> params;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string item(rest.substr(0, comma));
    std::size_t used = 0;
    Scalar value = 0;
    try {
      value = std::stod(item, &used);
    } catch (const std::exception&) {
      throw InputError("kernel spec: cannot parse '" + item + "'");
    }
    if (used != item.size()) throw InputError("kernel spec: cannot parse '" + item + "'");
    params.push_back(value);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  if (family == KernelFamily::matern) {
    if (params.size() != 2) throw InputError("matern kernel needs nu,rho");
    return matern(params[0], params[1]);
  }
  if (params.size() != 1) throw InputError(std::string(to_string(family)) + " kernel needs rho");
  return family == KernelFamily::exponential ? exponential(params[0]) : gaussian(params[0]);
}

std::string KernelModel::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << to_string(family_) << ':';
  if (family_ == KernelFamily::matern) os << nu_ << ',';
  os << rho_;
  return os.str();
}

Vector KernelModel::theta() const {
  if (family_ == KernelFamily::matern) return Vector{{nu_, rho_}};
  return Vector{{rho_}};
}

KernelModel KernelModel::with_theta(const Vector& theta) const {
  if (family_ == KernelFamily::matern) {
    if (theta.size() != 2) throw InputError("matern theta has two entries");
    return matern(theta[0], theta[1]);
  }
  if (theta.size() != 1) throw InputError("theta has one entry for this family");
  return KernelModel(family_, nu_, theta[0]);
}

Scalar KernelModel::operator()(Scalar r) const {
  if (!(r >= 0.0) || !std::isfinite(r)) throw InputError("kernel: distance must be finite and non-negative");
  if (r == 0.0) return 1.0;
  const Scalar x = scale_ * r;
  if (family_ == KernelFamily::gaussian) return std::exp(-0.5 * x * x);
  switch (path_) {
    case Path::half: return std::exp(-x);
    case Path::three_halves: return (1.0 + x) * std::exp(-x);
    case Path::five_halves: return (1.0 + x + x * x / 3.0) * std::exp(-x);
    case Path::general: break;
  }
  if (x > 745.0) return 0.0;
  return std::exp(log_norm_ + nu_ * std::log(x) - x) * special::bessel_k_scaled(nu_, x);
}

Scalar KernelModel::derivative(Scalar r) const {
  if (!(r >= 0.0) || !std::isfinite(r)) throw InputError("kernel: distance must be finite and non-negative");
  const Scalar x = scale_ * r;
  if (family_ == KernelFamily::gaussian) return -scale_ * x * std::exp(-0.5 * x * x);
  switch (path_) {
    case Path::half: return -scale_ * std::exp(-x);
    case Path::three_halves: return -scale_ * x * std::exp(-x);
    case Path::five_halves: return -scale_ * x * (1.0 + x) / 3.0 * std::exp(-x);
    case Path::general: break;
  }
  if (r == 0.0) {
    if (nu_ > 0.5) return 0.0;
    return -std::numeric_limits<Scalar>::infinity();
  }
  if (x > 745.0) return 0.0;
  // (x^nu K_nu)' = -x^nu K_{nu-1}
  return -scale_ * std::exp(log_norm_ + nu_ * std::log(x) - x) *
         special::bessel_k_scaled(std::abs(nu_ - 1.0), x);
}

CovarianceFunction CovarianceFunction::accelerated(const KernelModel& kernel, Scalar tol) {
  if (kernel.has_closed_form()) return CovarianceFunction(kernel);
  return CovarianceFunction(kernel, std::make_shared<SplineInterpolant>(kernel, tol));
}

void kernel_block(const CovarianceFunction& phi, const Eigen::Ref<const Matrix>& x,
                  const Eigen::Ref<const Matrix>& y, Eigen::Ref<Matrix> out) {
  const Index d = x.rows();
  if (y.rows() != d || out.rows() != x.cols() || out.cols() != y.cols()) {
    throw InputError("kernel_block: shape mismatch");
  }
  for (Index b = 0; b < y.cols(); ++b) {
    for (Index a = 0; a < x.cols(); ++a) {
      Scalar r2 = 0.0;
      for (Index k = 0; k < d; ++k) {
        const Scalar diff = x(k, a) - y(k, b);
        r2 += diff * diff;
      }
      out(a, b) = phi(std::sqrt(r2));
    }
  }
}

Matrix kernel_matrix(const CovarianceFunction& phi, const Eigen::Ref<const Matrix>& x,
                     const Eigen::Ref<const Matrix>& y) {
  Matrix out(x.cols(), y.cols());
  kernel_block(phi, x, y, out);
  return out;
}

Vector cross_covariance(const KernelModel& kernel, const Eigen::Ref<const Matrix>& locations,
                        const Eigen::Ref<const Vector>& s0) {
  if (s0.size() != locations.rows()) throw InputError("cross_covariance: dimension mismatch");
  if (!s0.allFinite()) throw InputError("cross_covariance: target must be finite");
  Vector c(locations.cols());
  for (Index i = 0; i < locations.cols(); ++i) c[i] = kernel((locations.col(i) - s0).norm());
  return c;
}

}  // namespace mlkrig
