#include "mlkrig/special.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace mlkrig::special {

namespace {

constexpr Scalar kEps = std::numeric_limits<Scalar>::epsilon();
constexpr int kMaxTerms = 10000;

// Taylor coefficients of 1/Gamma(1+z) = sum_k c[k] z^k.
constexpr std::array<Scalar, 29> kRecipGamma1p = {
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
    1.4123806553180317816e-18,
    -2.2987456844353702066e-19,
};

// K_mu and K_{mu+1} for |mu| <= 1/2, 0 < x < 2, unscaled.
BesselKPair temme_series(Scalar mu, Scalar x) {
  const Scalar half_x = 0.5 * x;
  const Scalar pimu = std::numbers::pi * mu;
  const Scalar fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
  Scalar d = -std::log(half_x);
  Scalar e = mu * d;
  const Scalar fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
  const TemmeGammas g = temme_gammas(mu);

  Scalar ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
  Scalar sum = ff;
  e = std::exp(e);
  Scalar p = 0.5 * e / g.gampl;
  Scalar q = 0.5 / (e * g.gammi);
  Scalar c = 1.0;
  d = half_x * half_x;
  Scalar sum1 = p;
  for (int i = 1; i <= kMaxTerms; ++i) {
    const Scalar fi = i;
    ff = (fi * ff + p + q) / (fi * fi - mu * mu);
    c *= d / fi;
    p /= fi - mu;
    q /= fi + mu;
    const Scalar del = c * ff;
    sum += del;
    sum1 += c * (p - fi * ff);
    if (std::abs(del) < std::abs(sum) * kEps) {
      return {sum, sum1 * 2.0 / x};
    }
  }
  throw NumericalError("bessel_k: Temme series did not converge");
}

// exp(x) K_mu and exp(x) K_{mu+1} for |mu| <= 1/2, x >= 2.
BesselKPair steed_fraction(Scalar mu, Scalar x) {
  Scalar b = 2.0 * (1.0 + x);
  Scalar d = 1.0 / b;
  Scalar h = d;
  Scalar delh = d;
  Scalar q1 = 0.0;
  Scalar q2 = 1.0;
  const Scalar a1 = 0.25 - mu * mu;
  Scalar q = a1;
  Scalar c = a1;
  Scalar a = -a1;
  Scalar s = 1.0 + q * delh;
  int i = 2;
  for (; i <= kMaxTerms; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / i;
    const Scalar qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const Scalar dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) break;
  }
  if (i > kMaxTerms) throw NumericalError("bessel_k: continued fraction did not converge");
  const Scalar k_mu = std::sqrt(std::numbers::pi / (2.0 * x)) / s;
  const Scalar k_mu1 = k_mu * (mu + x + 0.5 - a1 * h) / x;
  return {k_mu, k_mu1};
}

}  // namespace

TemmeGammas temme_gammas(Scalar mu) {
  // Odd coefficients give the antisymmetric part, even ones the symmetric part.
  Scalar odd = 0.0;
  Scalar even = 0.0;
  Scalar pw = 1.0;
  for (std::size_t k = 0; k < kRecipGamma1p.size(); ++k) {
    if (k % 2 == 0) {
      even += kRecipGamma1p[k] * pw;
    } else {
      odd += kRecipGamma1p[k] * pw;
      pw *= mu * mu;
    }
  }
  // even = sum c_{2j} mu^{2j}; odd = sum c_{2j+1} mu^{2j}
  TemmeGammas g;
  g.gam1 = -odd;
  g.gam2 = even;
  g.gampl = even + mu * odd;
  g.gammi = even - mu * odd;
  return g;
}

BesselKPair bessel_k_pair(Scalar nu, Scalar x, bool scaled) {
  if (!(x > 0.0) || !std::isfinite(x)) throw InputError("bessel_k: argument must be positive and finite");
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw InputError("bessel_k: order must be non-negative");

  const int nl = static_cast<int>(nu + 0.5);
  const Scalar mu = nu - nl;
  BesselKPair base;
  if (x < 2.0) {
    base = temme_series(mu, x);
    if (scaled) {
      const Scalar ex = std::exp(x);
      base.k_nu *= ex;
      base.k_nu1 *= ex;
    }
  } else {
    base = steed_fraction(mu, x);
    if (!scaled) {
      const Scalar ex = std::exp(-x);
      base.k_nu *= ex;
      base.k_nu1 *= ex;
    }
  }
  Scalar k0 = base.k_nu;
  Scalar k1 = base.k_nu1;
  for (int i = 1; i <= nl; ++i) {
    const Scalar k2 = 2.0 * (mu + i) / x * k1 + k0;
    k0 = k1;
    k1 = k2;
  }
  return {k0, k1};
}

Scalar bessel_k(Scalar nu, Scalar x) { return bessel_k_pair(std::abs(nu), x, false).k_nu; }

Scalar bessel_k_scaled(Scalar nu, Scalar x) { return bessel_k_pair(std::abs(nu), x, true).k_nu; }

}  // namespace mlkrig::special
