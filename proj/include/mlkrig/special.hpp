#ifndef MLKRIG_SPECIAL_HPP
#define MLKRIG_SPECIAL_HPP

#include "mlkrig/common.hpp"

namespace mlkrig::special {

/// Modified Bessel functions of the second kind at one argument.
struct BesselKPair {
  Scalar k_nu = 0;    // K_nu(x), or exp(x) K_nu(x) when scaled
  Scalar k_nu1 = 0;   // K_{nu+1}(x), same scaling
};

/// K_nu(x) and K_{nu+1}(x) for real nu >= 0 and x > 0, both multiplied by
/// exp(x) when `scaled` is set. Temme's series for x < 2, Steed's continued
/// fraction otherwise, then forward recurrence in the order.
BesselKPair bessel_k_pair(Scalar nu, Scalar x, bool scaled = false);

/// K_nu(x) for real nu (K_{-nu} = K_nu) and x > 0.
Scalar bessel_k(Scalar nu, Scalar x);

/// exp(x) K_nu(x).
Scalar bessel_k_scaled(Scalar nu, Scalar x);

/// 1 / Gamma(1 + mu) for |mu| <= 1/2 from its Taylor series; also returns
/// the two Temme auxiliary functions.
struct TemmeGammas {
  Scalar gam1 = 0;   // (1/G(1-mu) - 1/G(1+mu)) / (2 mu)
  Scalar gam2 = 0;   // (1/G(1-mu) + 1/G(1+mu)) / 2
  Scalar gampl = 0;  // 1/G(1+mu)
  Scalar gammi = 0;  // 1/G(1-mu)
};
TemmeGammas temme_gammas(Scalar mu);

}  // namespace mlkrig::special

#endif  // MLKRIG_SPECIAL_HPP
