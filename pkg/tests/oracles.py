"""Independent reference values: adaptive 1-D quadrature of Bessel profiles.

Separated-variable fields ``J_k(√λ ρ) cos(kθ)`` reduce every ball integral
to a radial integral times an angular constant, which ``scipy.integrate.quad``
evaluates with ``scipy.special.jv``.  Nothing here touches the package's
quadrature rules or its Bessel series.
"""

import math

from scipy import integrate, special


def _angular(k):
    return 2 * math.pi if k == 0 else math.pi


def bessel_H(k, lam, r, alpha):
    a = math.sqrt(lam)
    f = lambda p: special.jv(k, a * p) ** 2 * (r * r - p * p) ** alpha * p
    return _angular(k) * integrate.quad(f, 0, r, epsabs=0, epsrel=1e-13, limit=200)[0]


def bessel_I(k, lam, r, alpha):
    """``2(α+1) ∫ (x·∇u) u w^α`` with ``x·∇u = ρ ∂_ρ u``."""
    a = math.sqrt(lam)
    f = lambda p: p * a * special.jvp(k, a * p) * special.jv(k, a * p) * (r * r - p * p) ** alpha * p
    return 2 * (alpha + 1) * _angular(k) * integrate.quad(f, 0, r, epsabs=0, epsrel=1e-13,
                                                          limit=200)[0]


def bessel_N(k, lam, r, alpha):
    return bessel_I(k, lam, r, alpha) / bessel_H(k, lam, r, alpha)


def doubling_ratio(k, lam, R):
    return bessel_H(k, lam, 2 * R, 0) / bessel_H(k, lam, R, 0)


def l2_schrodinger_C(k, lam, radii):
    """Calibrated constant of the weighted-mass three-ball inequality."""
    r1, r2, r3 = radii
    h = [bessel_H(k, lam, r, 0) for r in radii]
    a, b = math.log(r3 / (2 * r2)), math.log(2 * r2 / r1)
    gap = math.log(h[1]) - (a * math.log(h[0]) + b * math.log(h[2])) / (a + b)
    return max(0.0, gap / math.sqrt(lam)), gap
