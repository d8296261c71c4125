"""Quadrature over balls with the weight ``(r^2 - |x - c|^2)^α``.

The radial factor is handled by a Gauss rule for the weight
``(1 - t^2)^α t^{n-1}`` on ``[0, 1]``: substituting ``s = t^2`` turns it into
the Jacobi weight ``(1 - s)^α s^{n/2 - 1}``, so Gauss-Jacobi nodes in ``s``
give positive weights for any real ``α >= 0``.  Angular rules are
antipodally symmetric, which makes the angular average of any integrand an
even function of ``t`` and keeps the ``s = t^2`` substitution spectral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import roots_jacobi, roots_legendre
from scipy.stats import qmc

DEFAULT_RADIAL_ORDER = 64
DEFAULT_ANGULAR_ORDER = {2: 128, 3: 64}


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere ``S^{n-1}``."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def weighted_ball_volume(n: int, r: float, alpha: float) -> float:
    """Closed form of ``∫_{B_r} (r^2 - |x|^2)^α dx``."""
    return sphere_area(n) / 2 * r ** (n + 2 * alpha) * beta_fn(n / 2, alpha + 1)


def radial_rule(n: int, alpha: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``t_i`` and weights for ``∫_0^1 g(t) (1 - t^2)^α t^{n-1} dt``.

    Exact when ``g`` is a polynomial in ``t^2`` of degree below ``2 order``.
    """
    if alpha < 0:
        raise ValueError("weight exponent must be nonnegative")
    b = n / 2 - 1
    x, w = roots_jacobi(order, alpha, b)
    s = (1 + x) / 2
    # ∫_0^1 f(s)(1-s)^α s^b ds = 2^{-α-b-1} ∫_{-1}^1 f((1+x)/2)(1-x)^α(1+x)^b dx,
    # and dt t^{n-1} (1-t^2)^α = ½ (1-s)^α s^b ds
    w = w * 2.0 ** (-alpha - b - 1) / 2
    return np.sqrt(s), w


def angular_rule(n: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit directions and weights summing to the area of ``S^{n-1}``.

    ``n = 2``: ``order`` equispaced angles (order even).  ``n = 3``:
    Gauss-Legendre in ``cos θ`` with ``order // 2`` nodes times ``order``
    equispaced azimuths.
    """
    if order % 2:
        raise ValueError("angular order must be even for antipodal symmetry")
    if n == 2:
        th = 2 * math.pi * np.arange(order) / order
        dirs = np.column_stack([np.cos(th), np.sin(th)])
        return dirs, np.full(order, 2 * math.pi / order)
    if n == 3:
        mu, wmu = roots_legendre(order // 2)
        ph = 2 * math.pi * np.arange(order) / order
        M, P = np.meshgrid(mu, ph, indexing="ij")
        st = np.sqrt(1 - M**2)
        dirs = np.column_stack([(st * np.cos(P)).ravel(), (st * np.sin(P)).ravel(), M.ravel()])
        w = np.outer(wmu, np.full(order, 2 * math.pi / order)).ravel()
        return dirs, w
    raise ValueError(f"unsupported dimension {n}")


@dataclass(frozen=True, eq=False)
class BallQuadrature:
    dimension: int
    alpha: float
    radial_order: int
    angular_order: int
    radial_nodes: np.ndarray = field(repr=False)
    radial_weights: np.ndarray = field(repr=False)
    directions: np.ndarray = field(repr=False)
    angular_weights: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)  # reference nodes in B_1
    weights: np.ndarray = field(repr=False)

    def refined(self) -> "BallQuadrature":
        """The same rule at doubled radial and angular orders."""
        return ball_rule(self.dimension, self.alpha, 2 * self.radial_order, 2 * self.angular_order)

    def with_alpha(self, alpha: float) -> "BallQuadrature":
        return ball_rule(self.dimension, alpha, self.radial_order, self.angular_order)


@lru_cache(maxsize=256)
def ball_rule(n: int, alpha: float = 0.0, radial_order: int = DEFAULT_RADIAL_ORDER,
              angular_order: int | None = None) -> BallQuadrature:
    if angular_order is None:
        angular_order = DEFAULT_ANGULAR_ORDER[n]
    if radial_order < 1 or angular_order < 2:
        raise ValueError("quadrature orders too small")
    t, wt = radial_rule(n, float(alpha), radial_order)
    dirs, wa = angular_rule(n, angular_order)
    pts = (t[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    w = np.outer(wt, wa).ravel()
    for a in (t, wt, dirs, wa, pts, w):
        a.setflags(write=False)
    return BallQuadrature(n, float(alpha), radial_order, angular_order, t, wt, dirs, wa, pts, w)


def weighted_ball_integral(f, center, r: float, alpha: float = 0.0,
                           rule: BallQuadrature | None = None, domain=None) -> float:
    """``∫_{B_r(c)} f(x) (r^2 - |x - c|^2)^α dx`` by the ball rule.

    ``f`` maps an ``(N, n)`` array of points to ``N`` values.  ``domain``, if
    given, is any object with ``admits(center, r)``.  With radial order
    ``q`` the error on smooth integrands decays spectrally in ``q``.
    """
    if alpha < 0:
        raise ValueError("weight exponent must be nonnegative")
    if r <= 0:
        raise ValueError("radius must be positive")
    c = np.asarray(center, dtype=float)
    n = c.shape[0]
    if rule is None:
        rule = ball_rule(n, alpha)
    elif rule.dimension != n or rule.alpha != alpha:
        rule = rule.with_alpha(alpha)
    if domain is not None and not domain.admits(c, r):
        from .field import DomainError

        raise DomainError(f"ball B_{r:g}({c.tolist()}) leaves the domain")
    vals = np.asarray(f(c + r * rule.points), dtype=float)
    return r ** (n + 2 * alpha) * float(vals @ rule.weights)


def radial_profile(f, center, radii, alpha: float = 0.0, rule: BallQuadrature | None = None,
                   domain=None) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly increasing")
    return np.array([weighted_ball_integral(f, center, r, alpha, rule, domain) for r in radii])


def sphere_points(n: int, count: int) -> np.ndarray:
    """Deterministic, nearly uniform points on ``S^{n-1}``.

    Equispaced angles starting at ``θ = 0`` for the circle, a Fibonacci
    lattice for the sphere.
    """
    if n == 2:
        th = 2 * math.pi * np.arange(count) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    if n == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        phi = math.pi * (3 - math.sqrt(5)) * i
        s = np.sqrt(1 - z * z)
        return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    raise ValueError(f"unsupported dimension {n}")


@lru_cache(maxsize=64)
def ball_samples(n: int, budget: int, seed: int = 0) -> np.ndarray:
    """Low-discrepancy sample of the closed unit ball.

    The center, ``budget // 4`` boundary points from :func:`sphere_points`,
    and the remaining points from the unscrambled Halton sequence (skipping
    its first ``seed + 1`` terms) mapped to the ball by the equal-volume
    polar map.
    """
    n_b = max(budget // 4, 8)
    n_i = max(budget - n_b - 1, 1)
    h = qmc.Halton(d=n, scramble=False)
    h.fast_forward(int(seed) + 1)
    u = h.random(n_i)
    if n == 2:
        rho = np.sqrt(u[:, 0])
        th = 2 * math.pi * u[:, 1]
        inner = np.column_stack([rho * np.cos(th), rho * np.sin(th)])
    else:
        rho = np.cbrt(u[:, 0])
        z = 1 - 2 * u[:, 1]
        s = np.sqrt(1 - z * z)
        ph = 2 * math.pi * u[:, 2]
        inner = rho[:, None] * np.column_stack([s * np.cos(ph), s * np.sin(ph), z])
    pts = np.vstack([np.zeros((1, n)), sphere_points(n, n_b), inner])
    pts.setflags(write=False)
    return pts


def sup_norm_on_ball(f, center, r: float, sample_budget: int = 4096, seed: int = 0) -> float:
    """Max of ``|f|`` over a low-discrepancy sample of the closed ball.

    This is a lower bound for the true sup-norm; the sample includes the
    boundary sphere, where sup-norms of harmonic functions are attained.
    """
    if sample_budget < 1000:
        raise ValueError("sample_budget must be at least 1000")
    c = np.asarray(center, dtype=float)
    pts = c + r * ball_samples(c.shape[0], sample_budget, seed)
    return float(np.max(np.abs(f(pts))))


def sup_point_on_ball(f, center, r: float, sample_budget: int = 4096, seed: int = 0):
    """``(sup, argmax)`` over the same sample as :func:`sup_norm_on_ball`."""
    c = np.asarray(center, dtype=float)
    pts = c + r * ball_samples(c.shape[0], sample_budget, seed)
    vals = np.abs(f(pts))
    i = int(np.argmax(vals))
    return float(vals[i]), pts[i]
