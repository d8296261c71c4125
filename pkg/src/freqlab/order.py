"""Vanishing orders from radial mass profiles and ball-chain lower bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quad
from .field import FieldEvaluator, FieldError, PotentialSpec
from .frequency import compute_H
from .polysystem import SystemStack
from .threeball import ThreeBallConfig, exponents

FIT_WINDOW = (1e-2, 1e-1)
MIN_SAMPLES = 8
INCONCLUSIVE_RESIDUAL = 0.1
CHAIN_RADIUS = 1 / 100
MASS_GUARD = 1e-280
NORMALIZATION = "sup_{|x|≤1}|u(x)| ≥ 1"


class OrderResolutionError(ValueError):
    """The radial mass is numerically zero across the fit window."""


class NormalizationError(ValueError):
    """The field violates the normalization hypothesis of the chain."""


@dataclass
class OrderEstimate:
    center: np.ndarray
    radii: np.ndarray
    h: np.ndarray
    slope: float
    order: float  # (slope - n) / 2
    fit_residual: float
    bound: float
    verdict: str  # "within bound" | "exceeds" | "inconclusive"


def estimate_vanishing_order(obj, center=None, window=FIT_WINDOW, samples: int = 12, *,
                             M: float = 1.0, C: float = 1.0, bound: str = "sqrt",
                             orders=None) -> OrderEstimate:
    """Least-squares slope of ``log h`` against ``log r`` on a geometric grid.

    ``bound="sqrt"`` compares the order with ``C √M``, ``bound="linear"``
    with ``C M``.  For stacks the first component is used.
    """
    u = obj.source if isinstance(obj, SystemStack) else obj
    n = u.dimension
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError("fit window must satisfy 0 < lo < hi")
    if samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} sample radii")
    u.require_ball(c, hi)
    radii = np.geomspace(lo, hi, samples)
    h = np.array([compute_H(u, c, r, 0.0, orders) for r in radii])
    if np.all(h <= MASS_GUARD):
        raise OrderResolutionError("numerically zero: order exceeds resolvable range")
    if np.any(h <= MASS_GUARD):
        raise OrderResolutionError("mass vanishes on part of the window; shrink the window")
    x, y = np.log(radii), np.log(h)
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(y - (slope * x + icpt))))
    k_hat = (slope - n) / 2
    limit = C * (math.sqrt(M) if bound == "sqrt" else M)
    if resid > INCONCLUSIVE_RESIDUAL:
        verdict = "inconclusive"
    else:
        verdict = "within bound" if k_hat <= limit else "exceeds"
    return OrderEstimate(c, radii, h, float(slope), float(k_hat), resid, limit, verdict)


@dataclass
class ChainStep:
    index: int
    center: np.ndarray
    ball_sup: float  # sampled sup over B_r(x_i)
    inner_sup: float  # over B_{r/2}(x_i)
    outer_sup: float  # over B_{3r}(x_i)
    log_prefactor: float  # exact fit of the three-ball step on the samples
    log_bound: float  # lower bound for log sup over B_{r/2}(x_i)


@dataclass
class ChainCertificate:
    radius: float
    r1: float
    target: np.ndarray
    steps: list
    outer_bound: float  # sup over the union of outer balls used for every step
    theta: float
    q: float | None
    q_formula: float | None
    log_bound: float
    measured: float  # sampled sup over B_{r1}(0)
    final_log_prefactor: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return len(self.steps) - 1

    @property
    def bound(self) -> float:
        return math.exp(self.log_bound) if self.log_bound > -745 else 0.0

    @property
    def valid(self) -> bool:
        return self.measured > 0 and math.log(self.measured) >= self.log_bound


def _step_prefactor(sup_mid, sup_in, sup_out, a, b):
    # smallest G with log sup_mid <= G + a log sup_in + b log sup_out
    return math.log(sup_mid) - a * math.log(sup_in) - b * math.log(sup_out)


def run_chain_certificate(u: FieldEvaluator, V: PotentialSpec | None, r1: float, target=None, *,
                          radius: float = CHAIN_RADIUS, sample_budget: int = 4096,
                          seed: int = 0) -> ChainCertificate:
    """Propagate smallness from the target back to ``B_{r1}(0)``.

    Each step uses the sup-norm three-ball inequality with radii
    ``(r/2, r, 3r)`` around ``x_i``; since ``|x_{i+1} - x_i| <= r/2`` the
    ball ``B_{r/2}(x_{i+1})`` lies inside ``B_r(x_i)``.  The inequality
    constant of every step is fitted exactly on the samples and the outer
    sup-norm is replaced by the global bound ``max_i sup B_{3r}(x_i)``, so the
    final value is a lower bound for the sampled sup over ``B_{r1}(0)``.
    """
    n = u.dimension
    origin = np.zeros(n)
    sup1 = quad.sup_norm_on_ball(u.eval, origin, 1.0, sample_budget, seed)
    if sup1 < 1.0 - 1e-12:
        raise NormalizationError(
            f"normalization hypothesis {NORMALIZATION} fails: sampled sup is {sup1:.6g}"
        )
    if target is None:
        # largest |u| on the unit sphere, where the chain has to start
        sphere = quad.sphere_points(n, max(sample_budget // 4, 8))
        target = sphere[int(np.argmax(np.abs(u.eval(sphere))))]
    target = np.asarray(target, dtype=float)
    dist = float(np.linalg.norm(target))
    if dist > 1 + 1e-12:
        raise ValueError("target must lie in the closed unit ball")
    step = radius / 2
    d = max(int(math.ceil(dist / step - 1e-12)), 0)
    centers = [target * (i / d) if d else origin.copy() for i in range(d + 1)]
    u.require_ball(target, 3 * radius)
    u.require_ball(origin, 3 * radius)

    a, b = exponents(ThreeBallConfig((radius / 2, radius, 3 * radius), "Linf_schrodinger"))
    theta, rest = a / (a + b), b / (a + b)
    sups = []
    for x in centers:
        s = [quad.sup_norm_on_ball(u.eval, x, rr, sample_budget, seed)
             for rr in (radius / 2, radius, 3 * radius)]
        sups.append(s)
    outer = max(max(s[2] for s in sups), sup1)
    steps = []
    # start: B_r(x_d) contains the target
    ell = math.log(abs(float(u.eval(target))))
    for i in range(d, -1, -1):
        s_in, s_mid, s_out = sups[i]
        G = _step_prefactor(s_mid, s_in, s_out, theta, rest)
        ell = (ell - G - rest * math.log(outer)) / theta
        steps.append(ChainStep(i, centers[i], s_mid, s_in, s_out, G, ell))
        # B_{r/2}(x_i) sits inside B_r(x_{i-1}); ell carries over unchanged
    steps.reverse()

    measured = quad.sup_norm_on_ball(u.eval, origin, r1, sample_budget, seed)
    q = q_formula = final_G = None
    log_bound = ell
    if r1 < radius / 2:
        cfg = ThreeBallConfig((r1, radius / 2, 3 * radius), "Linf_schrodinger")
        a1, b1 = exponents(cfg)
        q = b1 / a1
        q_formula = (math.log(7 / 3 * radius) - math.log(r1)) / math.log(9 / 7)
        w_in, w_out = a1 / (a1 + b1), b1 / (a1 + b1)
        s_half = sups[0][0]
        s_out = sups[0][2]
        final_G = _step_prefactor(s_half, measured, s_out, w_in, w_out)
        log_bound = (ell - final_G - w_out * math.log(outer)) / w_in
    return ChainCertificate(
        radius=radius, r1=r1, target=target, steps=steps, outer_bound=outer, theta=theta, q=q,
        q_formula=q_formula, log_bound=log_bound, measured=measured, final_log_prefactor=final_G,
        extra={"sup_unit_ball": sup1},
    )


@dataclass
class RescaleReport:
    R: float
    x0: np.ndarray
    order: int
    M: float  # R^{2m} ||V̄||
    identity_residual: float  # chain-rule route
    fd_residual: float  # one finite-difference Laplacian on the dilated field
    log_lower_bound: float  # log(C exp(-C R^{2m} log R)) at the given C
    C: float


def _fd_neg_laplacian(f, pts, step):
    n = pts.shape[1]
    out = np.zeros(len(pts))
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        out += (-f(pts + 2 * e) + 16 * f(pts + e) - 30 * f(pts) + 16 * f(pts - e)
                - f(pts - 2 * e)) / (12 * step * step)
    return -out


def corollary_rescaling(u: FieldEvaluator, Vbar: PotentialSpec, m: int, R: float, x0, *,
                        C: float = 1.0, sample_budget: int = 1000, seed: int = 0,
                        fd_step: float = 1e-3) -> RescaleReport:
    """Check ``(-Δ)^m u_R = R^{2m} V̄_R u_R`` for ``u_R(x) = u(R x + x0)`` on ``B_1``."""
    x0 = np.asarray(x0, dtype=float)
    uR = u.dilated(R, x0)
    if not uR.admits(np.zeros(u.dimension), 1.0):
        raise FieldError(f"domain too small for the dilation R={R:g} around {x0.tolist()}")
    pts = 0.9 * quad.ball_samples(u.dimension, sample_budget, seed)
    rhs = R ** (2 * m) * Vbar.eval(R * pts + x0) * uR.eval(pts)
    scale = max(float(np.max(np.abs(rhs))), 1.0)
    lhs = uR.laplacian_power(pts, m)
    ident = float(np.max(np.abs(lhs - rhs))) / scale
    lower = uR.power(m - 1)
    fd = _fd_neg_laplacian(lower.eval, pts, fd_step)
    fd_res = float(np.max(np.abs(fd - rhs))) / scale
    M = R ** (2 * m) * max(Vbar.sup_norm, 1.0)
    log_lb = math.log(C) - C * R ** (2 * m) * math.log(R) if C > 0 else -math.inf
    return RescaleReport(R, x0, m, M, ident, fd_res, log_lb, C)
