"""Polyharmonic equations as a second-order system, stacked frequency and doubling.

``(-Δ)^m u = V̄ u`` is rewritten as ``u_1 = u``, ``u_{i+1} = -Δ u_i`` and
``-Δ u_m = V̄ u_1``.  Components come from the analytic iterated
Laplacians of the catalog; grid fields only support ``m = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quad
from .field import FieldEvaluator, PotentialSpec
from .frequency import (
    FrequencyProfile,
    MonotonicityReport,
    MONOTONE_TOL,
    VanishingError,
    _increments,
    _rule,
    apply_guard,
    compute_H,
    compute_I_definition,
)

CLOSURE_TOL = 1e-9
BISECTION_MAX = 64.0


class ClosureError(ValueError):
    """The last equation of the system fails: u is not a solution for (V̄, m)."""


@dataclass(frozen=True, eq=False)
class SystemStack:
    order: int
    components: tuple
    potential: PotentialSpec
    v: float
    closure_residual: float

    @property
    def dimension(self) -> int:
        return self.components[0].dimension

    @property
    def source(self) -> FieldEvaluator:
        return self.components[0]

    def admits(self, center, r) -> bool:
        return all(c.admits(center, r) for c in self.components)


def decompose(u: FieldEvaluator, m: int, Vbar: PotentialSpec, *, tol: float = CLOSURE_TOL,
              sample_budget: int = 1000, seed: int = 0) -> SystemStack:
    """Split ``(-Δ)^m u = V̄ u`` into ``m`` components and verify the closure."""
    if m < 1:
        raise ValueError("order m must be at least 1")
    comps = tuple(u.power(j) for j in range(m))
    radius = min(1.0, getattr(u, "domain_radius", 1.0))
    if hasattr(u, "box"):
        lo, hi = u.box
        radius = min(radius, 0.5 * float(np.min(hi - lo)) - 4 * u.h)
    pts = radius * quad.ball_samples(u.dimension, sample_budget, seed)
    vu = Vbar.eval(pts) * u.eval(pts)
    top = u.laplacian_power(pts, m)
    res = float(np.max(np.abs(top - vu)) / max(np.max(np.abs(vu)), 1.0))
    if res > tol:
        raise ClosureError(f"closure residual {res:.3e} exceeds {tol:.1e}")
    return SystemStack(m, comps, Vbar, Vbar.sup_norm + 1.0, res)


def stacked_H(stack: SystemStack, center, r: float, alpha: float = 0.0, orders=None) -> float:
    """``Σ_i ∫ u_i^2 (r^2 - |x - c|^2)^α``."""
    return sum(compute_H(c, center, r, alpha, orders) for c in stack.components)


def component_masses(stack: SystemStack, center, r: float, orders=None) -> list[float]:
    return [compute_H(c, center, r, 0.0, orders) for c in stack.components]


def stacked_I(stack: SystemStack, center, r: float, alpha: float = 0.0, orders=None
              ) -> tuple[float, float]:
    """Definition form and integration-by-parts form of the stacked ``I``.

    Parts form: ``Σ∫|∇u_i|^2 w^{α+1} - Σ_{i<m}∫u_{i+1} u_i w^{α+1} - ∫V̄ u_m u_1 w^{α+1}``.
    """
    definition = sum(compute_I_definition(c, center, r, alpha, orders) for c in stack.components)
    comps = stack.components
    c0 = np.asarray(center, dtype=float)
    for c in comps:
        c.require_ball(c0, r)
    rule = _rule(stack.dimension, alpha + 1, orders)

    def f(x):
        vals = [c.eval(x) for c in comps]
        g = sum(np.sum(c.grad(x) ** 2, axis=1) for c in comps)
        cross = sum(vals[i + 1] * vals[i] for i in range(len(comps) - 1))
        return g - cross - stack.potential.eval(x) * vals[-1] * vals[0]

    parts = quad.weighted_ball_integral(f, c0, r, alpha + 1, rule)
    return definition, parts


def stacked_profile(stack: SystemStack, center, radii, alpha: float = 0.0, *, orders=None,
                    self_check: bool = False) -> FrequencyProfile:
    radii = np.asarray(radii, dtype=float)
    H = np.array([stacked_H(stack, center, r, alpha, orders) for r in radii])
    both = np.array([stacked_I(stack, center, r, alpha, orders) for r in radii])
    comp = np.array([component_masses(stack, center, r, orders) for r in radii]).T
    h = comp.sum(axis=0) if stack.order > 1 else comp[0]
    keep, dropped = apply_guard(radii, H)
    N = np.full(len(radii), np.nan)
    N[keep] = both[keep, 0] / H[keep]
    N_err = None
    if self_check:
        rule = _rule(stack.dimension, alpha, orders).refined()
        fine = (rule.radial_order, rule.angular_order)
        H2 = np.array([stacked_H(stack, center, r, alpha, fine) for r in radii])
        I2 = np.array([
            sum(compute_I_definition(c, center, r, alpha, fine) for c in stack.components)
            for r in radii
        ])
        N_err = np.full(len(radii), np.nan)
        N_err[keep] = np.abs(I2[keep] / H2[keep] - N[keep])
    return FrequencyProfile(
        alpha=float(alpha), radii=radii, H=H, I_def=both[:, 0], I_parts=both[:, 1], N=N, h=h,
        dimension=stack.dimension, N_error=N_err, dropped=dropped, component_h=comp,
    )


def minimal_growth_constant(radii, base, *, tol: float = MONOTONE_TOL,
                            upper: float = BISECTION_MAX, iterations: int = 80):
    """Smallest ``C`` in ``[0, upper]`` making ``exp(C r) base(r)`` nondecreasing.

    Bisection on the predicate "min increment >= -tol".  Returns
    ``(C, satisfiable, converged)``; ``C`` is ``inf`` when even ``upper``
    fails.
    """
    r = np.asarray(radii, dtype=float)
    b = np.asarray(base, dtype=float)

    def ok(C):
        return float(np.min(np.diff(np.exp(C * r) * b))) >= -tol

    if ok(0.0):
        return 0.0, True, True
    if not ok(upper):
        return math.inf, False, False
    lo, hi = 0.0, upper
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * upper:
            break
    return hi, True, hi - lo <= 1e-9 * upper


def _growth_report(label, profile, shift, C, tol):
    ok = profile.valid
    if ok.sum() < 2:
        raise VanishingError("H guard fails at every radius")
    r = profile.radii[ok]
    base = profile.N[ok] + shift
    total_tol = tol
    if profile.N_error is not None:
        total_tol += float(np.nanmax(profile.N_error[ok]))
    c_min, sat, conv = minimal_growth_constant(r, base, tol=total_tol)
    C_used = c_min if C is None else C
    q = np.exp((C_used if math.isfinite(C_used) else 0.0) * r) * base
    dmin, at = _increments(r, q)
    return MonotonicityReport(
        label=label, radii=r, quantity=q, constant=float(C_used), min_increment=dmin,
        argmin_radius=at, tolerance=total_tol, passed=sat and dmin >= -total_tol,
        minimal_constant=c_min, satisfiable=sat, converged=conv,
        extra={"shift": shift},
    )


def check_monotonicity_polyharmonic(stack_or_profile, radii=None, alpha: float = 0.0,
                                    C: float | None = None, *, v: float | None = None,
                                    tol: float = MONOTONE_TOL) -> MonotonicityReport:
    """``exp(C r)(N(r) + α v + v^2)`` nondecreasing, with ``v = ||V̄||_∞ + 1``.

    Accepts a :class:`SystemStack` (a profile is computed on ``radii``) or a
    ready profile together with ``v``.  ``C = None`` uses the calibrated
    minimal constant.
    """
    if isinstance(stack_or_profile, SystemStack):
        stack = stack_or_profile
        v = stack.v
        profile = stacked_profile(stack, np.zeros(stack.dimension), radii, alpha)
    else:
        profile = stack_or_profile
        alpha = profile.alpha
        if v is None:
            raise ValueError("v required with a bare profile")
    return _growth_report("exp(Cr)(N + a v + v^2)", profile, alpha * v + v * v, C, tol)


def check_monotonicity_ucp(stack_or_profile, radii=None, C: float | None = None, *,
                           v: float | None = None, tol: float = MONOTONE_TOL
                           ) -> MonotonicityReport:
    """Unweighted (``α = 0``) variant: ``exp(C r)(N(r) + v^2)`` nondecreasing."""
    if isinstance(stack_or_profile, SystemStack):
        stack = stack_or_profile
        v = stack.v
        profile = stacked_profile(stack, np.zeros(stack.dimension), radii, 0.0)
    else:
        profile = stack_or_profile
        if profile.alpha != 0:
            raise ValueError("the unweighted variant needs alpha = 0")
        if v is None:
            raise ValueError("v required with a bare profile")
    return _growth_report("exp(Cr)(N + v^2)", profile, v * v, C, tol)


@dataclass
class DoublingReport:
    R: float
    h_R: float
    h_2R: float
    ratio: float
    implied_constant: float  # ratio * R^{4m}
    order: int


def doubling_check(obj, center, R: float, m: int, orders=None) -> DoublingReport:
    """``∫_{B_2R} u^2 <= C R^{-4m} ∫_{B_R} u^2``: measured ratio and implied ``C``."""
    u = obj.source if isinstance(obj, SystemStack) else obj
    u.require_ball(center, 2 * R)
    hR = compute_H(u, center, R, 0.0, orders)
    h2R = compute_H(u, center, 2 * R, 0.0, orders)
    if not (hR > 0 and hR >= 1e-14 * h2R):
        raise VanishingError(f"h({R:g}) = {hR:.3e} is below the guard")
    ratio = h2R / hR
    return DoublingReport(R, hR, h2R, ratio, ratio * R ** (4 * m), m)


@dataclass
class AprioriReport:
    sigma: float
    R: float
    sup_inner: float
    rhs: float
    implied_constant: float


def apriori_ratio(stack: SystemStack, sigma: float = 0.5, R: float = 0.5,
                  sample_budget: int = 4096, seed: int = 0) -> AprioriReport:
    """Measured ratio for the interior a-priori estimate of ``(-Δ)^m u = g``.

    The Sobolev norm on the inner ball is replaced by the sampled sup-norm
    on ``B_{σR}``; the right side is
    ``(R^{2m} ||g||_{L^2(B_R)} + ||u||_{L^2(B_R)}) / ((1-σ)^{2m} R^{2m})``
    with ``g = V̄ u``.  Only the implied constant is reported.
    """
    u, V, m = stack.source, stack.potential, stack.order
    c = np.zeros(u.dimension)
    sup_inner = quad.sup_norm_on_ball(u.eval, c, sigma * R, sample_budget, seed)

    def g2(x):
        val = V.eval(x) * u.eval(x)
        return val * val

    g_l2 = math.sqrt(quad.weighted_ball_integral(g2, c, R, 0.0, domain=u))
    u_l2 = math.sqrt(compute_H(u, c, R, 0.0))
    rhs = (R ** (2 * m) * g_l2 + u_l2) / ((1 - sigma) ** (2 * m) * R ** (2 * m))
    return AprioriReport(sigma, R, sup_inner, rhs, sup_inner / rhs if rhs > 0 else 0.0)
