"""Weighted frequency function ``N = I/H`` for solutions of ``Δu = V u``."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import quad
from .field import FieldEvaluator, PotentialSpec

# H is a quadrature of u^2 >= 0 and carries no cancellation, so the default
# guard only drops radii where H has underflowed; GUARD_REL is the optional
# stricter guard relative to H at the largest radius.
GUARD_ABS = 1e-280
GUARD_REL = 1e-14
DERIVATIVE_STEP = 1e-3
MONOTONE_TOL = 1e-6


class PDEResidualError(ValueError):
    """The field does not solve the equation the identity relies on."""


class VanishingError(ValueError):
    """H falls below the guard on every requested radius."""


def _rule(n, alpha, orders):
    if orders is None:
        return quad.ball_rule(n, alpha)
    return quad.ball_rule(n, alpha, *orders)


def radial_derivative(p, center) -> callable:
    c = np.asarray(center, dtype=float)

    def f(x):
        return np.einsum("ij,ij->i", x - c, p.grad(x))

    return f


def compute_H(u: FieldEvaluator, center, r: float, alpha: float = 0.0, orders=None) -> float:
    """``∫_{B_r(c)} u^2 (r^2 - |x - c|^2)^α dx``."""
    rule = _rule(u.dimension, alpha, orders)

    def f(x):
        v = u.eval(x)
        return v * v

    return quad.weighted_ball_integral(f, center, r, alpha, rule, domain=u)


def compute_I_definition(u: FieldEvaluator, center, r: float, alpha: float = 0.0,
                         orders=None) -> float:
    """``2(α+1) ∫ ((x - c)·∇u) u (r^2 - |x - c|^2)^α dx``."""
    rule = _rule(u.dimension, alpha, orders)
    xdu = radial_derivative(u, center)

    def f(x):
        return xdu(x) * u.eval(x)

    return 2 * (alpha + 1) * quad.weighted_ball_integral(f, center, r, alpha, rule, domain=u)


def pde_residual(u: FieldEvaluator, V: PotentialSpec, pts: np.ndarray) -> float:
    """``max |Δu - V u|`` at ``pts``, relative to ``max(max |V u|, 1)``."""
    vu = V.eval(pts) * u.eval(pts)
    lap = -u.laplacian_power(pts, 1)
    return float(np.max(np.abs(lap - vu)) / max(np.max(np.abs(vu)), 1.0))


def compute_I_parts(u: FieldEvaluator, V: PotentialSpec, center, r: float, alpha: float = 0.0,
                    orders=None, residual_tol: float = 1e-6) -> float:
    """``∫ |∇u|^2 w^{α+1} + ∫ V u^2 w^{α+1}`` with ``w = r^2 - |x - c|^2``.

    Equals :func:`compute_I_definition` by integration by parts when
    ``Δu = V u``; the equation is checked on the quadrature nodes first.
    """
    rule = _rule(u.dimension, alpha + 1, orders)
    c = np.asarray(center, dtype=float)
    u.require_ball(c, r)
    nodes = c + r * rule.points[:: max(len(rule.points) // 512, 1)]
    res = pde_residual(u, V, nodes)
    if res > residual_tol:
        raise PDEResidualError(f"PDE residual {res:.3e} exceeds {residual_tol:.1e} for {u.name}")

    def f(x):
        v = u.eval(x)
        return np.sum(u.grad(x) ** 2, axis=1) + V.eval(x) * v * v

    return quad.weighted_ball_integral(f, c, r, alpha + 1, rule)


def central_derivative(radii: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Sixth-order central differences on a uniform grid (NaN at the three end points).

    Falls back to second-order ``np.gradient`` on non-uniform grids.
    """
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    out = np.full(len(values), np.nan)
    if len(radii) < 7:
        return out
    step = np.diff(radii)
    h = step.mean()
    if np.max(np.abs(step - h)) > 1e-9 * h:
        warnings.warn("non-uniform radius grid: using second-order differences", stacklevel=2)
        return np.gradient(values, radii)
    c = np.array([-1, 9, -45, 0, 45, -9, 1]) / 60.0
    for i in range(3, len(values) - 3):
        out[i] = np.dot(c, values[i - 3 : i + 4]) / h
    return out


@dataclass
class FrequencyProfile:
    """Sampled ``H``, ``I``, ``N``, ``h`` and derivative diagnostics.

    ``N`` is NaN at radii dropped by the vanishing guard; ``dropped`` lists
    them.  ``N_error`` is the doubled-resolution difference when computed.
    """

    alpha: float
    radii: np.ndarray
    H: np.ndarray
    I_def: np.ndarray
    N: np.ndarray
    h: np.ndarray
    I_parts: np.ndarray | None = None
    dimension: int = 2
    dHdr: np.ndarray | None = None
    identity_residual: np.ndarray | None = None
    N_error: np.ndarray | None = None
    dropped: tuple = ()
    component_h: np.ndarray | None = None  # (m, len(radii)) for stacks

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        if self.dHdr is None and len(self.radii) >= 7 and np.all(np.isfinite(self.H)):
            self.dHdr = central_derivative(self.radii, self.H)
        if self.dHdr is not None and self.identity_residual is None:
            self.identity_residual = derivative_identity_residuals(self)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.N)

    def bridge_violations(self, rtol: float = 1e-10) -> int:
        """Count failures of ``H(r) <= r^{2α} h(r)`` and ``h(r) <= H(ρ)/(ρ^2-r^2)^α``."""
        a = self.alpha
        r = self.radii
        bad = int(np.sum(self.H > r ** (2 * a) * self.h * (1 + rtol)))
        for i in range(len(r)):
            rho = r[i + 1 :]
            if len(rho):
                bound = self.H[i + 1 :] / (rho**2 - r[i] ** 2) ** a
                bad += int(np.sum(self.h[i] > bound * (1 + rtol)))
        return bad

    def rows(self):
        cols = ["r", "H", "I_def", "I_parts", "N", "h", "dHdr", "identity_residual"]
        nan = np.full(len(self.radii), np.nan)
        data = [
            self.radii, self.H, self.I_def,
            nan if self.I_parts is None else self.I_parts,
            self.N, self.h,
            nan if self.dHdr is None else self.dHdr,
            nan if self.identity_residual is None else self.identity_residual,
        ]
        if self.component_h is not None:
            cols = cols[:6] + [f"h_{i + 1}" for i in range(len(self.component_h))]
            data = data[:6] + list(self.component_h)
        return cols, [list(row) for row in zip(*data)]


def apply_guard(radii, H, rel: float | None = None):
    H = np.asarray(H, dtype=float)
    keep = np.isfinite(H) & (H > GUARD_ABS)
    if rel is not None and len(H):
        keep &= H >= rel * np.max(np.abs(H))
    dropped = tuple(float(r) for r, k in zip(radii, keep) if not k)
    return keep, dropped


def derivative_identity_residuals(profile: FrequencyProfile) -> np.ndarray:
    r = profile.radii
    n, a = profile.dimension, profile.alpha
    rhs = (2 * a + n) / r * profile.H + profile.I_def / ((a + 1) * r)
    d = profile.dHdr
    with np.errstate(invalid="ignore", divide="ignore"):
        res = np.abs(d - rhs) / np.maximum(np.abs(d), 1e-300)
    res[~np.isfinite(profile.N)] = np.nan
    return res


def frequency_profile(u: FieldEvaluator, V: PotentialSpec | None, center, radii,
                      alpha: float = 0.0, *, orders=None, self_check: bool = False,
                      guard_rel: float | None = None) -> FrequencyProfile:
    """Evaluate ``H``, both ``I`` forms, ``N`` and ``h`` on a radius grid.

    ``guard_rel`` (e.g. ``GUARD_REL``) additionally drops radii where ``H``
    falls below that fraction of its largest value.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly increasing")
    H = np.array([compute_H(u, center, r, alpha, orders) for r in radii])
    I_def = np.array([compute_I_definition(u, center, r, alpha, orders) for r in radii])
    h = H if alpha == 0 else np.array([compute_H(u, center, r, 0.0, orders) for r in radii])
    I_parts = None
    if V is not None:
        I_parts = np.array([compute_I_parts(u, V, center, r, alpha, orders) for r in radii])
    keep, dropped = apply_guard(radii, H, guard_rel)
    N = np.full(len(radii), np.nan)
    N[keep] = I_def[keep] / H[keep]
    N_err = None
    if self_check:
        rule = _rule(u.dimension, alpha, orders).refined()
        fine = (rule.radial_order, rule.angular_order)
        H2 = np.array([compute_H(u, center, r, alpha, fine) for r in radii])
        I2 = np.array([compute_I_definition(u, center, r, alpha, fine) for r in radii])
        N_err = np.full(len(radii), np.nan)
        N_err[keep] = np.abs(I2[keep] / H2[keep] - N[keep])
    return FrequencyProfile(
        alpha=float(alpha), radii=radii, H=H, I_def=I_def, N=N, h=h, I_parts=I_parts,
        dimension=u.dimension, N_error=N_err, dropped=dropped,
    )


def check_derivative_identity(profile: FrequencyProfile, n: int | None = None) -> float:
    """Max relative residual of ``H' = ((2α+n)/r) H + I/((α+1) r)`` over the grid.

    ``H'`` comes from central differences of the sampled ``H``; radii
    dropped by the guard are skipped (an empty set gives 0).
    """
    if n is not None and n != profile.dimension:
        profile = FrequencyProfile(**{**profile.__dict__, "dimension": n, "identity_residual": None})
    res = profile.identity_residual
    if res is None:
        if not profile.valid.any():
            return 0.0
        raise ValueError("radius grid too short for central differences")
    finite = res[np.isfinite(res)]
    worst = float(finite.max()) if len(finite) else 0.0
    step = float(np.mean(np.diff(profile.radii))) if len(profile.radii) > 1 else 0.0
    if worst > 1e-6 and step > DERIVATIVE_STEP * (1 + 1e-9):
        warnings.warn(
            f"identity residual {worst:.2e} on a grid of step {step:.1e}: "
            f"re-run with radius step <= {DERIVATIVE_STEP:g}",
            stacklevel=2,
        )
    return worst


@dataclass
class MonotonicityReport:
    label: str
    radii: np.ndarray
    quantity: np.ndarray
    constant: float
    min_increment: float
    argmin_radius: float
    tolerance: float
    passed: bool
    minimal_constant: float
    satisfiable: bool = True
    converged: bool = True
    extra: dict = field(default_factory=dict)


def _error_estimate(profile: FrequencyProfile) -> float:
    if profile.N_error is None:
        return 0.0
    e = profile.N_error[np.isfinite(profile.N_error)]
    return float(e.max()) if len(e) else 0.0


def _increments(r, q):
    d = np.diff(q)
    i = int(np.argmin(d))
    return float(d[i]), float(r[i + 1])


def check_monotonicity_schrodinger(profile: FrequencyProfile, V: PotentialSpec,
                                   n: int | None = None, C: float | None = None,
                                   tol: float = MONOTONE_TOL) -> MonotonicityReport:
    """Check that ``N(r) + C ||V||_{W^{1,∞}} r^2`` is nondecreasing on the grid.

    ``C`` defaults to ``3n + 5``.  The tolerance adds the profile's
    doubled-resolution error estimate.  Also reports the smallest ``C``
    that would make the sampled sequence nondecreasing.
    """
    n = profile.dimension if n is None else n
    C = 3 * n + 5 if C is None else C
    ok = profile.valid
    if ok.sum() < 2:
        raise VanishingError("fewer than two radii pass the H guard")
    r, N = profile.radii[ok], profile.N[ok]
    norm = V.w1inf_norm
    q = N + C * norm * r**2
    dmin, at = _increments(r, q)
    total_tol = tol + _error_estimate(profile)
    drop = N[:-1] - N[1:]
    if norm > 0:
        need = drop / (norm * (r[1:] ** 2 - r[:-1] ** 2))
        c_min, sat = max(0.0, float(need.max())), True
    else:
        sat = bool(np.all(drop <= total_tol))
        c_min = 0.0 if sat else float("inf")
    return MonotonicityReport(
        label="N + C*||V||*r^2", radii=r, quantity=q, constant=float(C), min_increment=dmin,
        argmin_radius=at, tolerance=total_tol, passed=dmin >= -total_tol,
        minimal_constant=c_min, satisfiable=sat,
    )
