"""Three-ball inequalities with exponents from closed formulas and calibrated constants.

All four variants compare a middle-ball quantity with a geometric
interpolation of inner- and outer-ball quantities::

    LHS <= prefactor(C) + w_in * log(inner) + w_out * log(outer)

in log form.  ``RHS0`` collects every term that does not involve the
existential constant ``C``; ``C_emp`` is the smallest ``C >= 0`` (or ``> 0``
where ``log C`` appears) for which the inequality holds on the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import wrightomega

from . import quad
from .field import FieldEvaluator, PotentialSpec
from .frequency import compute_H
from .polysystem import SystemStack

VARIANTS = ("L2_schrodinger", "Linf_schrodinger", "L2_polyharmonic", "Linf_polyharmonic")
GUARD = 1e-300


class HypothesisError(ValueError):
    """The radii triple violates the ordering the inequality needs."""


class GuardError(ValueError):
    """The inner-ball quantity vanishes numerically."""


@dataclass(frozen=True)
class ThreeBallConfig:
    radii: tuple[float, float, float]
    variant: str = "L2_schrodinger"
    M: float = 1.0
    alpha: float | None = None
    beta_factor: float = 1.0  # the undetermined C inside β for the polyharmonic variants

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        r1, r2, r3 = self.radii
        if self.variant == "Linf_polyharmonic":
            if not (0 < r1 < r2 < 4 * r2 < r3 < 1):
                raise HypothesisError(f"need 0 < r1 < r2 < 4 r2 < r3 < 1, got {self.radii}")
        elif not (0 < r1 < r2 < 2 * r2 < r3 < 1):
            raise HypothesisError(f"need 0 < r1 < r2 < 2 r2 < r3 < 1, got {self.radii}")
        if self.M < 1:
            raise ValueError("effective M must be at least 1")
        if self.beta_factor <= 0:
            raise ValueError("beta_factor must be positive")

    @property
    def polyharmonic(self) -> bool:
        return self.variant.endswith("polyharmonic")


def effective_M(V: PotentialSpec | None, variant: str) -> float:
    """``max(||V||_{W^{1,∞}}, 1)`` for Schrödinger variants, ``max(||V̄||_∞ + 1, 2)`` otherwise."""
    if V is None:
        return 1.0 if variant.endswith("schrodinger") else 2.0
    if variant.endswith("schrodinger"):
        return V.effective_m("w1inf")
    return max(V.sup_norm + 1.0, 2.0)


def exponents(config: ThreeBallConfig) -> tuple[float, float]:
    """Inner/outer exponent pair ``(α*, β*)`` of the variant.

    The interpolation weights are ``α*/(α*+β*)`` on the inner ball and
    ``β*/(α*+β*)`` on the outer ball.
    """
    r1, r2, r3 = config.radii
    v = config.variant
    if v in ("L2_schrodinger", "L2_polyharmonic"):
        a, b = math.log(r3 / (2 * r2)), math.log(2 * r2 / r1)
    elif v == "Linf_schrodinger":
        mid = 2 * (r2 + r3) / 3
        a, b = math.log(r3 / mid), math.log(mid / r1)
    else:
        a, b = math.log(3 * r3 / (2 * (2 * r2 + r3))), math.log((2 * r2 + r3) / (3 * r1))
    if config.polyharmonic:
        b *= config.beta_factor
    return a, b


def theta_schrodinger() -> float:
    """Interpolation exponent of the chain step with radii ``(r/2, r, 3r)``."""
    a, b = exponents(ThreeBallConfig((0.05, 0.1, 0.3), "Linf_schrodinger"))
    return a / (a + b)


def theta_polyharmonic(C: float = 1.0) -> float:
    """``log(9/8) / (log(9/8) + C log(16/3))`` for the chain step ``(r/2, r, 6r)``."""
    return math.log(9 / 8) / (math.log(9 / 8) + C * math.log(16 / 3))


@dataclass
class InequalityReport:
    variant: str
    radii: tuple
    M: float
    lhs: float  # log of middle quantity
    rhs0: float  # log RHS without the constant-dependent factor
    exponents: tuple[float, float]
    weights: tuple[float, float]
    reference_constant: float
    residual0: float  # RHS - LHS at reference_constant
    C_emp: float
    residual: float  # RHS - LHS at C_emp
    alpha: float | None = None
    extra: dict = field(default_factory=dict)

    def log_prefactor(self, C: float) -> float:
        return log_prefactor(self.variant, self.radii, self.M, C, self.exponents[0])


def log_prefactor(variant, radii, M, C, a) -> float:
    """Log of the constant-dependent factor of each variant."""
    r1, r2, r3 = radii
    if variant == "L2_schrodinger":
        return C * math.sqrt(M)
    if variant == "L2_polyharmonic":
        return C * M * (math.log(r3 / (2 * r2)) + 1)
    if C <= 0:
        return -math.inf
    if variant == "Linf_schrodinger":
        return math.log(C) + C * math.sqrt(M)
    return math.log(C) + C * M * (1 + a)


def calibrate(variant, radii, M, gap, a) -> float:
    """Smallest admissible ``C`` with ``log_prefactor(C) >= gap``."""
    r1, r2, r3 = radii
    if variant == "L2_schrodinger":
        return max(0.0, gap / math.sqrt(M))
    if variant == "L2_polyharmonic":
        return max(0.0, gap / (M * (math.log(r3 / (2 * r2)) + 1)))
    # log C + k C = gap  <=>  y + log y = gap + log k with y = k C
    k = math.sqrt(M) if variant == "Linf_schrodinger" else M * (1 + a)
    y = float(np.real(wrightomega(gap + math.log(k))))
    return y / k


def build_report(variant, radii, M, lhs, log_inner, log_outer, geometric, a, b, alpha=None,
                 extra=None) -> InequalityReport:
    wa, wb = a / (a + b), b / (a + b)
    rhs0 = geometric + wa * log_inner + wb * log_outer
    ref = 0.0 if variant.startswith("L2") else 1.0
    C_emp = calibrate(variant, radii, M, lhs - rhs0, a)
    return InequalityReport(
        variant=variant, radii=tuple(radii), M=M, lhs=lhs, rhs0=rhs0, exponents=(a, b),
        weights=(wa, wb), reference_constant=ref,
        residual0=rhs0 + log_prefactor(variant, radii, M, ref, a) - lhs,
        C_emp=C_emp, residual=rhs0 + log_prefactor(variant, radii, M, C_emp, a) - lhs,
        alpha=alpha, extra=extra or {},
    )


def _mass(obj, center, r, alpha=0.0):
    if isinstance(obj, SystemStack):
        return sum(compute_H(c, center, r, alpha) for c in obj.components)
    return compute_H(obj, center, r, alpha)


def _source(obj) -> FieldEvaluator:
    return obj.source if isinstance(obj, SystemStack) else obj


def check_L2_three_ball(obj, V: PotentialSpec | None, config: ThreeBallConfig,
                        center=None) -> InequalityReport:
    """Three-ball inequality for ``h(r) = ∫_{B_r} u^2`` (stacked for systems).

    The weighted masses at ``α = √M`` (Schrödinger) or ``α = v``
    (polyharmonic) are also computed to check the bridges
    ``H(r) <= r^{2α} h(r)`` and ``h(r) <= H(ρ)/(ρ^2 - r^2)^α`` on the triple.
    """
    r1, r2, r3 = config.radii
    u = _source(obj)
    c = np.zeros(u.dimension) if center is None else np.asarray(center, dtype=float)
    h = [_mass(obj, c, r) for r in config.radii]
    if h[0] <= GUARD:
        raise GuardError(f"h(r1) = {h[0]:.3e} vanishes numerically")
    a, b = exponents(config)
    if config.alpha is not None:
        alpha = config.alpha
    elif isinstance(obj, SystemStack):
        alpha = obj.v
    else:
        alpha = math.sqrt(config.M)
    Hw = [_mass(obj, c, r, alpha) for r in (r1, 2 * r2, r3)]
    bridges = (
        Hw[0] <= r1 ** (2 * alpha) * h[0] * (1 + 1e-10)
        and h[1] <= Hw[1] / ((2 * r2) ** 2 - r2**2) ** alpha * (1 + 1e-10)
        and h[1] <= Hw[2] / (r3**2 - r2**2) ** alpha * (1 + 1e-10)
    )
    logs = [math.log(x) for x in h]
    return build_report(
        config.variant, config.radii, config.M, logs[1], logs[0], logs[2], 0.0, a, b,
        alpha=alpha, extra={"h": h, "H_weighted": Hw, "bridges_hold": bool(bridges)},
    )


def check_Linf_three_ball(obj, V: PotentialSpec | None, config: ThreeBallConfig, center=None,
                          sample_budget: int = 4096, seed: int = 0) -> InequalityReport:
    """Sup-norm three-ball inequality with sampled sup-norms."""
    r1, r2, r3 = config.radii
    u = _source(obj)
    n = u.dimension
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    u.require_ball(c, r3)
    sups = [quad.sup_norm_on_ball(u.eval, c, r, sample_budget, seed) for r in config.radii]
    return inequality_from_sups(config, sups, n)


def inequality_from_sups(config: ThreeBallConfig, sups, n: int) -> InequalityReport:
    r1, r2, r3 = config.radii
    if sups[0] <= GUARD:
        raise GuardError(f"sup over B_r1 = {sups[0]:.3e} vanishes numerically")
    a, b = exponents(config)
    if config.variant == "Linf_schrodinger":
        geometric = n / 2 * math.log(r3**2 / (r3 - 2 * r2))
    else:
        geometric = -n / 2 * math.log(r3 - 4 * r2)
    logs = [math.log(s) for s in sups]
    return build_report(
        config.variant, config.radii, config.M, logs[1], logs[0], logs[2], geometric, a, b,
        extra={"sups": list(sups)},
    )


def check_three_ball(obj, V, config: ThreeBallConfig, **kw) -> InequalityReport:
    if config.variant.startswith("L2"):
        return check_L2_three_ball(obj, V, config, kw.get("center"))
    return check_Linf_three_ball(obj, V, config, **kw)


@dataclass
class EllipticBound:
    delta: float
    measured: float
    bound: float  # right side with C = 1
    implied_constant: float


def elliptic_sup_bound(u: FieldEvaluator, V: PotentialSpec, delta: float, center=None,
                       sample_budget: int = 4096, seed: int = 0) -> EllipticBound:
    """Sup over ``B_δ`` against ``(||V||_∞ + 1)^{n/2} δ^{-n/2} ||u||_{L^2(B_2δ)}``."""
    n = u.dimension
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    measured = quad.sup_norm_on_ball(u.eval, c, delta, sample_budget, seed)
    l2 = math.sqrt(compute_H(u, c, 2 * delta, 0.0))
    bound = (V.sup_norm + 1) ** (n / 2) * delta ** (-n / 2) * l2
    return EllipticBound(delta, measured, bound, measured / bound if bound > 0 else 0.0)
