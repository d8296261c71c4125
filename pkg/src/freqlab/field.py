"""Scalar fields, potentials and the analytic solution catalog.

Every field is evaluated on batches of points: ``x`` is either a single
point of shape ``(n,)`` or an array of shape ``(N, n)``.  Analytic fields
carry exact gradients and exact iterated Laplacians; grid fields are
interpolated with local tensor-product cubics and differentiated with
fourth-order central differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import quad

# Power series of J_k are only trusted up to this argument.
BESSEL_ARG_MAX = 12.0
BESSEL_TERMS = 40


class FieldError(ValueError):
    """Invalid field construction or unsupported query."""


class DomainError(ValueError):
    """A ball or point leaves the domain on which a field is defined."""


class GridFormatError(ValueError):
    """Malformed grid CSV file."""


def as_points(x, n: int) -> tuple[np.ndarray, bool]:
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != n:
        raise FieldError(f"expected points of dimension {n}, got shape {pts.shape}")
    return pts, single


class FieldEvaluator:
    """A real scalar field ``u`` on a subset of R^n.

    Subclasses implement ``_value``, ``_gradient`` and ``power``.  The field
    is immutable once constructed.
    """

    dimension: int
    provenance: str = "analytic"
    name: str = "field"
    degree: int | None = None  # homogeneity degree when known

    def eval(self, x):
        pts, single = as_points(x, self.dimension)
        v = self._value(pts)
        return float(v[0]) if single else v

    def grad(self, x):
        pts, single = as_points(x, self.dimension)
        g = self._gradient(pts)
        return g[0] if single else g

    def laplacian_power(self, x, j: int):
        """Value of ``(-Δ)^j u`` at ``x``."""
        return self.power(j).eval(x)

    def power(self, j: int) -> "FieldEvaluator":
        raise NotImplementedError

    def admits(self, center, r: float) -> bool:
        raise NotImplementedError

    def require_ball(self, center, r: float) -> None:
        if not self.admits(center, r):
            raise DomainError(
                f"ball B_{r:g}({np.asarray(center).tolist()}) leaves the domain of {self.name}"
            )

    def scaled(self, c: float) -> "FieldEvaluator":
        return ScaledField(self, float(c))

    def dilated(self, R: float, x0) -> "FieldEvaluator":
        """The field ``y -> u(R y + x0)``."""
        return DilatedField(self, float(R), np.asarray(x0, dtype=float))

    def __call__(self, x):
        return self.eval(x)

    def _value(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _gradient(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class AnalyticField(FieldEvaluator):
    """Field defined by closed-form callables.

    ``powers`` maps ``j >= 1`` to the field ``(-Δ)^j u``; it may raise
    :class:`FieldError` when the iterate is unavailable.
    """

    def __init__(
        self,
        dimension: int,
        value: Callable[[np.ndarray], np.ndarray],
        gradient: Callable[[np.ndarray], np.ndarray],
        powers: Callable[[int], FieldEvaluator] | None = None,
        *,
        name: str = "analytic",
        domain_radius: float = math.inf,
        degree: int | None = None,
    ):
        self.dimension = dimension
        self._value_fn = value
        self._gradient_fn = gradient
        self._powers = powers
        self.name = name
        self.domain_radius = domain_radius
        self.degree = degree

    def _value(self, pts):
        return np.asarray(self._value_fn(pts), dtype=float).reshape(len(pts))

    def _gradient(self, pts):
        return np.asarray(self._gradient_fn(pts), dtype=float).reshape(len(pts), self.dimension)

    def power(self, j: int) -> FieldEvaluator:
        if j < 0:
            raise FieldError("Laplacian power must be nonnegative")
        if j == 0:
            return self
        if self._powers is None:
            raise FieldError(f"iterated Laplacians are not available for {self.name}")
        return self._powers(j)

    def admits(self, center, r):
        c = np.asarray(center, dtype=float)
        return float(np.linalg.norm(c)) + r <= self.domain_radius * (1 + 1e-12)


class ScaledField(FieldEvaluator):
    def __init__(self, base: FieldEvaluator, c: float):
        self.base = base
        self.c = c
        self.dimension = base.dimension
        self.provenance = base.provenance
        self.name = f"{c:g}*{base.name}"
        self.degree = base.degree if c != 0 else None

    def _value(self, pts):
        return self.c * self.base._value(pts)

    def _gradient(self, pts):
        return self.c * self.base._gradient(pts)

    def power(self, j):
        return self if j == 0 else ScaledField(self.base.power(j), self.c)

    def admits(self, center, r):
        return self.base.admits(center, r)


class DilatedField(FieldEvaluator):
    def __init__(self, base: FieldEvaluator, R: float, x0: np.ndarray):
        if R <= 0:
            raise FieldError("dilation factor must be positive")
        self.base = base
        self.R = R
        self.x0 = x0
        self.dimension = base.dimension
        self.provenance = base.provenance
        self.name = f"{base.name}(R={R:g})"

    def _map(self, pts):
        return self.R * pts + self.x0

    def _value(self, pts):
        return self.base._value(self._map(pts))

    def _gradient(self, pts):
        return self.R * self.base._gradient(self._map(pts))

    def power(self, j):
        if j == 0:
            return self
        # chain rule: (-Δ)^j [u(R y + x0)] = R^{2j} ((-Δ)^j u)(R y + x0)
        return ScaledField(DilatedField(self.base.power(j), self.R, self.x0), self.R ** (2 * j))

    def admits(self, center, r):
        return self.base.admits(self._map(np.asarray(center, dtype=float)), self.R * r)


def _zero_field(n: int, name: str = "zero") -> AnalyticField:
    return AnalyticField(
        n,
        lambda p: np.zeros(len(p)),
        lambda p: np.zeros((len(p), n)),
        lambda j: _zero_field(n, name),
        name=name,
    )


def _constant_field(c: float, n: int) -> AnalyticField:
    return AnalyticField(
        n,
        lambda p: np.full(len(p), c),
        lambda p: np.zeros((len(p), n)),
        lambda j: _zero_field(n),
        name=f"const({c:g})",
        degree=0 if c != 0 else None,
    )


def make_zero(n: int = 2) -> FieldEvaluator:
    return _zero_field(n)


def make_harmonic_polynomial(k: int, n: int = 2) -> FieldEvaluator:
    """Homogeneous harmonic polynomial ``Re((x1 + i x2)^k)`` of degree ``k``.

    For ``n = 3`` the same polynomial is used; it is the solid harmonic
    ``r^k P_k^k(cos θ) cos(kφ)`` up to normalization.
    """
    if n not in (2, 3):
        raise FieldError(f"unsupported dimension {n}; use 2 or 3")
    if k < 0 or int(k) != k:
        raise FieldError("degree must be a nonnegative integer")
    k = int(k)

    def value(p):
        z = p[:, 0] + 1j * p[:, 1]
        return np.real(z**k)

    def gradient(p):
        g = np.zeros((len(p), n))
        if k > 0:
            dz = k * (p[:, 0] + 1j * p[:, 1]) ** (k - 1)
            g[:, 0] = dz.real
            g[:, 1] = -dz.imag
        return g

    return AnalyticField(
        n, value, gradient, lambda j: _zero_field(n), name=f"harmonic(k={k})", degree=k
    )


def make_constant(c: float = 1.0, n: int = 2) -> FieldEvaluator:
    return _constant_field(float(c), n)


def bessel_series_coefficients(k: int, a: float, terms: int = BESSEL_TERMS) -> np.ndarray:
    """Coefficients ``c_m`` with ``J_k(a ρ) = (a/2)^k ρ^k Σ_m c_m' ρ^{2m}``.

    Returned with the ``(a/2)^k`` factor folded in, so that for
    ``s = ρ^2``: ``J_k(aρ) = ρ^k Σ_m c[m] s^m``.
    """
    c = np.empty(terms)
    c[0] = (a / 2) ** k / math.factorial(k)
    q = -(a * a) / 4
    for m in range(terms - 1):
        c[m + 1] = c[m] * q / ((m + 1) * (m + 1 + k))
    return c


def bessel_j(k: int, z, terms: int = BESSEL_TERMS):
    """``J_k(z)`` by its power series and a bound from the first omitted term.

    Returns ``(value, error_bound)``.  Arguments above ``BESSEL_ARG_MAX``
    are rejected.
    """
    z = np.asarray(z, dtype=float)
    if np.any(np.abs(z) > BESSEL_ARG_MAX):
        raise FieldError(f"Bessel argument exceeds {BESSEL_ARG_MAX}")
    c = bessel_series_coefficients(k, 1.0, terms + 1)
    s = z * z
    total = np.zeros_like(s)
    for coef in c[:-1][::-1]:
        total = total * s + coef
    zk = z**k
    omitted = np.abs(c[-1] * s**terms * zk)
    return zk * total, omitted


def _poly_eval(c: np.ndarray, s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    for coef in c[::-1]:
        out = out * s + coef
    return out


class BesselMode(AnalyticField):
    """``u = J_k(√λ ρ) cos(kθ)`` in the plane, solving ``Δu = -λ u``.

    Written as ``Re(z^k) g(|x|^2)`` with ``g`` a power series, so the field
    and its derivatives are smooth at the origin.
    """

    def __init__(self, k: int, lam: float):
        if lam <= 0:
            raise FieldError("eigenvalue must be positive")
        if k < 0 or int(k) != k:
            raise FieldError("Bessel order must be a nonnegative integer")
        self.k = int(k)
        self.lam = float(lam)
        a = math.sqrt(self.lam)
        self._c = bessel_series_coefficients(self.k, a)
        m = np.arange(len(self._c))
        self._c1 = (m * self._c)[1:]  # g'
        self._c2 = (m[1:] * (m[1:] - 1) * self._c[1:])[1:]  # g''
        self._harm = make_harmonic_polynomial(self.k, 2)
        super().__init__(
            2,
            self._val,
            self._grd,
            self._pow,
            name=f"bessel(k={self.k},lambda={self.lam:g})",
            domain_radius=min(2.0, BESSEL_ARG_MAX / a),
        )

    def _val(self, p):
        s = np.einsum("ij,ij->i", p, p)
        return self._harm._value(p) * _poly_eval(self._c, s)

    def _grd(self, p):
        s = np.einsum("ij,ij->i", p, p)
        P = self._harm._value(p)
        g = _poly_eval(self._c, s)
        g1 = _poly_eval(self._c1, s)
        return g[:, None] * self._harm._gradient(p) + (2 * P * g1)[:, None] * p

    def laplacian(self, x):
        """``Δu`` from the series, independent of the eigenvalue relation."""
        p, single = as_points(x, 2)
        s = np.einsum("ij,ij->i", p, p)
        P = self._harm._value(p)
        g1 = _poly_eval(self._c1, s)
        g2 = _poly_eval(self._c2, s)
        out = P * (4 * s * g2 + (2 * 2 + 4 * self.k) * g1)
        return float(out[0]) if single else out

    def series_error_bound(self, x):
        p, single = as_points(x, 2)
        s = np.einsum("ij,ij->i", p, p)
        tail = np.abs(bessel_series_coefficients(self.k, math.sqrt(self.lam), BESSEL_TERMS + 1)[-1])
        out = np.abs(self._harm._value(p)) * tail * s**BESSEL_TERMS
        return float(out[0]) if single else out

    def _pow(self, j):
        neg_lap = AnalyticField(
            2,
            lambda p: -self.laplacian(p),
            lambda p: self.lam * self._grd(p),
            None,
            name=f"-lap({self.name})",
            domain_radius=self.domain_radius,
        )
        return neg_lap if j == 1 else ScaledField(neg_lap, self.lam ** (j - 1))


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Potential ``V`` with its sup-norm and ``W^{1,∞}`` norm over ``B_1``."""

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray] | None
    sup_norm: float
    w1inf_norm: float
    dimension: int = 2
    name: str = "V"
    exact: bool = True

    def __post_init__(self):
        if self.sup_norm < 0 or self.w1inf_norm < self.sup_norm * (1 - 1e-15):
            raise FieldError("need 0 <= sup_norm <= w1inf_norm")

    def eval(self, x):
        pts, single = as_points(x, self.dimension)
        v = np.asarray(self.value(pts), dtype=float).reshape(len(pts))
        return float(v[0]) if single else v

    def grad(self, x):
        pts, single = as_points(x, self.dimension)
        if self.gradient is None:
            g = _central_gradient(lambda q: self.eval(q), pts, 1e-4)
        else:
            g = np.asarray(self.gradient(pts), dtype=float).reshape(len(pts), self.dimension)
        return g[0] if single else g

    def effective_m(self, norm: str = "w1inf") -> float:
        """``max(norm, 1)``: the standing assumption ``M > 1`` floors M at one."""
        if norm == "w1inf":
            return max(self.w1inf_norm, 1.0)
        if norm == "sup":
            return max(self.sup_norm, 1.0)
        raise ValueError(f"unknown norm {norm!r}")

    def negated(self) -> "PotentialSpec":
        g = None if self.gradient is None else (lambda p: -self.gradient(p))
        return PotentialSpec(
            lambda p: -self.value(p), g, self.sup_norm, self.w1inf_norm,
            self.dimension, f"-{self.name}", self.exact,
        )


def constant_potential(c: float, n: int = 2) -> PotentialSpec:
    c = float(c)
    return PotentialSpec(
        lambda p: np.full(len(p), c),
        lambda p: np.zeros((len(p), n)),
        abs(c), abs(c), n, f"const({c:g})",
    )


def potential_from_function(f, n: int = 2, gradient=None, sample_budget: int = 4096,
                            name: str = "V") -> PotentialSpec:
    """Wrap a callable potential, measuring its norms by sampling ``B_1``."""
    sup, w1 = potential_norms(f, sample_budget, n=n, gradient=gradient)
    return PotentialSpec(f, gradient, sup, w1, n, name, exact=False)


def _central_gradient(f, pts: np.ndarray, step: float) -> np.ndarray:
    n = pts.shape[1]
    g = np.empty_like(pts)
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        g[:, i] = (
            -f(pts + 2 * e) + 8 * f(pts + e) - 8 * f(pts - e) + f(pts - 2 * e)
        ) / (12 * step)
    return g


def potential_norms(V, sample_budget: int = 4096, *, n: int | None = None,
                    gradient=None, seed: int = 0) -> tuple[float, float]:
    """Sup-norm and ``W^{1,∞}`` norm of a potential over ``B_1``.

    Exact potentials return their stored norms.  Otherwise the norms are
    maxima over a low-discrepancy sample of the closed unit ball, i.e.
    lower bounds whose resolution improves with ``sample_budget``.
    """
    if sample_budget < 1000:
        raise ValueError("sample_budget must be at least 1000")
    if isinstance(V, PotentialSpec):
        if V.exact:
            return V.sup_norm, V.w1inf_norm
        n = V.dimension
        f, grad = V.eval, V.grad
    elif isinstance(V, FieldEvaluator):
        n = V.dimension
        f, grad = V.eval, V.grad
    else:
        if n is None:
            raise ValueError("dimension required for a bare callable")
        f = V
        grad = gradient if gradient is not None else (
            lambda p: _central_gradient(V, np.atleast_2d(p), 1e-4)
        )
    pts = quad.ball_samples(n, sample_budget, seed)
    vals = np.abs(np.asarray(f(pts), dtype=float))
    g = np.linalg.norm(np.asarray(grad(pts), dtype=float), axis=1)
    sup = float(vals.max())
    return sup, sup + float(g.max())


def make_bessel_mode(k: int, lam: float) -> tuple[FieldEvaluator, PotentialSpec]:
    u = BesselMode(k, lam)
    return u, constant_potential(-lam, 2)


POLYHARMONIC_CATALOG = ("radial_square", "exp_mode", "harmonic_k")


def make_polyharmonic_example(key: str, *, n: int = 2, k: int = 2, m: int = 2):
    """Catalog solutions of ``(-Δ)^m u = V̄ u``.

    Returns ``(u, Vbar, m)``.  ``k`` and ``m`` only apply to ``harmonic_k``.
    """
    if key == "radial_square":
        def pw(j):
            if j == 1:
                return _constant_field(-2.0 * n, n)
            return _zero_field(n)

        u = AnalyticField(
            n,
            lambda p: np.einsum("ij,ij->i", p, p),
            lambda p: 2 * p,
            pw,
            name="radial_square",
            degree=2,
        )
        return u, constant_potential(0.0, n), 2
    if key == "exp_mode":
        def expfield(sign):
            f = AnalyticField(
                n,
                lambda p: sign * np.exp(p[:, 0]),
                lambda p: np.column_stack([sign * np.exp(p[:, 0])] + [np.zeros(len(p))] * (n - 1)),
                lambda j: expfield(sign * (-1) ** j),
                name="exp_mode" if sign > 0 else "-exp_mode",
            )
            return f

        return expfield(1.0), constant_potential(1.0, n), 2
    if key == "harmonic_k":
        return make_harmonic_polynomial(k, n), constant_potential(0.0, n), m
    raise FieldError(f"unknown polyharmonic catalog id {key!r}; choose from {POLYHARMONIC_CATALOG}")


# --------------------------------------------------------------------- grids


def _lagrange4(f: np.ndarray) -> np.ndarray:
    """Cubic Lagrange weights on nodes 0,1,2,3 evaluated at ``f``."""
    return np.stack(
        [
            -(f - 1) * (f - 2) * (f - 3) / 6,
            f * (f - 2) * (f - 3) / 2,
            -f * (f - 1) * (f - 3) / 2,
            f * (f - 1) * (f - 2) / 6,
        ],
        axis=-1,
    )


class GridField(FieldEvaluator):
    """Samples on a uniform Cartesian grid with node ``i`` at ``x = i h``.

    Values between nodes come from tensor-product cubic Lagrange
    interpolation over the four nearest nodes per axis, which is exact on
    polynomials of degree three per axis and reproduces node samples
    bit-for-bit.  Gradients and the Laplacian use fourth-order central
    differences of the interpolant with step ``h``.
    """

    provenance = "grid"

    def __init__(self, values: np.ndarray, h: float, lo, name: str = "grid"):
        values = np.asarray(values, dtype=float)
        if h <= 0:
            raise FieldError("grid spacing must be positive")
        if np.isnan(values).any():
            raise GridFormatError("grid contains NaN samples")
        if min(values.shape) < 4:
            raise FieldError("grid needs at least 4 nodes per axis")
        self.values = values
        self.values.setflags(write=False)
        self.h = float(h)
        self.lo = np.asarray(lo, dtype=int)
        self.shape = values.shape
        self.dimension = values.ndim
        self.name = name
        self._offsets = list(np.ndindex(*([4] * self.dimension)))

    @property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = self.lo * self.h
        return lo, lo + (np.array(self.shape) - 1) * self.h

    def node(self, index) -> np.ndarray:
        return np.asarray(index, dtype=float) * self.h

    def admits(self, center, r):
        lo, hi = self.box
        c = np.asarray(center, dtype=float)
        margin = r + 3 * self.h
        return bool(np.all(c - margin >= lo - 1e-12) and np.all(c + margin <= hi + 1e-12))

    def _value(self, pts):
        t = pts / self.h - self.lo
        near = np.rint(t)
        t = np.where(np.abs(t - near) < 1e-9, near, t)
        size = np.array(self.shape)
        base = np.clip(np.floor(t).astype(int) - 1, 0, size - 4)
        w = _lagrange4(t - base)  # (N, n, 4)
        out = np.zeros(len(pts))
        for off in self._offsets:
            idx = tuple(base[:, d] + off[d] for d in range(self.dimension))
            weight = np.prod([w[:, d, off[d]] for d in range(self.dimension)], axis=0)
            out += weight * self.values[idx]
        return out

    def _gradient(self, pts):
        return _central_gradient(self._value, pts, self.h)

    def _neg_laplacian(self, pts):
        h = self.h
        out = np.zeros(len(pts))
        for i in range(self.dimension):
            e = np.zeros(self.dimension)
            e[i] = h
            out += (
                -self._value(pts + 2 * e) + 16 * self._value(pts + e) - 30 * self._value(pts)
                + 16 * self._value(pts - e) - self._value(pts - 2 * e)
            ) / (12 * h * h)
        return -out

    def power(self, j):
        if j == 0:
            return self
        if j == 1:
            grid = self

            class _NegLap(FieldEvaluator):
                dimension = grid.dimension
                provenance = "grid"
                name = f"-lap({grid.name})"

                def _value(self, pts):
                    return grid._neg_laplacian(pts)

                def _gradient(self, pts):
                    return _central_gradient(grid._neg_laplacian, pts, grid.h)

                def power(self, jj):
                    if jj == 0:
                        return self
                    raise FieldError("grid fields support Laplacian powers up to j = 1")

                def admits(self, center, r):
                    return grid.admits(center, r + 2 * grid.h)

            return _NegLap()
        raise FieldError("grid fields support Laplacian powers up to j = 1")


def write_grid_csv(path, u: FieldEvaluator, h: float, half_width: float) -> Path:
    """Sample ``u`` on the nodes ``|i h| <= half_width`` and write the grid CSV."""
    n = u.dimension
    K = int(math.ceil(half_width / h))
    ticks = np.arange(-K, K + 1)
    mesh = np.meshgrid(*([ticks] * n), indexing="ij")
    idx = np.column_stack([m.ravel() for m in mesh])
    vals = u.eval(idx * h)
    shape = "x".join([str(len(ticks))] * n)
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"{n},{h!r},{shape}\n")
        for row, v in zip(idx, vals):
            fh.write(",".join(str(int(i)) for i in row) + f",{v:.17g}\n")
    return path


def import_grid_field(path, spacing: float, dimension: int) -> GridField:
    """Read a grid CSV.

    Layout: a header ``n,h,shape`` (``shape`` as ``N1xN2[xN3]``), optionally
    preceded by that literal line of column names, then one row
    ``i1,...,in,value`` per node in row-major order with signed integer
    indices; node ``i`` sits at ``x = i h``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"grid path not found: {path}")
    if spacing <= 0:
        raise GridFormatError("spacing must be positive")
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines and lines[0].replace(" ", "").lower() == "n,h,shape":
        lines = lines[1:]
    if not lines:
        raise GridFormatError("empty grid file")
    try:
        n_s, h_s, shape_s = lines[0].split(",")
        n, h = int(n_s), float(h_s)
        shape = tuple(int(s) for s in shape_s.lower().split("x"))
    except ValueError as exc:
        raise GridFormatError(f"bad header line {lines[0]!r}") from exc
    if n != dimension or len(shape) != n:
        raise GridFormatError(f"header dimension {n} / shape {shape} does not match dimension {dimension}")
    if abs(h - spacing) > 1e-12 * spacing:
        raise GridFormatError(f"header spacing {h} does not match requested spacing {spacing}")
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    except ValueError as exc:
        raise GridFormatError("non-numeric grid row") from exc
    if data.ndim != 2 or data.shape[1] != n + 1:
        raise GridFormatError("every row must hold n indices and one value")
    if len(data) != math.prod(shape):
        raise GridFormatError(f"expected {math.prod(shape)} rows, found {len(data)}")
    idx = data[:, :n]
    if np.any(idx != np.rint(idx)):
        raise GridFormatError("indices must be integers")
    idx = idx.astype(int)
    lo = idx[0]
    expected = np.column_stack(np.unravel_index(np.arange(len(data)), shape)) + lo
    if not np.array_equal(idx, expected):
        raise GridFormatError("non-uniform grid: indices do not form a row-major block")
    values = data[:, n]
    if np.isnan(values).any():
        raise GridFormatError("grid contains NaN samples")
    return GridField(values.reshape(shape), h, lo, name=path.stem)
