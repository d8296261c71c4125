"""JSON experiment configs: parsing, validation and field construction."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import field as F
from . import quad

KINDS = (
    "profile", "monotonicity", "three-ball-sweep", "vanish-order", "chain", "polysystem",
    "doubling", "ucp",
)
SCHRODINGER_CATALOG = ("harmonic", "bessel", "constant")
DEFAULT_RADII = {"min": 0.05, "max": 0.9, "count": 50}


class ConfigError(ValueError):
    """Schema violation or out-of-range value; the message starts with the field path."""


@dataclass
class ExperimentConfig:
    kind: str
    field: dict
    radii: np.ndarray | None = None
    alpha: float | None = None
    center: list | None = None
    orders: tuple[int, int] | None = None
    seed: int = 0
    output: str = "out"
    tolerances: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)  # kind-specific keys, validated
    source: Path | None = None

    def tol(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _num(d: dict, key: str, path: str, default=None, *, lo=None, hi=None, open_lo=True,
         open_hi=True):
    if key not in d:
        if default is None:
            _fail(f"{path}.{key}", "required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(f"{path}.{key}", f"expected a finite number, got {v!r}")
    if lo is not None and (v <= lo if open_lo else v < lo):
        _fail(f"{path}.{key}", f"value {v} out of range (must be {'>' if open_lo else '>='} {lo})")
    if hi is not None and (v >= hi if open_hi else v > hi):
        _fail(f"{path}.{key}", f"value {v} out of range (must be {'<' if open_hi else '<='} {hi})")
    return float(v)


def _radius(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0 < v < 1:
        _fail(path, f"radius {v!r} must lie in (0, 1)")
    return float(v)


def parse_radii(spec, path="radii") -> np.ndarray:
    if isinstance(spec, list):
        r = np.array([_radius(v, f"{path}[{i}]") for i, v in enumerate(spec)])
    elif isinstance(spec, dict):
        lo = _radius(spec.get("min"), f"{path}.min")
        hi = _radius(spec.get("max"), f"{path}.max")
        step = spec.get("step")
        if step is not None:
            step = _num(spec, "step", path, lo=0)
            count = int(round((hi - lo) / step)) + 1
        else:
            count = spec.get("count")
            if not isinstance(count, int) or isinstance(count, bool) or count < 2:
                _fail(f"{path}.count", "expected an integer >= 2")
        r = np.linspace(lo, hi, count)
    else:
        _fail(path, "expected a list of radii or {min, max, count|step}")
    if np.any(np.diff(r) <= 0):
        _fail(path, "radii must be strictly increasing")
    return r


def _check_field(spec, path="field"):
    if not isinstance(spec, dict):
        _fail(path, "expected an object")
    if "grid" in spec:
        if not isinstance(spec["grid"], str):
            _fail(f"{path}.grid", "expected a file path")
        _num(spec, "spacing", path, lo=0)
        return
    cat = spec.get("catalog")
    allowed = SCHRODINGER_CATALOG + F.POLYHARMONIC_CATALOG
    if cat not in allowed:
        _fail(f"{path}.catalog", f"unknown catalog id {cat!r}; choose from {allowed}")
    n = spec.get("n", 2)
    if n not in (2, 3):
        _fail(f"{path}.n", "dimension must be 2 or 3")
    if cat == "bessel":
        if n != 2:
            _fail(f"{path}.n", "Bessel modes are planar")
        if "lambda" not in spec:
            _fail(f"{path}.lambda", "required")


def expand_family(spec: dict) -> list[dict]:
    """Cartesian product over every list-valued parameter of a field spec."""
    keys = [k for k, v in spec.items() if isinstance(v, list) and k != "center"]
    if not keys:
        return [dict(spec)]
    out = []
    for combo in itertools.product(*(spec[k] for k in keys)):
        s = dict(spec)
        s.update(zip(keys, combo))
        out.append(s)
    return out


def parse_config(text: str, source: Path | None = None) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        _fail("config", "expected a JSON object")
    kind = raw.get("kind")
    if kind not in KINDS:
        _fail("kind", f"unknown experiment kind {kind!r}; choose from {KINDS}")
    fspec = raw.get("field")
    if fspec is None:
        _fail("field", "required")
    for i, s in enumerate(expand_family(fspec) if isinstance(fspec, dict) else [fspec]):
        _check_field(s, "field" if i == 0 else f"field[{i}]")

    radii = None
    if kind in ("profile", "monotonicity", "polysystem", "ucp"):
        radii = parse_radii(raw.get("radii", DEFAULT_RADII))
    # three-ball sweeps default to the bridge choice (square root of M, or v)
    alpha = None if kind == "three-ball-sweep" else 0.0
    if "alpha" in raw:
        alpha = _num(raw, "alpha", "config", lo=0, open_lo=False)
    orders = None
    if "orders" in raw:
        o = raw["orders"]
        if not isinstance(o, dict):
            _fail("orders", "expected {radial, angular}")
        rad = o.get("radial", quad.DEFAULT_RADIAL_ORDER)
        ang = o.get("angular", quad.DEFAULT_ANGULAR_ORDER[fspec.get("n", 2)])
        for k, v in (("radial", rad), ("angular", ang)):
            if not isinstance(v, int) or isinstance(v, bool) or v < 8:
                _fail(f"orders.{k}", f"quadrature order {v!r} must be an integer >= 8")
        if ang % 2:
            _fail("orders.angular", "angular order must be even")
        orders = (rad, ang)
    tols = raw.get("tolerances", {})
    if not isinstance(tols, dict):
        _fail("tolerances", "expected an object")
    for k, v in tols.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            _fail(f"tolerances.{k}", f"tolerance {v!r} must be positive")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        _fail("seed", "expected a nonnegative integer")
    center = raw.get("center")
    if center is not None and (not isinstance(center, list) or len(center) != fspec.get("n", 2)):
        _fail("center", "expected a point of the field's dimension")

    params = {}
    if kind == "three-ball-sweep":
        from .threeball import VARIANTS, HypothesisError, ThreeBallConfig

        variant = raw.get("variant", "L2_schrodinger")
        if variant not in VARIANTS:
            _fail("variant", f"unknown variant {variant!r}; choose from {VARIANTS}")
        triples = raw.get("triples")
        if not isinstance(triples, list) or not triples:
            _fail("triples", "expected a nonempty list of [r1, r2, r3]")
        checked = []
        for i, t in enumerate(triples):
            if not isinstance(t, list) or len(t) != 3:
                _fail(f"triples[{i}]", "expected [r1, r2, r3]")
            t = tuple(_radius(v, f"triples[{i}][{j}]") for j, v in enumerate(t))
            try:
                ThreeBallConfig(t, variant)
            except HypothesisError as exc:
                _fail(f"triples[{i}]", f"three-ball hypothesis violated: {exc}")
            checked.append(t)
        params.update(variant=variant, triples=checked,
                      beta_factor=_num(raw, "beta_factor", "config", 1.0, lo=0),
                      max_C=_num(raw, "max_C", "config", 10.0, lo=0))
    elif kind == "vanish-order":
        w = raw.get("window", [1e-2, 1e-1])
        if not isinstance(w, list) or len(w) != 2:
            _fail("window", "expected [lo, hi]")
        lo, hi = (_radius(v, f"window[{i}]") for i, v in enumerate(w))
        if lo >= hi:
            _fail("window", "need lo < hi")
        samples = raw.get("samples", 12)
        if not isinstance(samples, int) or samples < 8:
            _fail("samples", "need at least 8 sample radii")
        params.update(window=(lo, hi), samples=samples,
                      C=_num(raw, "C", "config", 1.0, lo=0),
                      bound=raw.get("bound", "sqrt"))
        if params["bound"] not in ("sqrt", "linear"):
            _fail("bound", "expected 'sqrt' or 'linear'")
        if raw.get("expected_order") == "k":
            params["expected_order"] = "k"
        elif "expected_order" in raw:
            params["expected_order"] = _num(raw, "expected_order", "config", lo=0, open_lo=False)
        params["assert_bound"] = bool(raw.get("assert_bound", False))
    elif kind == "chain":
        r1 = raw.get("r1", [1e-2, 1e-3])
        r1 = r1 if isinstance(r1, list) else [r1]
        params["r1"] = [_radius(v, f"r1[{i}]") for i, v in enumerate(r1)]
        params["radius"] = _num(raw, "radius", "config", 1 / 100, lo=0, hi=1 / 3)
        if "target" in raw:
            t = raw["target"]
            if not isinstance(t, list) or len(t) != fspec.get("n", 2):
                _fail("target", "expected a point of the field's dimension")
            params["target"] = [float(v) for v in t]
    elif kind == "doubling":
        Rs = raw.get("R", [0.05, 0.1, 0.2])
        Rs = Rs if isinstance(Rs, list) else [Rs]
        params["R"] = [_num({"R": v}, "R", f"R[{i}]", lo=0, hi=0.5) for i, v in enumerate(Rs)]
        if "m" in raw:
            params["m"] = int(_num(raw, "m", "config", lo=0))
        for key in ("expected_ratio", "stability"):
            if key in raw:
                params[key] = _num(raw, key, "config", lo=0)
    elif kind in ("monotonicity", "polysystem", "ucp"):
        if raw.get("C") is not None:
            params["C"] = _num(raw, "C", "config", lo=0, open_lo=False)
    if kind == "profile" and "expected_N" in raw:
        params["expected_N"] = _num(raw, "expected_N", "config", lo=0, open_lo=False)

    return ExperimentConfig(
        kind=kind, field=fspec, radii=radii, alpha=alpha, center=center, orders=orders,
        seed=seed, output=str(raw.get("output", "out")), tolerances=tols, params=params,
        source=source,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config: file not found: {path}")
    return parse_config(path.read_text(), source=path)


@dataclass
class BuiltField:
    """A field with its potential; ``order`` > 1 marks polyharmonic catalog entries."""

    label: str
    u: F.FieldEvaluator
    V: F.PotentialSpec
    order: int = 1
    family_value: float = 0.0  # lambda for Bessel modes, k otherwise


def build_field(spec: dict, base: Path | None = None, sample_budget: int = 4096,
                seed: int = 0) -> BuiltField:
    """Instantiate a field spec.  Raises ``ConfigError`` or ``FileNotFoundError``."""
    n = spec.get("n", 2)
    if "grid" in spec:
        path = Path(spec["grid"])
        if base is not None and not path.is_absolute():
            path = base / path
        if not path.exists():
            raise FileNotFoundError(f"grid path not found: {path}")
        u = F.import_grid_field(path, float(spec["spacing"]), n)
        V = F.constant_potential(float(spec.get("potential", 0.0)), n)
        built = BuiltField(f"grid:{path.stem}", u, V)
    else:
        cat = spec["catalog"]
        k = int(spec.get("k", 0))
        if cat == "harmonic":
            built = BuiltField(f"harmonic_k{k}", F.make_harmonic_polynomial(k, n),
                               F.constant_potential(0.0, n), family_value=k)
        elif cat == "constant":
            c = float(spec.get("c", 1.0))
            built = BuiltField(f"constant_{c:g}", F.make_constant(c, n), F.constant_potential(0.0, n))
        elif cat == "bessel":
            lam = float(spec["lambda"])
            u, V = F.make_bessel_mode(k, lam)
            built = BuiltField(f"bessel_k{k}_lam{lam:g}", u, V, family_value=lam)
        else:
            m = int(spec.get("m", 2))
            u, Vb, m = F.make_polyharmonic_example(cat, n=n, k=k, m=m)
            label = cat if cat != "harmonic_k" else f"harmonic_k{k}_m{m}"
            built = BuiltField(label, u, Vb, order=m, family_value=k)
    scale = float(spec.get("scale", 1.0))
    if spec.get("normalize"):
        s = quad.sup_norm_on_ball(built.u.eval, np.zeros(n), 1.0, sample_budget, seed)
        if s <= 0:
            raise ConfigError("field.normalize: field vanishes on the unit ball")
        scale /= s
    if scale != 1.0:
        built.u = built.u.scaled(scale)
    return built
