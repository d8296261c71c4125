"""Command line runner: ``freqlab <kind> --config cfg.json [--out DIR] [--seed S]``.

Exit status 0 when every asserted check passes, 1 when a check fails and 2
on input errors (bad config, missing grid, violated hypotheses).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import field as F
from .config import BuiltField, ConfigError, ExperimentConfig, build_field, expand_family
from .frequency import (
    DERIVATIVE_STEP,
    PDEResidualError,
    VanishingError,
    check_derivative_identity,
    check_monotonicity_schrodinger,
    frequency_profile,
)
from .order import (
    NormalizationError,
    OrderResolutionError,
    estimate_vanishing_order,
    run_chain_certificate,
)
from .polysystem import (
    ClosureError,
    check_monotonicity_polyharmonic,
    check_monotonicity_ucp,
    decompose,
    doubling_check,
    stacked_profile,
)
from .threeball import GuardError, HypothesisError, ThreeBallConfig, check_three_ball, effective_M

log = logging.getLogger("freqlab")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
INPUT_ERRORS = (
    ConfigError, FileNotFoundError, F.FieldError, F.DomainError, F.GridFormatError,
    HypothesisError, NormalizationError, ClosureError, VanishingError, GuardError,
    OrderResolutionError, PDEResidualError,
)


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header, rows) -> Path:
    """Write atomically: temp file in the target directory, then rename."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)
    return path


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool | None  # None marks an informational row

    @property
    def status(self) -> str:
        return "info" if self.passed is None else ("pass" if self.passed else "FAIL")


@dataclass
class RunResult:
    kind: str
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)

    def check(self, name, value, threshold, passed):
        self.checks.append(Check(name, float(value), float(threshold), passed))

    @property
    def exit_code(self) -> int:
        return EXIT_OK if all(c.passed is not False for c in self.checks) else EXIT_FAIL


class Runner:
    def __init__(self, config: ExperimentConfig, out: Path, *, self_check=False, plot=True,
                 gnuplot=False):
        self.cfg = config
        self.out = out
        self.self_check = self_check
        self.plot = plot
        self.gnuplot = gnuplot
        self.result = RunResult(config.kind)
        self.base = config.source.parent if config.source else None

    def build(self, spec) -> BuiltField:
        return build_field(spec, self.base, seed=self.cfg.seed)

    def center(self, n):
        return np.zeros(n) if self.cfg.center is None else np.asarray(self.cfg.center, float)

    def csv(self, name, header, rows):
        self.result.files.append(write_csv(self.out / name, header, rows))

    def figure(self, fn, name, *args, **kw):
        if self.plot:
            from . import plots

            self.result.files.append(getattr(plots, fn)(*args, self.out / name, **kw))

    def run(self) -> RunResult:
        getattr(self, "run_" + self.cfg.kind.replace("-", "_"))()
        c = self.result.checks
        self.csv("summary.csv", ["check", "value", "threshold", "status"],
                 [[x.name, x.value, x.threshold, x.status] for x in c])
        if self.gnuplot:
            self.write_gnuplot()
        return self.result

    # ------------------------------------------------------------ kinds

    def _identity_check(self, profile, label=""):
        if profile.identity_residual is None:
            return  # fewer than seven radii: no central differences
        step = float(np.max(np.diff(profile.radii)))
        with warnings.catch_warnings():
            # a coarse grid is reported as an informational row instead
            warnings.simplefilter("ignore")
            res = check_derivative_identity(profile)
        fine = step <= DERIVATIVE_STEP * (1 + 1e-9)
        tol = self.cfg.tol("identity", 1e-6)
        self.result.check(f"{label}derivative identity residual", res, tol,
                          res <= tol if fine else None)

    def _parts_check(self, profile, label=""):
        if profile.I_parts is None:
            return
        ok = profile.valid & np.isfinite(profile.I_parts)
        denom = np.maximum(np.abs(profile.I_def[ok]), 1e-300)
        rel = float(np.max(np.abs(profile.I_def[ok] - profile.I_parts[ok]) / denom)) if ok.any() else 0.0
        tol = self.cfg.tol("parts", 1e-7)
        self.result.check(f"{label}I definition vs parts", rel, tol, rel <= tol)

    def _schrodinger_field(self):
        b = self.build(self.cfg.field)
        if b.order > 1:
            raise ConfigError(f"field: {b.label} is a polyharmonic entry; use the polysystem kind")
        return b

    def run_profile(self):
        b = self._schrodinger_field()
        n = b.u.dimension
        alpha = self.cfg.alpha
        V = b.V if b.u.provenance != "grid" else None
        p = frequency_profile(b.u, V, self.center(n), self.cfg.radii, alpha,
                              orders=self.cfg.orders, self_check=self.self_check)
        cols, rows = p.rows()
        self.csv("profile.csv", cols, rows)
        self._parts_check(p)
        self._identity_check(p)
        if alpha > 0:
            self.result.check("bridge violations", p.bridge_violations(), 0,
                              p.bridge_violations() == 0)
        if "expected_N" in self.cfg.params:
            target = self.cfg.params["expected_N"]
            N = p.N[p.valid]
            err = float(np.max(np.abs(N - target))) / max(abs(target), 1.0)
            tol = self.cfg.tol("N", 1e-9)
            self.result.check(f"N equals {target:g}", err, tol, err <= tol)
        self.figure("profile_figure", "profile.png", p, title=b.label)

    def run_monotonicity(self):
        b = self._schrodinger_field()
        n = b.u.dimension
        alpha = self.cfg.alpha
        p = frequency_profile(b.u, None, self.center(n), self.cfg.radii, alpha,
                              orders=self.cfg.orders, self_check=self.self_check)
        rep = check_monotonicity_schrodinger(p, b.V, C=self.cfg.params.get("C"),
                                             tol=self.cfg.tol("monotone", 1e-6))
        self.csv("monotonicity.csv", ["r", "N", "quantity"],
                 [[r, N, q] for r, N, q in zip(rep.radii, p.N[p.valid], rep.quantity)])
        self.result.check(f"min increment of N + C||V||r^2 (C={rep.constant:g})",
                          rep.min_increment, -rep.tolerance, rep.passed)
        self.result.check("empirical minimal C", rep.minimal_constant, rep.constant, None)
        self.figure("monotonicity_figure", "monotonicity.png", [rep], title=b.label)

    def run_three_ball_sweep(self):
        prm = self.cfg.params
        variant = prm["variant"]
        rows, plot_rows = [], []
        worst_C, worst_res, bridges = 0.0, math.inf, True
        for spec in expand_family(self.cfg.field):
            b = self.build(spec)
            obj, V = b.u, b.V
            if variant.endswith("polyharmonic"):
                V = b.V if b.order > 1 else b.V.negated()
                obj = decompose(b.u, b.order, V)
            M = effective_M(V, variant)
            for t in prm["triples"]:
                tb = ThreeBallConfig(t, variant, M, alpha=self.cfg.alpha,
                                     beta_factor=prm["beta_factor"])
                rep = check_three_ball(obj, V, tb, center=self.center(b.u.dimension),
                                       seed=self.cfg.seed)
                rows.append([b.label, b.family_value, *t, variant, rep.lhs, rep.rhs0,
                             rep.residual0, rep.C_emp])
                plot_rows.append({"r1": t[0], "r2": t[1], "r3": t[2], "C_emp": rep.C_emp})
                worst_C = max(worst_C, rep.C_emp)
                worst_res = min(worst_res, rep.residual)
                bridges &= rep.extra.get("bridges_hold", True)
        self.csv("sweep.csv", ["id", "lambda_or_k", "r1", "r2", "r3", "variant", "LHS", "RHS0",
                               "residual0", "C_emp"], rows)
        self.result.check("max calibrated constant", worst_C, prm["max_C"], worst_C <= prm["max_C"])
        self.result.check("min residual at calibrated constant", worst_res, -1e-10,
                          worst_res >= -1e-10)
        if variant.startswith("L2"):
            self.result.check("weighted-mass bridges hold", float(bridges), 1.0, bridges)
        self.figure("sweep_figure", "sweep.png", plot_rows, max_C=prm["max_C"])

    def run_vanish_order(self):
        prm = self.cfg.params
        rows = []
        last = None
        for spec in expand_family(self.cfg.field):
            b = self.build(spec)
            n = b.u.dimension
            obj = b.u
            M = b.V.effective_m("w1inf") if b.order == 1 else max(b.V.sup_norm + 1.0, 2.0)
            est = estimate_vanishing_order(obj, self.center(n), prm["window"], prm["samples"],
                                           M=M, C=prm["C"], bound=prm["bound"],
                                           orders=self.cfg.orders)
            last = (est, b.label)
            rows.append([b.label, spec.get("k", 0), spec.get("lambda", 0.0), est.slope, est.order,
                         est.fit_residual, est.bound, est.verdict])
            self.result.check(f"{b.label} fit is conclusive", est.fit_residual, 0.1,
                              est.verdict != "inconclusive")
            exp = prm.get("expected_order")
            if exp is not None:
                want = float(spec.get("k", 0)) if exp == "k" else exp
                err = abs(est.order - want)
                tol = self.cfg.tol("order", 0.05)
                self.result.check(f"{b.label} order within tolerance of {want:g}", err, tol,
                                  err <= tol)
            self.result.check(f"{b.label} order vs bound", est.order, est.bound,
                              (est.verdict == "within bound") if prm.get("assert_bound") else None)
        self.csv("orders.csv", ["id", "k", "lambda", "slope", "order", "fit_residual", "bound",
                                "verdict"], rows)
        if last is not None:
            self.figure("order_figure", "order.png", last[0], title=last[1])

    def run_chain(self):
        prm = self.cfg.params
        b = self._schrodinger_field()
        for r1 in prm["r1"]:
            cert = run_chain_certificate(b.u, b.V, r1, prm.get("target"), radius=prm["radius"],
                                         seed=self.cfg.seed)
            rows = [[s.index, " ".join(fmt(c) for c in s.center), s.ball_sup,
                     math.exp(s.log_bound) if s.log_bound > -745 else 0.0, s.log_bound]
                    for s in cert.steps]
            rows.append(["final", " ".join(fmt(c) for c in np.zeros(b.u.dimension)),
                         cert.measured, cert.bound, cert.log_bound])
            self.csv(f"certificate_r1_{r1:g}.csv",
                     ["step", "center", "ball_sup", "step_bound", "log_step_bound"], rows)
            self.result.check(f"r1={r1:g}: log measured sup >= log bound",
                              math.log(cert.measured), cert.log_bound, cert.valid)
            if cert.q is not None:
                self.result.check(f"r1={r1:g}: final-step exponent q", cert.q, cert.q_formula, None)
            self.figure("chain_figure", f"chain_r1_{r1:g}.png", cert)

    def _stack(self):
        b = self.build(self.cfg.field)
        V = b.V if b.order > 1 else b.V.negated()
        return b, decompose(b.u, b.order, V, tol=self.cfg.tol("closure", 1e-9))

    def _stack_profile(self, alpha):
        b, stack = self._stack()
        p = stacked_profile(stack, self.center(stack.dimension), self.cfg.radii, alpha,
                            orders=self.cfg.orders, self_check=self.self_check)
        cols, rows = p.rows()
        self.csv("stacked_profile.csv", cols, rows)
        self._parts_check(p, "stacked ")
        self._identity_check(p, "stacked ")
        if alpha > 0:
            v = p.bridge_violations()
            self.result.check("bridge violations", v, 0, v == 0)
        return b, stack, p

    def _growth(self, rep, label):
        self.csv(f"{label}.csv", ["r", "quantity"], list(zip(rep.radii, rep.quantity)))
        self.result.check(f"{label} minimal C (bisection)", rep.minimal_constant, 64.0,
                          rep.satisfiable and rep.converged and rep.minimal_constant <= 64)
        if "C" in self.cfg.params:
            self.result.check(f"{label} min increment at C={rep.constant:g}", rep.min_increment,
                              -rep.tolerance, rep.passed)
        self.figure("monotonicity_figure", f"{label}.png", [rep])

    def run_polysystem(self):
        alpha = self.cfg.alpha
        b, stack, p = self._stack_profile(alpha)
        self.result.check("closure residual", stack.closure_residual, 1e-9, None)
        rep = check_monotonicity_polyharmonic(p, v=stack.v, C=self.cfg.params.get("C"),
                                              tol=self.cfg.tol("monotone", 1e-6))
        self._growth(rep, "mono_weighted")

    def run_ucp(self):
        b, stack, p = self._stack_profile(0.0)
        rep = check_monotonicity_ucp(p, v=stack.v, C=self.cfg.params.get("C"),
                                     tol=self.cfg.tol("monotone", 1e-6))
        self._growth(rep, "mono_unweighted")

    def run_doubling(self):
        prm = self.cfg.params
        b = self.build(self.cfg.field)
        m = prm.get("m", b.order)
        c = self.center(b.u.dimension)
        reps = [doubling_check(b.u, c, R, m, self.cfg.orders) for R in prm["R"]]
        self.csv("doubling.csv", ["R", "h_R", "h_2R", "ratio", "implied_constant"],
                 [[r.R, r.h_R, r.h_2R, r.ratio, r.implied_constant] for r in reps])
        finite = all(math.isfinite(r.implied_constant) for r in reps)
        self.result.check("implied constants finite", float(finite), 1.0, finite)
        if "expected_ratio" in prm:
            want = prm["expected_ratio"]
            err = max(abs(r.ratio - want) / want for r in reps)
            tol = self.cfg.tol("ratio", 1e-8)
            self.result.check(f"ratio equals {want:g}", err, tol, err <= tol)
        if "stability" in prm:
            C = np.array([r.implied_constant for r in reps])
            spread = float(np.max(np.abs(C / C.mean() - 1)))
            self.result.check("implied constant spread", spread, prm["stability"],
                              spread <= prm["stability"])
        self.figure("doubling_figure", "doubling.png", {b.label: reps})

    # ------------------------------------------------------------ gnuplot

    def write_gnuplot(self):
        lines = ["set datafile separator ','", "set key autotitle columnhead", "set grid"]
        for f in self.result.files:
            if f.suffix == ".csv" and f.name != "summary.csv":
                lines += [f"set output '{f.stem}_gp.png'", "set terminal pngcairo size 800,500",
                          f"plot '{f.name}' using 1:2 with linespoints"]
        path = self.out / "plots.gp"
        path.write_text("\n".join(lines) + "\n")
        self.result.files.append(path)


def run(config: ExperimentConfig, out: Path | None = None, **kw) -> RunResult:
    out = Path(out if out is not None else config.output)
    out.mkdir(parents=True, exist_ok=True)
    return Runner(config, out, **kw).run()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="freqlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in cfgmod.KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", help="output directory (default: config 'output')")
        sp.add_argument("--seed", type=int, help="sampling seed (overrides the config)")
        sp.add_argument("--self-check", action="store_true",
                        help="repeat quadratures at doubled order and widen tolerances")
        sp.add_argument("--emit-gnuplot", action="store_true", help="also write plots.gp")
        sp.add_argument("--no-plot", action="store_true", help="skip matplotlib figures")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def print_summary(result: RunResult, stream=sys.stdout):
    width = max((len(c.name) for c in result.checks), default=10)
    for c in result.checks:
        print(f"{c.status:>4}  {c.name:<{width}}  {c.value:.6g}  (threshold {c.threshold:.6g})",
              file=stream)
    verdict = "PASS" if result.exit_code == EXIT_OK else "FAIL"
    print(f"{result.kind}: {verdict}", file=stream)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.load_config(args.config)
        if cfg.kind != args.kind:
            raise ConfigError(f"kind: config declares {cfg.kind!r} but subcommand is {args.kind!r}")
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed: expected a nonnegative integer")
            cfg.seed = args.seed
        result = run(cfg, args.out, self_check=args.self_check, plot=not args.no_plot,
                     gnuplot=args.emit_gnuplot)
    except INPUT_ERRORS as exc:
        print(f"freqlab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print_summary(result)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
