"""Figures written next to the CSV reports (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "legend.fontsize": 8,
    "legend.frameon": False,
}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-stable
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def profile_figure(profile, path: Path, title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.2))
        ok = profile.valid
        ax1.plot(profile.radii[ok], profile.N[ok], "-o", label="N(r)")
        ax1.set_xlabel("r")
        ax1.set_ylabel("frequency")
        ax1.legend()
        ax2.loglog(profile.radii, profile.H, label="H(r)")
        ax2.loglog(profile.radii, profile.h, "--", label="h(r)")
        ax2.set_xlabel("r")
        ax2.legend()
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def monotonicity_figure(reports, path: Path, title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for rep in reports:
            ax.plot(rep.radii, rep.quantity, "-", label=f"{rep.label}, C={rep.constant:.3g}")
        ax.set_xlabel("r")
        ax.set_ylabel("monitored quantity")
        ax.legend()
        if title:
            ax.set_title(title)
        return _save(fig, path)


def sweep_figure(rows, path: Path, max_C: float | None = None) -> Path:
    """``C_emp`` per family member, one marker series per radii triple."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        triples = sorted({(r["r1"], r["r2"], r["r3"]) for r in rows})
        for t in triples:
            sel = [r for r in rows if (r["r1"], r["r2"], r["r3"]) == t]
            ax.plot(np.arange(len(sel)), [r["C_emp"] for r in sel], "o", label=str(t))
        if max_C is not None:
            ax.axhline(max_C, color="k", lw=0.8, ls=":")
        ax.set_xlabel("family member")
        ax.set_ylabel("calibrated constant")
        ax.legend()
        return _save(fig, path)


def order_figure(estimate, path: Path, title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(estimate.radii, estimate.h, "o", label="h(r)")
        x = np.log(estimate.radii)
        icpt = np.mean(np.log(estimate.h) - estimate.slope * x)
        ax.loglog(estimate.radii, np.exp(icpt + estimate.slope * x), "-",
                  label=f"slope {estimate.slope:.4f}")
        ax.set_xlabel("r")
        ax.legend()
        if title:
            ax.set_title(title)
        return _save(fig, path)


def chain_figure(cert, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        steps = [s.index for s in cert.steps]
        ax.plot(steps, [np.log(s.ball_sup) for s in cert.steps], "-", label="log sup B_r(x_i)")
        bound = np.array([s.log_bound for s in cert.steps])
        ax.plot(steps, np.sign(bound) * np.log1p(np.abs(bound)), "--",
                label="signed log(1+|log bound|)")
        ax.set_xlabel("step")
        ax.legend()
        return _save(fig, path)


def doubling_figure(reports, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, reps in reports.items():
            ax.semilogx([r.R for r in reps], [r.ratio for r in reps], "-o", label=label)
        ax.set_xlabel("R")
        ax.set_ylabel("h(2R)/h(R)")
        ax.legend()
        return _save(fig, path)
