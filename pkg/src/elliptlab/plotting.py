"""Matplotlib figures for experiment reports, written as deterministic SVG."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (np.sqrt(5) - 1.0) / 2.0
STYLE = {
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "figure.figsize": [4.8, 4.8 * GOLDEN],
    "svg.hashsalt": "elliptlab",
    "svg.fonttype": "none",
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def energy_vs_level(report, path):
    """Discrete minima per refinement level against the competitor energy."""
    rows = report.table
    rings = [r["rings"] for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(rings, [r["energy"] for r in rows], "o-", label="discrete minimum")
        ax.axhline(report.value("competitor_energy"), color="k", ls="--", label=r"$c_1 h^p$")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("rings")
        ax.set_ylabel("energy")
        ax.legend(frameon=False)
        return _save(fig, path)


def amplitude_scaling(report, path):
    """Log-log plot of the interior gradient bound against the mean energy density."""
    rows = report.table
    x = np.array([r["avg_F"] for r in rows])
    y = np.array([r["sup_grad_half"] for r in rows])
    s, b = report.value("slope"), report.value("intercept")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(x, y, "o", label="measured")
        ax.loglog(x, np.exp(b) * x**s, "-", label=f"fit, slope {s:.3f}")
        ax.set_xlabel(r"$\langle F(Du)\rangle_B$")
        ax.set_ylabel(r"$\|Du\|_{L^\infty(B/2)}$")
        ax.legend(frameon=False)
        return _save(fig, path)


def gradient_vs_level(report, path):
    """Max gradient near the origin per level for each regime of a blow-up probe."""
    levels = report.inputs["levels"]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name in ("subcritical", "supercritical", "control"):
            ax.plot(levels, report.value(f"{name}_max_gradient"), "o-", label=name)
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.set_xlabel("rings")
        ax.set_ylabel(r"$\max |Du|$")
        ax.legend(frameon=False)
        return _save(fig, path)


def ratio_vs_level(report, path):
    """Empirical constant of the potential bound per refinement level."""
    rows = report.table
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot([r["rings"] for r in rows], [r["max_ratio"] for r in rows], "o-")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("rings")
        ax.set_ylabel("max ratio")
        return _save(fig, path)


FIGURES = {
    "zhikov-gap": energy_vs_level,
    "scaling": amplitude_scaling,
    "blowup-probe": gradient_vs_level,
    "pppot-check": ratio_vs_level,
}
