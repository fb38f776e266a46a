"""Standalone SVG line plots of diagnostics and sweep tables."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .diagnostics import DiagnosticSeries  # noqa: E402

__all__ = ["SERIES_COMPONENTS", "SWEEP_COLUMNS", "plot_csv", "plot_series", "plot_sweep"]

SERIES_COMPONENTS = ("E_kin", "E_phi_e", "E_fluct", "K_mod", "H_mod", "energy",
                     "H_fp", "free_energy", "dist_L1", "dist_Hminus1")
SWEEP_COLUMNS = ("eps", "H_T", "dist_Hminus1_T")

# fixed metadata keeps repeated renders byte-identical
_SVG_META = {"Date": None, "Creator": "quasineutral"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def plot_series(series: DiagnosticSeries, out_dir) -> list:
    """One SVG per energy or distance column, plotted against ``t``."""
    t = series["t"]
    paths = []
    for name in SERIES_COMPONENTS:
        if name not in series.columns:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(t, series[name], lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel(name)
        fig.tight_layout()
        paths.append(_save(fig, os.path.join(out_dir, f"{name}.svg")))
    return paths


def plot_sweep(series: DiagnosticSeries, out_dir) -> list:
    """Log-log ``H(T)`` and ``H^-1`` distance against ``eps``."""
    eps = series["eps"]
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.loglog(eps, series["H_T"], "o-", label="H(T)")
    ax.loglog(eps, series["dist_Hminus1_T"], "s--", label="H^-1 distance at T")
    ax.set_xlabel("eps")
    ax.legend()
    fig.tight_layout()
    return [_save(fig, os.path.join(out_dir, "sweep.svg"))]


def plot_csv(path, out_dir) -> list:
    """Dispatch on the CSV schema; raises ``ValueError`` for empty or unknown tables."""
    series = DiagnosticSeries.from_csv(path)
    if not series.rows:
        raise ValueError(f"{path}: no data rows")
    os.makedirs(out_dir, exist_ok=True)
    cols = set(series.columns)
    if set(SWEEP_COLUMNS) <= cols:
        return plot_sweep(series, out_dir)
    if "t" in cols and cols & set(SERIES_COMPONENTS):
        return plot_series(series, out_dir)
    raise ValueError(f"{path}: columns {sorted(cols)} match no known schema")

