from pathlib import Path
from typing import List

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from willflow.log import logger
from willflow.io import DiagnosticsRow, read_diagnostics

mutedblack = "#1a1a1a"


def _column(rows: List[DiagnosticsRow], name: str) -> np.ndarray:
    return np.array([getattr(r, name) for r in rows], dtype=float)


def plot_energies(axes, rows: List[DiagnosticsRow]):
    """W0 and the dissipation balance over time on a log scale."""
    t = _column(rows, "t")
    axes.semilogy(t, _column(rows, "w0"), color=mutedblack, lw=1.5, label=r"$W_0$")
    axes.semilogy(t, -_column(rows, "diss_rhs"), color="tab:blue", lw=1, label=r"$\int |\delta W|^2$")
    axes.semilogy(
        t, np.abs(_column(rows, "diss_lhs") - _column(rows, "diss_rhs")),
        color="tab:red", lw=1, ls="--", label="dissipation defect",
    )
    axes.set_xlabel("t")
    axes.legend(frameon=False, fontsize=8)


def plot_gauge_monitors(axes, rows: List[DiagnosticsRow]):
    """Hopf, balance and Noether residuals."""
    t = _column(rows, "t")
    floor = 1e-300
    for name, color in [("hopf", "tab:green"), ("balance", "tab:orange"), ("r1", "tab:purple"), ("r4", "tab:brown")]:
        axes.semilogy(t, np.maximum(np.abs(_column(rows, name)), floor), color=color, lw=1, label=name)
    axes.set_xlabel("t")
    axes.legend(frameon=False, fontsize=8)


def plot_ratios(axes, rows: List[DiagnosticsRow]):
    t = _column(rows, "t")
    axes.plot(t, _column(rows, "dlm_ratio"), color=mutedblack, lw=1, label=r"dlm / $\sqrt{W_0}$")
    axes.plot(t, _column(rows, "area_ratio"), color="tab:red", lw=1, label="area ratio")
    axes.set_xlabel("t")
    axes.legend(frameon=False, fontsize=8)


def plot_diagnostics(csv_path, output=None) -> Path:
    """Renders a diagnostics table to a PNG next to it (or to ``output``).

    Uses the Agg canvas directly, so no display is needed.
    """
    rows = read_diagnostics(csv_path)
    output = Path(output) if output is not None else Path(csv_path).with_suffix(".png")
    fig = Figure(figsize=(12, 3.5))
    FigureCanvasAgg(fig)
    axes = fig.subplots(1, 3)
    if rows:
        plot_energies(axes[0], rows)
        plot_gauge_monitors(axes[1], rows)
        plot_ratios(axes[2], rows)
    for ax, title in zip(axes, ["energy", "gauge monitors", "ratios"]):
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(output, dpi=150)
    logger.info("Saved diagnostics plot to {}.".format(output))
    return output
