"""Figure rendering: four labelled population traces per scenario."""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .reader import TrajectoryTable, read_table

FIGURE_IDS = ("fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b", "fig5")

_TITLES = {
    "fig2a": "Driven circulation, drive stopped",
    "fig2b": "Driven circulation, continuous drive",
    "fig3a": "Persistent current, one link cut",
    "fig3b": "Persistent current through a bottleneck",
    "fig4a": "Self-confinement above threshold",
    "fig4b": "Self-depletion below threshold",
    "fig5": "Conveyor transport around the ring",
}

_LABELS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    csv_path: str
    out_path: str
    t_range: tuple[float, float] | None = None
    n_range: tuple[float, float] | None = None


def distinct_trace_count(table: TrajectoryTable, rtol: float = 1e-6) -> int:
    """Number of visually distinct population traces.

    Two wells merge when their traces never separate by more than rtol of
    the overall population scale (symmetric configurations overlap
    exactly, up to roundoff).
    """
    pops = table.populations
    tol = rtol * max(float(np.max(np.abs(pops))), 1.0)
    representatives: list[np.ndarray] = []
    for j in range(pops.shape[1]):
        trace = pops[:, j]
        if not any(np.max(np.abs(trace - rep)) <= tol
                   for rep in representatives):
            representatives.append(trace)
    return len(representatives)


def plot_figure(spec: FigureSpec) -> str:
    if spec.figure_id not in FIGURE_IDS:
        raise ValueError(f"unknown figure id {spec.figure_id!r}; "
                         f"use one of {', '.join(FIGURE_IDS)}")
    table = read_table(spec.csv_path)
    t = table.times
    pops = table.populations

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for j, label in enumerate(_LABELS):
        ax.plot(t, pops[:, j], color=f"C{j}", lw=1.2, label=label)
    ax.set_xlabel(r"$t\ [1/\omega_R]$")
    ax.set_ylabel("atoms per well")
    ax.set_title(_TITLES[spec.figure_id])
    if spec.t_range is not None:
        ax.set_xlim(*spec.t_range)
    if spec.n_range is not None:
        ax.set_ylim(*spec.n_range)
    ax.legend(loc="upper right", frameon=False, ncol=4)
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=150)
    plt.close(fig)
    return spec.out_path
