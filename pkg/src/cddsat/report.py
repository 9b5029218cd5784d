"""Figure rendering for runs and benchmark series.

Everything draws through the Agg backend and lands in PNG files next to
the delimited exports; nothing here opens a window.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from .estimator import Profile
from .grid import Grid, coord_to_label
from .timing import ChartRow, TimingReport

__all__ = [
    "save_profile_figure",
    "save_run_timing_figure",
    "save_timing_series_figure",
]

STATUS_COLORS = {
    "Red": "#c0392b",
    "Orange": "#e67e22",
    "Green": "#27ae60",
    None: "#d5d8dc",
}


def _status_lookup(profile: Profile | None) -> dict[str, str]:
    if profile is None:
        return {}
    lookup: dict[str, str] = {}
    for name, group in (("Red", profile.reds), ("Orange", profile.oranges), ("Green", profile.greens)):
        for label in group:
            lookup[label] = name
    return lookup


def save_profile_figure(
    grid: Grid,
    profile: Profile | None,
    path: str | Path,
    *,
    highlight: Iterable[str] = (),
    title: str = "yard profile",
) -> Path:
    """Draw the yard as colored cells, row 1 at the bottom.

    ``highlight`` cells (the current suggestion) get a heavy outline.
    """
    path = Path(path)
    lookup = _status_lookup(profile)
    outlined = set(highlight)
    cell = 0.55
    fig_w = max(3.0, grid.cols * cell + 1.2)
    fig_h = max(2.6, grid.rows * cell + 1.4)
    fig, ax = plt.subplots(figsize=(fig_w, fig_h))
    for col, row in grid.coords():
        label = coord_to_label((col, row))
        ax.add_patch(
            Rectangle(
                (col, row),
                1,
                1,
                facecolor=STATUS_COLORS[lookup.get(label)],
                edgecolor="black",
                linewidth=2.2 if label in outlined else 0.4,
                zorder=2 if label in outlined else 1,
            )
        )
        if grid.population <= 220:
            ax.text(
                col + 0.5,
                row + 0.5,
                label,
                ha="center",
                va="center",
                fontsize=7,
                zorder=3,
            )
    ax.set_xlim(-0.2, grid.cols + 0.2)
    ax.set_ylim(-0.2, grid.rows + 0.2)
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])
    ratio = "" if profile is None else f"  (classified {profile.ratio:.2%})"
    ax.set_title(f"{title}{ratio}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_run_timing_figure(report: TimingReport, path: str | Path, *, population: int) -> Path:
    """Bars: inspect-all baseline vs this run's detection totals."""
    from .sdd import MODE_CONCURRENT, MODE_SEQUENTIAL

    path = Path(path)
    sorting = sum(report.phase_sorting)
    bars = {
        f"scan all {population}": report.t_other,
        "run (sequential)": sorting + report.detection_total(MODE_SEQUENTIAL),
        "run (concurrent)": sorting + report.detection_total(MODE_CONCURRENT),
    }
    fig, ax = plt.subplots(figsize=(5.4, 3.4))
    names = list(bars)
    values = [bars[k] for k in names]
    ax.bar(names, values, color=["#7f8c8d", "#2980b9", "#16a085"])
    for i, v in enumerate(values):
        ax.text(i, v, f"{v:.2f}", ha="center", va="bottom", fontsize=8)
    ax.set_ylabel("seconds")
    ax.set_title(f"time to verdict (saved {report.t_saved:.2f} s)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_timing_series_figure(rows: Sequence[ChartRow], path: str | Path) -> Path:
    """Population-vs-time curves for a benchmark series."""
    path = Path(path)
    ns = [r.n for r in rows]
    fig, ax = plt.subplots(figsize=(5.8, 3.6))
    ax.plot(ns, [r.t_other for r in rows], marker="o", label="scan all")
    ax.plot(ns, [r.t_d_seq for r in rows], marker="s", label="run, sequential")
    ax.plot(ns, [r.t_d_conc for r in rows], marker="^", label="run, concurrent")
    ax.set_xlabel("population")
    ax.set_ylabel("seconds")
    ax.set_title("detection time vs population")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
