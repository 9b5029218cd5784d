"""Time accounting for inspection runs.

The yardstick is the inspect-everything baseline: population times the
mean scan duration.  A triangulated run only scans three containers per
phase, so its total detection time is far smaller; the difference is the
saved time (which can go negative when a run is inefficient).  All
durations are simulated seconds, written with two decimals.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Sequence

from .sdd import MODE_CONCURRENT, MODE_SEQUENTIAL, SCAN_MODES, total_scan_seconds

__all__ = [
    "DEFAULT_MEAN_SCAN_SECONDS",
    "TimingReport",
    "ChartRow",
    "t_saved",
    "baseline_time",
    "chart_series",
    "chart_csv",
    "chart_json",
    "Stopwatch",
]

# Mean per-container scan duration implied by the published 48-container
# baseline of 602.66 s.
DEFAULT_MEAN_SCAN_SECONDS = 602.66 / 48

CHART_CSV_HEADER = "n,t_other,t_d_seq,t_d_conc,t_saved"


def t_saved(t_other: float, t_d: float) -> float:
    """Exact saved-time subtraction; negative means the run was inefficient."""
    return t_other - t_d


def baseline_time(n: int, mean_scan_seconds: float) -> float:
    """Seconds to scan every container once, no triangulation."""
    if n < 1:
        raise ValueError(f"population must be >= 1, got {n}")
    if mean_scan_seconds <= 0:
        raise ValueError(f"mean scan seconds must be > 0, got {mean_scan_seconds}")
    return n * mean_scan_seconds


@dataclass(frozen=True)
class TimingReport:
    """Per-run time account.

    ``phase_scans`` keeps each phase's raw scan durations so both the
    sequential and the concurrent reading can be derived from one report;
    ``per_phase`` pairs them with sorting overhead under the report's own
    mode.
    """

    mode: str
    t_other: float
    phase_sorting: tuple[float, ...]
    phase_scans: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if self.mode not in SCAN_MODES:
            raise ValueError(f"unknown scan mode {self.mode!r}")
        if self.t_other < 0:
            raise ValueError("baseline time cannot be negative")
        if len(self.phase_sorting) != len(self.phase_scans):
            raise ValueError(
                f"{len(self.phase_sorting)} sorting entries vs "
                f"{len(self.phase_scans)} scan groups"
            )
        if any(s < 0 for s in self.phase_sorting):
            raise ValueError("sorting seconds cannot be negative")
        if any(d <= 0 for group in self.phase_scans for d in group):
            raise ValueError("scan durations must be positive")

    def detection_total(self, mode: str | None = None) -> float:
        mode = self.mode if mode is None else mode
        return sum(total_scan_seconds(group, mode) for group in self.phase_scans)

    @property
    def per_phase(self) -> tuple[tuple[float, float], ...]:
        return tuple(
            (sort, total_scan_seconds(group, self.mode))
            for sort, group in zip(self.phase_sorting, self.phase_scans)
        )

    @property
    def t_d(self) -> float:
        return sum(self.phase_sorting) + self.detection_total()

    @property
    def t_saved(self) -> float:
        return t_saved(self.t_other, self.t_d)


@dataclass(frozen=True)
class ChartRow:
    n: int
    t_other: float
    t_d_seq: float
    t_d_conc: float
    t_saved: float


def chart_series(runs: Sequence[tuple[int, TimingReport]]) -> tuple[ChartRow, ...]:
    """Population-vs-time rows for external plotting, sorted by n."""
    if not runs:
        raise ValueError("no runs to chart")
    seen: set[int] = set()
    rows = []
    for n, report in runs:
        if n in seen:
            raise ValueError(f"duplicate population {n} in chart series")
        seen.add(n)
        sorting = sum(report.phase_sorting)
        rows.append(
            ChartRow(
                n=n,
                t_other=report.t_other,
                t_d_seq=sorting + report.detection_total(MODE_SEQUENTIAL),
                t_d_conc=sorting + report.detection_total(MODE_CONCURRENT),
                t_saved=report.t_saved,
            )
        )
    return tuple(sorted(rows, key=lambda r: r.n))


def _fmt(seconds: float) -> str:
    return format(seconds, ".2f")


def chart_csv(rows: Sequence[ChartRow]) -> str:
    lines = [CHART_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.n},{_fmt(r.t_other)},{_fmt(r.t_d_seq)},{_fmt(r.t_d_conc)},{_fmt(r.t_saved)}"
        )
    return "\n".join(lines) + "\n"


def chart_json(rows: Sequence[ChartRow]) -> str:
    payload = [
        {
            "n": r.n,
            "t_other": round(r.t_other, 2),
            "t_d_seq": round(r.t_d_seq, 2),
            "t_d_conc": round(r.t_d_conc, 2),
            "t_saved": round(r.t_saved, 2),
        }
        for r in rows
    ]
    return json.dumps(payload, indent=2) + "\n"


class Stopwatch:
    """Wall-clock adapter for live runs; reads in whole centiseconds."""

    def __init__(self) -> None:
        self._started: float | None = None
        self.elapsed = 0.0

    def start(self) -> None:
        self._started = time.monotonic()

    def stop(self) -> float:
        if self._started is None:
            raise RuntimeError("stopwatch was never started")
        self.elapsed += round(time.monotonic() - self._started, 2)
        self._started = None
        return self.elapsed
