"""Triangulated inspection over a shrinking rectangular frame.

Each phase inspects one container from each of three sides of the active
frame (alpha: the top-numbered row, beta: the right column, gamma: the
left column), feeds the verdicts to the estimator, then contracts the
frame per the configured schedule.  The run ends when the frame cannot
contract further or the whole yard is classified.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .estimator import (
    DEFAULT_STEP_FRACTION,
    Profile,
    Verdict,
    estimate,
    propagation_reach,
)
from .grid import Coord, Grid, GridError, coord_to_label

__all__ = [
    "ScheduleError",
    "PhaseOrderError",
    "VerdictCoverageError",
    "Rect",
    "TriangleFrame",
    "Suggestion",
    "SideTargets",
    "SessionState",
    "PhaseResult",
    "SCHEDULES",
    "SAMPLERS",
    "initial_frame",
    "contract",
    "van_der_corput",
    "suggest",
    "targets_from_labels",
    "run_phase",
    "propagation_reach",
]

SCHEDULES = ("inset1", "paper48", "paper56")
SAMPLERS = ("uniform", "quasi")

MIN_TRIANGULATION_POPULATION = 3
INSPECTIONS_PER_PHASE = 3


class ScheduleError(ValueError):
    """Raised when a schedule cannot apply to the given yard."""


class PhaseOrderError(RuntimeError):
    """Raised on out-of-order phase submissions (double submit, terminal)."""


class VerdictCoverageError(ValueError):
    """Raised when submitted verdicts do not match the suggested labels."""

    def __init__(self, message: str, labels: Sequence[str]):
        super().__init__(message)
        self.labels = tuple(labels)


@dataclass(frozen=True)
class Rect:
    """Inclusive column/row bounds of the active frame."""

    col_lo: int
    col_hi: int
    row_lo: int
    row_hi: int

    def __post_init__(self) -> None:
        if self.col_lo > self.col_hi or self.row_lo > self.row_hi:
            raise ValueError(f"degenerate rect {self}")

    @property
    def width(self) -> int:
        return self.col_hi - self.col_lo + 1

    @property
    def height(self) -> int:
        return self.row_hi - self.row_lo + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains(self, coord: Coord) -> bool:
        return (
            self.col_lo <= coord[0] <= self.col_hi
            and self.row_lo <= coord[1] <= self.row_hi
        )

    def coords(self) -> Iterable[Coord]:
        """Row-major: row by row bottom-up, columns left to right."""
        for row in range(self.row_lo, self.row_hi + 1):
            for col in range(self.col_lo, self.col_hi + 1):
                yield (col, row)

    def labels(self) -> list[str]:
        return [coord_to_label(c) for c in self.coords()]


@dataclass(frozen=True)
class TriangleFrame:
    """The three inspection sides of the active rect for one phase."""

    phase: int
    rect: Rect

    @property
    def alpha(self) -> tuple[str, ...]:
        """Top-numbered row, columns left to right."""
        r = self.rect
        return tuple(coord_to_label((c, r.row_hi)) for c in range(r.col_lo, r.col_hi + 1))

    @property
    def beta(self) -> tuple[str, ...]:
        """Right column, rows bottom to top."""
        r = self.rect
        return tuple(coord_to_label((r.col_hi, w)) for w in range(r.row_lo, r.row_hi + 1))

    @property
    def gamma(self) -> tuple[str, ...]:
        """Left column, rows bottom to top."""
        r = self.rect
        return tuple(coord_to_label((r.col_lo, w)) for w in range(r.row_lo, r.row_hi + 1))

    @property
    def sides(self) -> tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]:
        return (self.alpha, self.beta, self.gamma)

    @property
    def side_populations(self) -> tuple[int, int, int]:
        return (len(self.alpha), len(self.beta), len(self.gamma))

    @property
    def population(self) -> int:
        return self.rect.area


@dataclass(frozen=True)
class Suggestion:
    """One label per side, drawn by the configured sampler."""

    phase: int
    alpha: str
    beta: str
    gamma: str

    @property
    def labels(self) -> tuple[str, ...]:
        out: list[str] = []
        for label in (self.alpha, self.beta, self.gamma):
            if label not in out:
                out.append(label)
        return tuple(out)

    def as_targets(self) -> "SideTargets":
        return SideTargets(
            phase=self.phase,
            alpha=(self.alpha,),
            beta=(self.beta,),
            gamma=(self.gamma,),
        )


@dataclass(frozen=True)
class SideTargets:
    """Labels to inspect this phase, grouped by the side that owns them.

    Sampled suggestions carry one label per side; fixture scripts may put
    several labels on a side, and a corner label may appear on more than
    one side at once.
    """

    phase: int
    alpha: tuple[str, ...]
    beta: tuple[str, ...]
    gamma: tuple[str, ...]

    @property
    def union(self) -> tuple[str, ...]:
        out: list[str] = []
        for group in (self.alpha, self.beta, self.gamma):
            for label in group:
                if label not in out:
                    out.append(label)
        return tuple(out)


def initial_frame(grid: Grid) -> TriangleFrame:
    """Phase-1 frame: the whole yard."""
    if grid.population < MIN_TRIANGULATION_POPULATION:
        raise GridError(
            f"triangulation needs at least {MIN_TRIANGULATION_POPULATION} "
            f"containers, got {grid.population}; surface-scan-only mode "
            "handles smaller yards"
        )
    return TriangleFrame(
        phase=1,
        rect=Rect(0, grid.cols - 1, 0, grid.rows - 1),
    )


# Hard-coded frames reproducing the published 4x12 walkthrough.
_PAPER48_RECTS = {
    1: Rect(0, 3, 0, 11),
    2: Rect(1, 3, 1, 10),
    3: Rect(2, 3, 7, 9),
}


def _inset_all_sides(rect: Rect) -> Rect:
    col_lo = min(rect.col_lo + 1, rect.col_hi)
    col_hi = max(rect.col_hi - 1, col_lo)
    row_lo = min(rect.row_lo + 1, rect.row_hi)
    row_hi = max(rect.row_hi - 1, row_lo)
    return Rect(col_lo, col_hi, row_lo, row_hi)


def contract(frame: TriangleFrame, schedule: str, next_phase: int | None = None) -> TriangleFrame | None:
    """Frame for the following phase, or None when the run is over."""
    if next_phase is None:
        next_phase = frame.phase + 1
    if next_phase != frame.phase + 1:
        raise PhaseOrderError(
            f"cannot contract from phase {frame.phase} to {next_phase}"
        )
    if schedule == "paper48":
        if frame.rect != _PAPER48_RECTS.get(frame.phase):
            raise ScheduleError(
                "paper48 is a fixture schedule for the 4x12 yard; "
                f"frame {frame.rect} is not on its track"
            )
        nxt = _PAPER48_RECTS.get(next_phase)
        return None if nxt is None else TriangleFrame(phase=next_phase, rect=nxt)
    if schedule == "paper56":
        r = frame.rect
        if r.width < 3 or r.height < 2:
            return None
        nxt = Rect(r.col_lo + 1, r.col_hi - 1, r.row_lo, r.row_hi - 1)
        if nxt.area >= r.area or nxt.area < MIN_TRIANGULATION_POPULATION:
            return None
        return TriangleFrame(phase=next_phase, rect=nxt)
    if schedule == "inset1":
        nxt = _inset_all_sides(frame.rect)
        if nxt.area >= frame.rect.area or nxt.area < MIN_TRIANGULATION_POPULATION:
            return None
        return TriangleFrame(phase=next_phase, rect=nxt)
    raise ScheduleError(f"unknown contraction schedule {schedule!r}")


def van_der_corput(index: int, base: int = 2) -> float:
    """Radical-inverse low-discrepancy position for a 1-based index."""
    if index < 1:
        raise ValueError(f"index must be >= 1, got {index}")
    pos, denom = 0.0, 1.0
    n = index
    while n > 0:
        n, digit = divmod(n, base)
        denom *= base
        pos += digit / denom
    return pos


def _pick(side: Sequence[str], position: float) -> str:
    return side[min(int(position * len(side)), len(side) - 1)]


def suggest(frame: TriangleFrame, sampler: str, rng_seed: int) -> Suggestion:
    """Draw one label per side; deterministic for fixed inputs.

    The uniform sampler reseeds per phase so repeated calls before a
    submission return the same draw.  The quasi sampler walks a van der
    Corput base-2 sequence, three positions per phase.
    """
    if sampler == "quasi":
        base_index = (frame.phase - 1) * 3
        picks = [
            _pick(side, van_der_corput(base_index + i + 1))
            for i, side in enumerate(frame.sides)
        ]
    elif sampler == "uniform":
        rng = random.Random(rng_seed * 1_000_003 + frame.phase)
        picks = [side[rng.randrange(len(side))] for side in frame.sides]
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
    return Suggestion(phase=frame.phase, alpha=picks[0], beta=picks[1], gamma=picks[2])


def targets_from_labels(frame: TriangleFrame, labels: Sequence[str]) -> SideTargets:
    """Assign scripted labels to every side that carries them.

    Every side must end up with at least one label and every label must
    sit on at least one side of the frame.
    """
    groups: dict[str, list[str]] = {"alpha": [], "beta": [], "gamma": []}
    sides = {"alpha": frame.alpha, "beta": frame.beta, "gamma": frame.gamma}
    stray = []
    for label in labels:
        on_any = False
        for name, side in sides.items():
            if label in side:
                groups[name].append(label)
                on_any = True
        if not on_any:
            stray.append(label)
    if stray:
        raise VerdictCoverageError(
            f"labels not on any side of the phase-{frame.phase} frame: "
            + ", ".join(stray),
            stray,
        )
    empty = [name for name, group in groups.items() if not group]
    if empty:
        raise VerdictCoverageError(
            f"no label covers side(s) {', '.join(empty)} in phase {frame.phase}",
            empty,
        )
    # Keep side order (alpha left-to-right, beta/gamma bottom-to-top).
    return SideTargets(
        phase=frame.phase,
        alpha=tuple(l for l in frame.alpha if l in groups["alpha"]),
        beta=tuple(l for l in frame.beta if l in groups["beta"]),
        gamma=tuple(l for l in frame.gamma if l in groups["gamma"]),
    )


@dataclass(frozen=True)
class PhaseResult:
    """Everything recorded for one completed phase."""

    phase: int
    frame: TriangleFrame
    targets: SideTargets
    verdicts: tuple[Verdict, ...]
    profile: Profile
    sorting_seconds: float
    scan_seconds: tuple[float, ...]
    terminal: bool

    @property
    def inspections(self) -> int:
        return INSPECTIONS_PER_PHASE


@dataclass
class SessionState:
    """Mutable state of one triangulation run.

    ``phase_step`` counts completed phases; it is 0 before any record
    exists.  Mutation must be serialized by the caller; concurrent runs
    over different states are independent.
    """

    grid: Grid
    schedule: str = "inset1"
    sampler: str = "uniform"
    rng_seed: int = 0
    metric: str = "euclidean"
    step_fraction: float = DEFAULT_STEP_FRACTION
    frames: list[TriangleFrame] = field(default_factory=list)
    records: list[PhaseResult] = field(default_factory=list)
    seeds: list[Verdict] = field(default_factory=list)
    terminal: bool = False
    profile: Profile | None = None

    def __post_init__(self) -> None:
        if self.schedule not in SCHEDULES:
            raise ScheduleError(f"unknown contraction schedule {self.schedule!r}")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.schedule == "paper48" and (self.grid.cols, self.grid.rows) != (4, 12):
            raise ScheduleError(
                "paper48 is a fixture schedule for the 4x12 yard, "
                f"not {self.grid.cols}x{self.grid.rows}"
            )
        if not self.frames:
            self.frames.append(initial_frame(self.grid))

    @property
    def phase_step(self) -> int:
        return len(self.records)

    @property
    def current_frame(self) -> TriangleFrame | None:
        return None if self.terminal else self.frames[-1]

    @property
    def inspections(self) -> int:
        return sum(r.inspections for r in self.records)

    def suggestion(self) -> Suggestion:
        frame = self.current_frame
        if frame is None:
            raise PhaseOrderError("run is terminal; nothing left to suggest")
        return suggest(frame, self.sampler, self.rng_seed)


def run_phase(
    state: SessionState,
    targets: SideTargets | Suggestion,
    verdicts: Mapping[str, Verdict],
    *,
    sorting_seconds: float = 0.0,
    scan_seconds: Sequence[float] = (),
) -> PhaseResult:
    """Record one phase: merge verdicts, re-estimate, contract the frame.

    Verdicts must cover exactly the target labels.  The inspection count
    for a phase is always 3, also when a fixture script puts several
    labels on one side.
    """
    if isinstance(targets, Suggestion):
        targets = targets.as_targets()
    frame = state.current_frame
    if frame is None:
        raise PhaseOrderError("run is terminal; no further phases accepted")
    if targets.phase != frame.phase:
        raise PhaseOrderError(
            f"targets are for phase {targets.phase}, current phase is {frame.phase}"
        )
    wanted = set(targets.union)
    got = set(verdicts)
    missing = sorted(wanted - got)
    if missing:
        raise VerdictCoverageError(
            "missing verdict(s) for suggested label(s): " + ", ".join(missing),
            missing,
        )
    extra = sorted(got - wanted)
    if extra:
        raise VerdictCoverageError(
            "verdict(s) for label(s) that were not suggested: " + ", ".join(extra),
            extra,
        )
    for label, verdict in verdicts.items():
        if verdict.label != label:
            raise VerdictCoverageError(
                f"verdict keyed {label!r} carries label {verdict.label!r}",
                [label],
            )

    ordered = tuple(verdicts[label] for label in targets.union)
    state.seeds.extend(ordered)

    next_frame = contract(frame, state.schedule)
    terminal = next_frame is None
    profile = estimate(
        state.seeds,
        state.grid,
        frame.phase,
        terminal=terminal,
        metric=state.metric,
        step_fraction=state.step_fraction,
    )
    if not terminal and profile.ratio == 1.0:
        terminal = True  # nothing left to classify
        next_frame = None

    result = PhaseResult(
        phase=frame.phase,
        frame=frame,
        targets=targets,
        verdicts=ordered,
        profile=profile,
        sorting_seconds=float(sorting_seconds),
        scan_seconds=tuple(float(s) for s in scan_seconds),
        terminal=terminal,
    )
    state.records.append(result)
    state.profile = profile
    state.terminal = terminal
    if next_frame is not None:
        state.frames.append(next_frame)
    return result
