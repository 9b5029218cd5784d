"""Damage-status banding and proximity estimation.

A handful of inspected containers ("seeds") carry measured damage
probabilities.  Every other slot in the yard gets an estimated probability
from its nearest seeds: full strength within the propagation reach of a
seed, decaying like 1/distance beyond it.  Cells stay unclassified until
the growing coverage radius of the inspection reaches them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .grid import Coord, Grid, coord_to_label, distance

__all__ = [
    "Status",
    "GREEN_BELOW",
    "RED_ABOVE",
    "band",
    "nominal_p",
    "Verdict",
    "Profile",
    "propagation_reach",
    "influence",
    "coverage_radius",
    "estimate",
    "DEFAULT_STEP_FRACTION",
]

GREEN_BELOW = 0.2
RED_ABOVE = 0.5

# Each phase inspects three containers, so coverage advances by a third of
# the propagation reach per completed phase.
DEFAULT_STEP_FRACTION = 1.0 / 3.0


class Status(enum.Enum):
    """Traffic-light damage band."""

    GREEN = "Green"
    ORANGE = "Orange"
    RED = "Red"

    @property
    def wire(self) -> str:
        return self.value

    @classmethod
    def from_wire(cls, text: str) -> "Status":
        for status in cls:
            if status.value.lower() == text.strip().lower():
                return status
        raise ValueError(f"unknown status {text!r}")


def band(p: float) -> Status:
    """Band a probability: green below 0.2, red above 0.5, orange between.

    Both boundary values (0.2 and 0.5) band to orange.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    if p < GREEN_BELOW:
        return Status.GREEN
    if p > RED_ABOVE:
        return Status.RED
    return Status.ORANGE


def nominal_p(status: Status) -> float:
    """Representative probability for a banded-only verdict."""
    return {Status.GREEN: 0.10, Status.ORANGE: 0.35, Status.RED: 0.75}[status]


@dataclass(frozen=True)
class Verdict:
    """Inspection outcome for a single container."""

    label: str
    status: Status
    p: float

    def __post_init__(self) -> None:
        if band(self.p) is not self.status:
            raise ValueError(
                f"verdict for {self.label}: p={self.p} bands to "
                f"{band(self.p).wire}, not {self.status.wire}"
            )

    @classmethod
    def from_status(cls, label: str, status: Status) -> "Verdict":
        return cls(label=label, status=status, p=nominal_p(status))

    @classmethod
    def from_p(cls, label: str, p: float) -> "Verdict":
        return cls(label=label, status=band(p), p=p)


def propagation_reach(population: int) -> float:
    """How far one inspection speaks for its neighbours: sqrt(n) + 1."""
    if population < 1:
        raise ValueError(f"population must be >= 1, got {population}")
    return math.sqrt(population) + 1.0


def influence(seed_p: float, d: float, reach: float) -> float:
    """Estimated probability contributed by one seed at distance ``d``.

    Within the reach the seed speaks at full strength; beyond it the
    contribution decays with 1/distance.
    """
    if d < 0:
        raise ValueError(f"distance must be >= 0, got {d}")
    return seed_p * min(1.0, reach / max(d, 1.0))


def coverage_radius(phase: int, reach: float, step_fraction: float) -> float:
    """Radius of yard already spoken for after ``phase - 1`` completed steps."""
    if phase < 1:
        raise ValueError(f"phase must be >= 1, got {phase}")
    return (phase - 1) * reach * step_fraction


@dataclass(frozen=True)
class Profile:
    """Estimated status of every classified slot after some phase."""

    phase: int
    population: int
    reds: tuple[str, ...]
    oranges: tuple[str, ...]
    greens: tuple[str, ...]
    p_by_label: Mapping[str, float] = field(hash=False)

    @property
    def classified(self) -> int:
        return len(self.reds) + len(self.oranges) + len(self.greens)

    @property
    def ratio(self) -> float:
        return self.classified / self.population

    def status_of(self, label: str) -> Status | None:
        if label in self.reds:
            return Status.RED
        if label in self.oranges:
            return Status.ORANGE
        if label in self.greens:
            return Status.GREEN
        return None


def _coord_sorted(labels: Iterable[str], grid: Grid) -> tuple[str, ...]:
    return tuple(sorted(labels, key=grid.require))


def estimate(
    seeds: Sequence[Verdict],
    grid: Grid,
    phase: int,
    *,
    terminal: bool = False,
    metric: str = "euclidean",
    step_fraction: float = DEFAULT_STEP_FRACTION,
) -> Profile:
    """Spread seed verdicts across the yard and band what is covered.

    Seeds keep their measured probability verbatim.  Any other slot within
    the current coverage radius of its nearest seed takes the strongest
    influence over all seeds.  A terminal profile classifies everything.
    """
    if not seeds:
        raise ValueError("cannot estimate from zero seeds")
    latest: dict[str, Verdict] = {}
    for v in seeds:
        grid.require(v.label)
        latest[v.label] = v  # re-inspection supersedes the earlier verdict

    reach = propagation_reach(grid.population)
    radius = coverage_radius(phase, reach, step_fraction)
    seed_coords: list[tuple[Coord, Verdict]] = [
        (grid.require(v.label), v) for v in latest.values()
    ]

    p_by_label: dict[str, float] = {}
    buckets: dict[Status, list[str]] = {s: [] for s in Status}
    for coord in grid.coords():
        label = coord_to_label(coord)
        if label in latest:
            v = latest[label]
            p_by_label[label] = v.p
            buckets[v.status].append(label)
            continue
        best_p = 0.0
        nearest = math.inf
        for seed_coord, v in seed_coords:
            d = distance(coord, seed_coord, metric)
            nearest = min(nearest, d)
            best_p = max(best_p, influence(v.p, d, reach))
        if terminal or nearest <= radius:
            p_by_label[label] = best_p
            buckets[band(best_p)].append(label)

    return Profile(
        phase=phase,
        population=grid.population,
        reds=_coord_sorted(buckets[Status.RED], grid),
        oranges=_coord_sorted(buckets[Status.ORANGE], grid),
        greens=_coord_sorted(buckets[Status.GREEN], grid),
        p_by_label=p_by_label,
    )
