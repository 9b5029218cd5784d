"""Container yard geometry: spreadsheet-style labels, coordinates, distances.

Columns are lettered A, B, ..., Z, AA, AB, ... (bijective base 26) and rows
are numbered from 1.  Internally everything is a zero-based ``(col, row)``
pair; row 0 is the bottom row of the yard.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator

__all__ = [
    "LabelError",
    "GridError",
    "Coord",
    "Grid",
    "column_letters",
    "column_index",
    "coord_to_label",
    "label_to_coord",
    "build_grid",
    "distance",
    "MET_EUCLIDEAN",
    "MET_CHEBYSHEV",
]

MET_EUCLIDEAN = "euclidean"
MET_CHEBYSHEV = "chebyshev"
METRICS = (MET_EUCLIDEAN, MET_CHEBYSHEV)

_LABEL_RE = re.compile(r"^([A-Z]+)([1-9][0-9]*)$")

Coord = tuple[int, int]


class LabelError(ValueError):
    """Raised for text that is not a well-formed container label."""


class GridError(ValueError):
    """Raised for impossible yard dimensions."""


def column_letters(index: int) -> str:
    """Letters for a zero-based column index (0 -> A, 25 -> Z, 26 -> AA)."""
    if index < 0:
        raise ValueError(f"column index must be >= 0, got {index}")
    letters = ""
    n = index + 1
    while n > 0:
        n, rem = divmod(n - 1, 26)
        letters = chr(ord("A") + rem) + letters
    return letters


def column_index(letters: str) -> int:
    """Inverse of :func:`column_letters`."""
    if not letters or not all("A" <= ch <= "Z" for ch in letters):
        raise LabelError(f"bad column letters: {letters!r}")
    n = 0
    for ch in letters:
        n = n * 26 + (ord(ch) - ord("A") + 1)
    return n - 1


def coord_to_label(coord: Coord) -> str:
    col, row = coord
    if col < 0 or row < 0:
        raise ValueError(f"coordinates must be non-negative, got {coord}")
    return f"{column_letters(col)}{row + 1}"


def label_to_coord(label: str) -> Coord:
    """Parse ``"B7"`` into ``(1, 6)``.  Rejects lowercase, leading zeros, row 0."""
    m = _LABEL_RE.match(label)
    if m is None:
        raise LabelError(f"bad container label: {label!r}")
    return column_index(m.group(1)), int(m.group(2)) - 1


@dataclass(frozen=True)
class Grid:
    """A rectangular yard of ``cols`` x ``rows`` container slots."""

    cols: int
    rows: int

    def __post_init__(self) -> None:
        if self.cols < 1 or self.rows < 1:
            raise GridError(f"grid needs positive dimensions, got {self.cols}x{self.rows}")

    @property
    def population(self) -> int:
        return self.cols * self.rows

    def contains(self, coord: Coord) -> bool:
        col, row = coord
        return 0 <= col < self.cols and 0 <= row < self.rows

    def require(self, label: str) -> Coord:
        """Parse a label and check it falls inside this yard."""
        coord = label_to_coord(label)
        if not self.contains(coord):
            raise LabelError(
                f"label {label!r} is outside the {self.cols}x{self.rows} yard"
            )
        return coord

    def coords(self) -> Iterator[Coord]:
        """All slots in placement order: row by row, columns left to right."""
        for row in range(self.rows):
            for col in range(self.cols):
                yield (col, row)

    def labels(self) -> list[str]:
        return [coord_to_label(c) for c in self.coords()]


def build_grid(population: int, cols: int) -> Grid:
    """Lay out ``population`` containers in ``cols`` columns.

    The population must divide evenly; otherwise both numbers are reported
    back so the caller can pick a different column count.
    """
    if population < 1:
        raise GridError(f"population must be >= 1, got {population}")
    if cols < 1:
        raise GridError(f"column count must be >= 1, got {cols}")
    rows, leftover = divmod(population, cols)
    if leftover:
        raise GridError(
            f"population {population} does not divide into {cols} columns"
        )
    return Grid(cols=cols, rows=rows)


def distance(a: Coord, b: Coord, metric: str = MET_EUCLIDEAN) -> float:
    dc = a[0] - b[0]
    dr = a[1] - b[1]
    if metric == MET_EUCLIDEAN:
        return math.hypot(dc, dr)
    if metric == MET_CHEBYSHEV:
        return float(max(abs(dc), abs(dr)))
    raise ValueError(f"unknown metric {metric!r}")
