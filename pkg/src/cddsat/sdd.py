"""Surface-damage scoring for container scans.

A scan is a grayscale image plus an elevation map of the container
surface.  Damage evidence is the bright-pixel fraction after
binarization, the RMS surface roughness, and the maximum dent depth;
a weighted sum of the three (normalized against configurable caps)
gives the damage probability handed to the estimator.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .estimator import Verdict, band

__all__ = [
    "ImageRaster",
    "SurfaceMap",
    "SddParams",
    "ScanPlan",
    "binarize",
    "roughness",
    "max_depth",
    "sdd_score",
    "scan_time",
    "total_scan_seconds",
    "load_pgm",
    "dump_pgm",
    "export_surface",
    "load_surface",
    "SCENARIOS",
    "generate_scan",
    "scenario_verdict",
]

MODE_SEQUENTIAL = "sequential"
MODE_CONCURRENT = "concurrent"
SCAN_MODES = (MODE_SEQUENTIAL, MODE_CONCURRENT)

# Detections run in batches of three, one batch per triangulation phase.
CONCURRENT_GROUP = 3


class ImageRaster:
    """Grayscale image; intensities 0..255."""

    def __init__(self, pixels) -> None:
        arr = np.asarray(pixels, dtype=np.int64)
        if arr.ndim != 2 or arr.size < 1:
            raise ValueError("image must be a non-empty 2-D intensity array")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("intensities must lie in 0..255")
        self.pixels = arr.astype(np.uint8)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


class SurfaceMap:
    """Per-cell surface elevations in millimetres."""

    def __init__(self, heights) -> None:
        arr = np.asarray(heights, dtype=float)
        if arr.ndim != 2 or arr.size < 1:
            raise ValueError("surface must be a non-empty 2-D height array")
        if not np.isfinite(arr).all():
            raise ValueError("surface heights must be finite")
        self.heights = arr

    @property
    def height(self) -> int:
        return self.heights.shape[0]

    @property
    def width(self) -> int:
        return self.heights.shape[1]


@dataclass(frozen=True)
class SddParams:
    """Scoring knobs: binarization threshold, weights, normalization caps."""

    threshold: int = 128
    weight_fraction: float = 0.5
    weight_roughness: float = 0.25
    weight_depth: float = 0.25
    cap_roughness_mm: float = 5.0
    cap_depth_mm: float = 20.0

    def __post_init__(self) -> None:
        if not 0 <= self.threshold <= 255:
            raise ValueError(f"threshold out of range: {self.threshold}")
        weights = (self.weight_fraction, self.weight_roughness, self.weight_depth)
        if any(w < 0 for w in weights):
            raise ValueError(f"weights must be non-negative: {weights}")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1: {weights}")
        if self.cap_roughness_mm <= 0 or self.cap_depth_mm <= 0:
            raise ValueError("normalization caps must be positive")


def binarize(image: ImageRaster, threshold: int) -> tuple[np.ndarray, float]:
    """Mask of suspicious (bright) pixels and their fraction of the image."""
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold out of range: {threshold}")
    mask = image.pixels >= threshold
    return mask, float(mask.mean())


def roughness(surface: SurfaceMap) -> float:
    """RMS deviation of surface heights from their mean (mm)."""
    return float(np.sqrt(np.mean((surface.heights - surface.heights.mean()) ** 2)))


def max_depth(surface: SurfaceMap) -> float:
    """Peak-to-valley height difference (mm)."""
    return float(surface.heights.max() - surface.heights.min())


def sdd_score(image: ImageRaster, surface: SurfaceMap, params: SddParams = SddParams()) -> float:
    """Weighted damage probability in [0, 1].

    A perfectly clean scan (no bright pixels, flat surface) short-circuits
    to 0 regardless of weights.
    """
    _, fraction = binarize(image, params.threshold)
    rough = roughness(surface)
    depth = max_depth(surface)
    if fraction == 0.0 and rough == 0.0 and depth == 0.0:
        return 0.0
    score = (
        params.weight_fraction * fraction
        + params.weight_roughness * min(1.0, rough / params.cap_roughness_mm)
        + params.weight_depth * min(1.0, depth / params.cap_depth_mm)
    )
    return min(1.0, max(0.0, score))


@dataclass(frozen=True)
class ScanPlan:
    """Targets with a simulated duration per scan."""

    targets: tuple[str, ...]
    mode: str
    per_scan_seconds: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.mode not in SCAN_MODES:
            raise ValueError(f"unknown scan mode {self.mode!r}")
        if len(self.targets) != len(self.per_scan_seconds):
            raise ValueError(
                f"{len(self.targets)} targets but "
                f"{len(self.per_scan_seconds)} durations"
            )
        if any(s <= 0 for s in self.per_scan_seconds):
            raise ValueError("scan durations must be positive")


def total_scan_seconds(durations: tuple[float, ...] | list[float], mode: str) -> float:
    """Duration-only core of :func:`scan_time`; shared with timing reports.

    Sequential scans add up.  Concurrent mode runs consecutive groups of
    three at once, so each group costs only its slowest member; a
    trailing partial group costs its own max.
    """
    if mode not in SCAN_MODES:
        raise ValueError(f"unknown scan mode {mode!r}")
    if not durations:
        return 0.0
    if mode == MODE_SEQUENTIAL:
        return float(sum(durations))
    total = 0.0
    for start in range(0, len(durations), CONCURRENT_GROUP):
        total += max(durations[start : start + CONCURRENT_GROUP])
    return total


def scan_time(plan: ScanPlan) -> float:
    """Total seconds for the plan under its scan mode."""
    return total_scan_seconds(plan.per_scan_seconds, plan.mode)


# --------------------------------------------------------------------------
# fixture I/O

def load_pgm(text: str | bytes) -> ImageRaster:
    """Read a plain (P2) PGM image."""
    if isinstance(text, bytes):
        text = text.decode("ascii")
    tokens: list[str] = []
    for line in text.splitlines():
        body = line.split("#", 1)[0]
        tokens.extend(body.split())
    if not tokens or tokens[0] != "P2":
        raise ValueError("not a plain PGM (P2) image")
    if len(tokens) < 4:
        raise ValueError("truncated PGM header")
    width, height, maxval = (int(t) for t in tokens[1:4])
    if width < 1 or height < 1 or not 0 < maxval <= 255:
        raise ValueError(f"bad PGM geometry {width}x{height} maxval {maxval}")
    values = [int(t) for t in tokens[4:]]
    if len(values) != width * height:
        raise ValueError(
            f"PGM payload has {len(values)} values, expected {width * height}"
        )
    return ImageRaster(np.array(values).reshape(height, width))


def dump_pgm(image: ImageRaster) -> str:
    lines = ["P2", f"{image.width} {image.height}", "255"]
    for row in image.pixels:
        lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def export_surface(surface: SurfaceMap) -> str:
    """Plain grid text: first line "width height", then one row per line."""
    lines = [f"{surface.width} {surface.height}"]
    for row in surface.heights:
        lines.append(" ".join(format(v, "g") for v in row))
    return "\n".join(lines) + "\n"


def load_surface(text: str) -> SurfaceMap:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty surface file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"bad surface header {lines[0]!r}")
    width, height = int(head[0]), int(head[1])
    rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
    if len(rows) != height or any(len(r) != width for r in rows):
        raise ValueError(f"surface payload does not match {width}x{height} header")
    return SurfaceMap(rows)


# --------------------------------------------------------------------------
# scenario simulation

SCENARIOS = ("pristine", "rust_oxidation", "puncture")

_SCAN_PIXELS = 24  # synthetic scans are 24x24


def generate_scan(scenario: str, label: str, seed: int) -> tuple[ImageRaster, SurfaceMap]:
    """Deterministic synthetic scan for one container under a scenario.

    pristine surfaces are clean; rust_oxidation yields mid-band bright
    fractions with mild roughness; puncture yields a bright cluster with
    a deep dent.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    rng = random.Random(f"{seed}/{scenario}/{label}")
    size = _SCAN_PIXELS
    if scenario == "pristine":
        return ImageRaster(np.zeros((size, size), dtype=int)), SurfaceMap(
            np.zeros((size, size))
        )
    if scenario == "rust_oxidation":
        fraction = rng.uniform(0.15, 0.55)
        amp = rng.uniform(0.5, 3.0)
        pix = np.array(
            [[220 if rng.random() < fraction else 40 for _ in range(size)] for _ in range(size)]
        )
        heights = np.array(
            [[rng.uniform(-amp, amp) for _ in range(size)] for _ in range(size)]
        )
        return ImageRaster(pix), SurfaceMap(heights)
    # puncture
    fraction = rng.uniform(0.30, 0.70)
    dent = rng.uniform(15.0, 40.0)
    pix = np.array(
        [[255 if rng.random() < fraction else 30 for _ in range(size)] for _ in range(size)]
    )
    heights = np.array(
        [[rng.uniform(-2.0, 2.0) for _ in range(size)] for _ in range(size)]
    )
    heights[size // 2, size // 2] = -dent
    return ImageRaster(pix), SurfaceMap(heights)


def scenario_verdict(
    scenario: str, label: str, seed: int, params: SddParams = SddParams()
) -> Verdict:
    """Score a generated scan into a verdict for the given container."""
    image, surface = generate_scan(scenario, label, seed)
    p = sdd_score(image, surface, params)
    return Verdict(label=label, status=band(p), p=p)
