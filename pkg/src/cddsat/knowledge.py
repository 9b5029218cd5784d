"""Recall of previously sorted configurations.

A finished run is remembered under a key built from its scenario tag, the
relative layout of its first-phase seed verdicts (translation-invariant,
anchored at the lowest (col, row) seed), and the population.  A later run
that opens on the same key can skip detection entirely and reuse the
stored profile; every hit can optionally be re-derived from the stored
seeds as a soundness check.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .estimator import Profile, Status, Verdict, estimate
from .grid import Grid, label_to_coord

__all__ = [
    "ConfigKey",
    "CacheEntry",
    "KnowledgeStore",
    "CacheSoundnessError",
    "canonical_key",
    "lookup",
]


class CacheSoundnessError(RuntimeError):
    """A cached profile no longer matches what estimation would produce."""


@dataclass(frozen=True)
class ConfigKey:
    """Identity of a sorted configuration.

    ``topology`` holds (column offset, row offset, status) triples
    relative to the anchor seed, sorted; equal seed sets in any input
    order and at any yard translation produce the same key.  Rotations do
    not: a rotated layout is a different configuration.
    """

    scenario: str
    topology: tuple[tuple[int, int, str], ...]
    population_bucket: int

    @property
    def digest(self) -> str:
        text = f"{self.scenario}|{self.population_bucket}|" + "|".join(
            f"{dc},{dr},{status}" for dc, dr, status in self.topology
        )
        return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]


def canonical_key(
    scenario: str,
    seeds: Sequence[Verdict],
    n: int,
    *,
    bucket_width: int = 0,
) -> ConfigKey:
    """Key for a seed set; ``bucket_width`` 0 means exact population match."""
    if not seeds:
        raise ValueError("cannot key an empty seed set")
    coords = {}
    for v in seeds:
        coords[label_to_coord(v.label)] = v.status
    anchor = min(coords)
    topology = tuple(
        sorted(
            (c - anchor[0], r - anchor[1], status.wire)
            for (c, r), status in coords.items()
        )
    )
    bucket = n if bucket_width <= 0 else n // bucket_width
    return ConfigKey(scenario=scenario, topology=topology, population_bucket=bucket)


@dataclass
class CacheEntry:
    """Stored outcome plus everything needed to re-derive it."""

    profile: Profile
    seeds: tuple[Verdict, ...]
    grid_cols: int
    grid_rows: int
    metric: str
    step_fraction: float
    hit_count: int = 0
    created_at: int = field(default_factory=lambda: int(time.time()))

    def replay(self) -> Profile:
        grid = Grid(cols=self.grid_cols, rows=self.grid_rows)
        return estimate(
            list(self.seeds),
            grid,
            self.profile.phase,
            terminal=True,
            metric=self.metric,
            step_fraction=self.step_fraction,
        )


class KnowledgeStore:
    """In-memory map of ConfigKey to CacheEntry with flat-file persistence.

    Writes are serialized by a lock; readers get complete entries.  When
    ``verify_hits`` is set every hit is replayed through the estimator
    before it is served (slow; meant for test builds).
    """

    def __init__(self, path: str | Path | None = None, *, verify_hits: bool = False):
        self.path = Path(path) if path is not None else None
        self.verify_hits = verify_hits
        self._entries: dict[ConfigKey, CacheEntry] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load(self.path)

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, key: ConfigKey) -> Profile | None:
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                return None
            if self.verify_hits:
                replayed = entry.replay()
                if (
                    replayed.reds != entry.profile.reds
                    or replayed.oranges != entry.profile.oranges
                    or replayed.greens != entry.profile.greens
                    or dict(replayed.p_by_label) != dict(entry.profile.p_by_label)
                ):
                    raise CacheSoundnessError(
                        f"cached profile for key {key.digest} does not replay"
                    )
            entry.hit_count += 1
            return entry.profile

    def hit_count(self, key: ConfigKey) -> int:
        entry = self._entries.get(key)
        return 0 if entry is None else entry.hit_count

    def put(
        self,
        key: ConfigKey,
        profile: Profile,
        seeds: Sequence[Verdict],
        grid: Grid,
        *,
        metric: str,
        step_fraction: float,
    ) -> None:
        entry = CacheEntry(
            profile=profile,
            seeds=tuple(seeds),
            grid_cols=grid.cols,
            grid_rows=grid.rows,
            metric=metric,
            step_fraction=step_fraction,
        )
        with self._lock:
            self._entries[key] = entry

    def flush(self) -> None:
        if self.path is None:
            raise ValueError("store has no backing file")
        self.save(self.path)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with self._lock:
            lines = []
            for key, e in self._entries.items():
                topo = "|".join(f"{dc},{dr},{s}" for dc, dr, s in key.topology)
                topo_field = f"bucket={key.population_bucket};{topo}"
                seeds = " ".join(f"{v.label}:{v.status.wire}:{v.p!r}" for v in e.seeds)
                pmap = ",".join(
                    f"{label}:{p!r}" for label, p in sorted(e.profile.p_by_label.items())
                )
                payload = ";".join(
                    (
                        f"cols={e.grid_cols}",
                        f"rows={e.grid_rows}",
                        f"phase={e.profile.phase}",
                        f"metric={e.metric}",
                        f"step={e.step_fraction!r}",
                        f"hits={e.hit_count}",
                        f"created={e.created_at}",
                        f"seeds={seeds}",
                        f"reds={' '.join(e.profile.reds)}",
                        f"oranges={' '.join(e.profile.oranges)}",
                        f"greens={' '.join(e.profile.greens)}",
                        f"p={pmap}",
                    )
                )
                lines.append("\t".join((key.digest, key.scenario, topo_field, payload)))
            text = "\n".join(lines) + ("\n" if lines else "")
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(text, encoding="ascii")
        tmp.replace(path)

    def _load(self, path: Path) -> None:
        for lineno, line in enumerate(path.read_text(encoding="ascii").splitlines(), 1):
            if not line.strip():
                continue
            try:
                digest, scenario, topo_field, payload = line.split("\t")
                bucket_part, _, topo_part = topo_field.partition(";")
                bucket = int(bucket_part.removeprefix("bucket="))
                topology = tuple(
                    (int(dc), int(dr), s)
                    for dc, dr, s in (
                        item.split(",") for item in topo_part.split("|") if item
                    )
                )
                key = ConfigKey(scenario, topology, bucket)
                fields = dict(item.split("=", 1) for item in payload.split(";"))
                seeds = tuple(
                    Verdict(label, Status.from_wire(status), float(p))
                    for label, status, p in (
                        chunk.split(":") for chunk in fields["seeds"].split() if chunk
                    )
                )
                p_by_label = {
                    label: float(p)
                    for label, p in (
                        chunk.split(":") for chunk in fields["p"].split(",") if chunk
                    )
                }
                profile = Profile(
                    phase=int(fields["phase"]),
                    population=int(fields["cols"]) * int(fields["rows"]),
                    reds=tuple(fields["reds"].split()),
                    oranges=tuple(fields["oranges"].split()),
                    greens=tuple(fields["greens"].split()),
                    p_by_label=p_by_label,
                )
                entry = CacheEntry(
                    profile=profile,
                    seeds=seeds,
                    grid_cols=int(fields["cols"]),
                    grid_rows=int(fields["rows"]),
                    metric=fields["metric"],
                    step_fraction=float(fields["step"]),
                    hit_count=int(fields["hits"]),
                    created_at=int(fields["created"]),
                )
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad knowledge entry: {exc}") from exc
            if key.digest != digest:
                raise ValueError(f"{path}:{lineno}: key digest mismatch")
            self._entries[key] = entry


def lookup(store: KnowledgeStore, key: ConfigKey) -> Profile | None:
    """Module-level alias for :meth:`KnowledgeStore.lookup`."""
    return store.lookup(key)
