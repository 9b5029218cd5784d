"""One inspection run from first suggestion to final disposition.

Used by both the CLI (batch) and the HTTP service (interactive).  A
session owns the engine state, simulated timing, optional DB-file
persistence (rewritten atomically after every phase), and the optional
knowledge cache that lets a previously-seen configuration skip detection
altogether.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import dbfile, engine, knowledge, timing
from .estimator import DEFAULT_STEP_FRACTION, Profile, Status, Verdict
from .grid import Grid, GridError, build_grid
from .sdd import (
    MODE_SEQUENTIAL,
    SCAN_MODES,
    SCENARIOS,
    SddParams,
    scenario_verdict,
    total_scan_seconds,
)

__all__ = [
    "SessionConfig",
    "Disposition",
    "DISPOSITION_KINDS",
    "FeatureDisabledError",
    "InspectionSession",
    "parse_verdict_script",
]

DISPOSITION_KINDS = ("reject", "isolate", "control", "accept", "else")


class FeatureDisabledError(RuntimeError):
    """Triangulation endpoints called on a surface-scan-only session."""


@dataclass(frozen=True)
class Disposition:
    """Manager's final call on the sorted cargo."""

    kind: str
    note: str = ""

    def __post_init__(self) -> None:
        if self.kind not in DISPOSITION_KINDS:
            raise ValueError(
                f"disposition must be one of {', '.join(DISPOSITION_KINDS)}; "
                f"got {self.kind!r}"
            )
        if self.kind == "else" and not self.note.strip():
            raise ValueError("an 'else' disposition needs a note")


@dataclass(frozen=True)
class SessionConfig:
    population: int
    cols: int
    schedule: str = "inset1"
    sampler: str = "uniform"
    seed: int = 0
    scenario: str | None = None
    scan_mode: str = MODE_SEQUENTIAL
    mean_scan_seconds: float = timing.DEFAULT_MEAN_SCAN_SECONDS
    sorting_seconds: float = 0.0
    metric: str = "euclidean"
    step_fraction: float = DEFAULT_STEP_FRACTION
    sdd_params: SddParams = field(default_factory=SddParams)
    sdd_only: bool = False

    def __post_init__(self) -> None:
        if self.scan_mode not in SCAN_MODES:
            raise ValueError(f"unknown scan mode {self.scan_mode!r}")
        if self.scenario is not None and self.scenario not in SCENARIOS:
            raise ValueError(
                f"unknown scenario {self.scenario!r}; pick one of {', '.join(SCENARIOS)}"
            )
        if self.mean_scan_seconds <= 0:
            raise ValueError("mean scan seconds must be positive")
        if self.sorting_seconds < 0:
            raise ValueError("sorting seconds cannot be negative")
        if self.population < 3 and not self.sdd_only:
            raise GridError(
                f"triangulation needs at least 3 containers, got "
                f"{self.population}; pass sdd_only to scan such a yard anyway"
            )

    def public_dict(self) -> dict:
        return {
            "population": self.population,
            "cols": self.cols,
            "schedule": self.schedule,
            "sampler": self.sampler,
            "seed": self.seed,
            "scenario": self.scenario,
            "scan_mode": self.scan_mode,
            "mean_scan_seconds": self.mean_scan_seconds,
            "sorting_seconds": self.sorting_seconds,
            "metric": self.metric,
            "step_fraction": self.step_fraction,
            "sdd_only": self.sdd_only,
            "sdd": {
                "threshold": self.sdd_params.threshold,
                "weights": [
                    self.sdd_params.weight_fraction,
                    self.sdd_params.weight_roughness,
                    self.sdd_params.weight_depth,
                ],
                "cap_roughness_mm": self.sdd_params.cap_roughness_mm,
                "cap_depth_mm": self.sdd_params.cap_depth_mm,
            },
        }


def parse_verdict_script(text: str) -> dict[int, list[tuple[str, Status]]]:
    """Fixture scripts: one line per phase, ``phase:LABEL=color,...``."""
    phases: dict[int, list[tuple[str, Status]]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, body = line.partition(":")
        if not sep:
            raise ValueError(f"script line {lineno}: missing ':' separator")
        try:
            phase = int(head)
        except ValueError:
            raise ValueError(f"script line {lineno}: bad phase number {head!r}") from None
        if phase in phases:
            raise ValueError(f"script line {lineno}: duplicate phase {phase}")
        pairs: list[tuple[str, Status]] = []
        for chunk in body.split(","):
            label, sep, color = chunk.strip().partition("=")
            if not sep or not label or not color:
                raise ValueError(
                    f"script line {lineno}: expected LABEL=color, got {chunk.strip()!r}"
                )
            pairs.append((label.strip(), Status.from_wire(color)))
        if not pairs:
            raise ValueError(f"script line {lineno}: no verdicts")
        phases[phase] = pairs
    if not phases:
        raise ValueError("verdict script is empty")
    return phases


class InspectionSession:
    """Drives one run; mutating calls must be externally serialized."""

    def __init__(
        self,
        config: SessionConfig,
        *,
        db_path: str | Path | None = None,
        store: knowledge.KnowledgeStore | None = None,
    ):
        self.config = config
        self.db_path = Path(db_path) if db_path is not None else None
        self.store = store
        self.grid: Grid = build_grid(config.population, config.cols)
        self.decision: Disposition | None = None
        self.replayed = False
        self.detections = 0
        self._cached_profile: Profile | None = None
        self._sdd_verdicts: dict[str, Verdict] = {}

        if config.sdd_only:
            self.state = None
        else:
            self.state = engine.SessionState(
                grid=self.grid,
                schedule=config.schedule,
                sampler=config.sampler,
                rng_seed=config.seed,
                metric=config.metric,
                step_fraction=config.step_fraction,
            )
            if config.scenario is not None and store is not None:
                self._probe_knowledge_at_start()

    # -- knowledge ---------------------------------------------------------

    def _scenario_key_seeds(self) -> tuple[Verdict, ...]:
        """Virtual phase-1 verdicts used only to build the cache key."""
        assert self.state is not None and self.config.scenario is not None
        suggestion = engine.suggest(
            self.state.frames[0], self.config.sampler, self.config.seed
        )
        return tuple(
            scenario_verdict(
                self.config.scenario, label, self.config.seed, self.config.sdd_params
            )
            for label in suggestion.labels
        )

    def _probe_knowledge_at_start(self) -> None:
        key = knowledge.canonical_key(
            self.config.scenario or "live",
            self._scenario_key_seeds(),
            self.grid.population,
        )
        cached = self.store.lookup(key) if self.store else None
        if cached is not None:
            self.replayed = True
            self._cached_profile = cached

    def _probe_knowledge_after_phase_one(self) -> None:
        assert self.state is not None
        key = knowledge.canonical_key(
            self.config.scenario or "live",
            self.state.records[0].verdicts,
            self.grid.population,
        )
        cached = self.store.lookup(key) if self.store else None
        if cached is not None:
            self.replayed = True
            self._cached_profile = cached
            self.state.terminal = True
            self.state.profile = cached

    def _remember(self) -> None:
        assert self.state is not None and self.state.profile is not None
        key = knowledge.canonical_key(
            self.config.scenario or "live",
            self.state.records[0].verdicts,
            self.grid.population,
        )
        assert self.store is not None
        self.store.put(
            key,
            self.state.profile,
            tuple(self.state.seeds),
            self.grid,
            metric=self.config.metric,
            step_fraction=self.config.step_fraction,
        )
        if self.store.path is not None:
            self.store.flush()

    # -- state views -------------------------------------------------------

    @property
    def terminal(self) -> bool:
        if self.config.sdd_only:
            return len(self._sdd_verdicts) == self.grid.population
        if self.replayed and self.state is not None and not self.state.records:
            return True
        assert self.state is not None
        return self.state.terminal

    @property
    def phase_step(self) -> int:
        return 0 if self.state is None else self.state.phase_step

    @property
    def inspections(self) -> int:
        return 0 if self.state is None else self.state.inspections

    def profile(self) -> Profile | None:
        if self.config.sdd_only:
            return self._sdd_only_profile()
        if self._cached_profile is not None:
            return self._cached_profile
        assert self.state is not None
        return self.state.profile

    def suggestion(self) -> engine.Suggestion:
        if self.config.sdd_only:
            raise FeatureDisabledError(
                "triangulation is disabled on a surface-scan-only session"
            )
        if self.terminal:
            raise engine.PhaseOrderError("run is terminal; nothing left to suggest")
        assert self.state is not None
        return self.state.suggestion()

    # -- phase submission ----------------------------------------------------

    def _scan_durations(self, count: int) -> tuple[float, ...]:
        return (self.config.mean_scan_seconds,) * count

    def submit(
        self,
        verdicts: Mapping[str, Verdict],
        *,
        phase: int | None = None,
        targets: engine.SideTargets | None = None,
    ) -> engine.PhaseResult:
        """Record one phase against the current suggestion (or explicit targets)."""
        if self.config.sdd_only:
            raise FeatureDisabledError(
                "triangulation is disabled on a surface-scan-only session"
            )
        assert self.state is not None
        if self.terminal:
            raise engine.PhaseOrderError("run is terminal; no further phases accepted")
        frame = self.state.current_frame
        assert frame is not None
        if phase is not None and phase != frame.phase:
            raise engine.PhaseOrderError(
                f"phase {phase} was already submitted"
                if phase < frame.phase
                else f"phase {phase} is not open yet (current is {frame.phase})"
            )
        if targets is None:
            # The suggestion is advisory: operators may inspect any container
            # on the live sides, so the side assignment follows the submitted
            # labels (a label shared by two sides is recorded on both).
            targets = engine.targets_from_labels(frame, list(verdicts))
        result = engine.run_phase(
            self.state,
            targets,
            verdicts,
            sorting_seconds=self.config.sorting_seconds,
            scan_seconds=self._scan_durations(engine.INSPECTIONS_PER_PHASE),
        )
        self.detections += len(result.verdicts)
        if (
            not result.terminal
            and self.store is not None
            and self.config.scenario is None
            and self.state.phase_step == 1
        ):
            self._probe_knowledge_after_phase_one()
        if self.terminal and self.store is not None and not self.replayed:
            self._remember()
        self.write_db()
        return result

    def submit_scripted(self, phase: int, pairs: Sequence[tuple[str, Status]]):
        """Apply one script line: color verdicts at their nominal scores."""
        if self.config.sdd_only:
            raise FeatureDisabledError(
                "triangulation is disabled on a surface-scan-only session"
            )
        assert self.state is not None
        frame = self.state.current_frame
        if frame is None:
            raise engine.PhaseOrderError(
                f"script still has phase {phase} but the run is terminal"
            )
        verdicts = {
            label: Verdict.from_status(label, status) for label, status in pairs
        }
        return self.submit(verdicts, phase=phase)

    def run_scenario(self) -> None:
        """Drive every remaining phase with scenario-generated verdicts."""
        if self.config.scenario is None:
            raise ValueError("session has no scenario to draw verdicts from")
        if self.config.sdd_only:
            self.submit_sdd(
                {
                    label: scenario_verdict(
                        self.config.scenario, label, self.config.seed, self.config.sdd_params
                    )
                    for label in self.grid.labels()
                }
            )
            return
        while not self.terminal:
            suggestion = self.suggestion()
            verdicts = {
                label: scenario_verdict(
                    self.config.scenario, label, self.config.seed, self.config.sdd_params
                )
                for label in suggestion.labels
            }
            self.submit(verdicts, targets=suggestion.as_targets())

    # -- surface-scan-only sessions -----------------------------------------

    def submit_sdd(self, verdicts: Mapping[str, Verdict]) -> None:
        """Record direct scan verdicts (no triangulation, no estimation)."""
        if not self.config.sdd_only:
            raise FeatureDisabledError(
                "direct scan submission is only for surface-scan-only sessions"
            )
        for label, verdict in verdicts.items():
            self.grid.require(label)
            if verdict.label != label:
                raise ValueError(f"verdict keyed {label!r} carries {verdict.label!r}")
            if label in self._sdd_verdicts:
                raise engine.PhaseOrderError(f"{label} was already scanned")
        self._sdd_verdicts.update(verdicts)
        self.detections += len(verdicts)

    def _sdd_only_profile(self) -> Profile | None:
        if not self._sdd_verdicts:
            return None
        buckets = {Status.RED: [], Status.ORANGE: [], Status.GREEN: []}
        for v in self._sdd_verdicts.values():
            buckets[v.status].append(v.label)
        key = self.grid.require
        return Profile(
            phase=1,
            population=self.grid.population,
            reds=tuple(sorted(buckets[Status.RED], key=key)),
            oranges=tuple(sorted(buckets[Status.ORANGE], key=key)),
            greens=tuple(sorted(buckets[Status.GREEN], key=key)),
            p_by_label={v.label: v.p for v in self._sdd_verdicts.values()},
        )

    # -- outputs -------------------------------------------------------------

    def set_decision(self, disposition: Disposition) -> None:
        if not self.terminal:
            raise engine.PhaseOrderError(
                "dispositions are accepted only after the final phase"
            )
        self.decision = disposition

    def document(self) -> dbfile.DbDocument | None:
        if self.state is None or not self.state.records:
            return None
        records = []
        for r in self.state.records:
            records.append(
                dbfile.PhaseRecord(
                    phase_no=r.phase,
                    containers=tuple(r.frame.rect.labels()),
                    alfa=r.targets.alpha,
                    beta=r.targets.beta,
                    gamma=r.targets.gamma,
                    red=r.profile.reds,
                    orange=r.profile.oranges,
                    green=r.profile.greens,
                    total_sorting_time=r.sorting_seconds,
                    total_detection_time=total_scan_seconds(
                        r.scan_seconds, self.config.scan_mode
                    ),
                )
            )
        return dbfile.DbDocument(records=tuple(records), terminated=True)

    def db_text(self) -> str | None:
        doc = self.document()
        return None if doc is None else dbfile.serialize(doc)

    def write_db(self) -> None:
        """Atomically rewrite the DB file with the full document so far."""
        if self.db_path is None:
            return
        text = self.db_text()
        if text is None:
            return
        fd, tmp = tempfile.mkstemp(
            dir=str(self.db_path.parent), prefix=self.db_path.name, suffix=".tmp"
        )
        try:
            with os.fdopen(fd, "w", encoding="ascii") as fh:
                fh.write(text)
            os.replace(tmp, self.db_path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def timing_report(self) -> timing.TimingReport:
        t_other = timing.baseline_time(
            self.grid.population, self.config.mean_scan_seconds
        )
        if self.config.sdd_only:
            scans = tuple(
                self._scan_durations(len(self._sdd_verdicts))
                for _ in range(1 if self._sdd_verdicts else 0)
            )
            sorting = (0.0,) * len(scans)
        elif self.state is not None and self.state.records:
            sorting = tuple(r.sorting_seconds for r in self.state.records)
            scans = tuple(r.scan_seconds for r in self.state.records)
        else:
            sorting = ()
            scans = ()
        return timing.TimingReport(
            mode=self.config.scan_mode,
            t_other=t_other,
            phase_sorting=sorting,
            phase_scans=scans,
        )
