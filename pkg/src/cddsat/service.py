"""HTTP facade for interactive inspection sessions.

Routes:
    POST /sessions                      create a session
    GET  /sessions/{id}/suggestions     labels to inspect this phase
    POST /sessions/{id}/verdicts        submit one phase of verdicts
    POST /sessions/{id}/advance         no-op pacing alias
    GET  /sessions/{id}/profile         cumulative profile + timing
    POST /sessions/{id}/decision        final disposition
    GET  /sessions/{id}/db              raw DB file
    GET  /sessions/{id}/timing.csv      chart row for this run
    GET  /healthz                       liveness probe

Errors use one JSON shape: {"code", "message", "details": []}.  Mutating
calls on one session are serialized by a per-session lock; sessions are
independent.  On startup any *.db files found in the data directory are
parsed back into read-only sessions, so a restarted service can still
serve profiles recorded by a previous life.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from . import dbfile, engine, knowledge, timing
from .config import ServiceConfig, load_config
from .estimator import Status, Verdict, band
from .grid import Grid, GridError, LabelError, label_to_coord
from .sdd import (
    MODE_CONCURRENT,
    MODE_SEQUENTIAL,
    SddParams,
    load_pgm,
    load_surface,
    scenario_verdict,
    sdd_score,
)
from .session import (
    Disposition,
    FeatureDisabledError,
    InspectionSession,
    SessionConfig,
)

__all__ = ["create_app", "app", "ApiError"]


class ApiError(Exception):
    """Error carried to the client as {code, message, details}."""

    def __init__(self, status: int, code: str, message: str, details: list | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details or []

    def response(self) -> JSONResponse:
        return JSONResponse(
            status_code=self.status,
            content={"code": self.code, "message": self.message, "details": self.details},
        )


# --------------------------------------------------------------------------
# request bodies

class SddOverrides(BaseModel):
    threshold: int | None = None
    weight_fraction: float | None = None
    weight_roughness: float | None = None
    weight_depth: float | None = None
    cap_roughness_mm: float | None = None
    cap_depth_mm: float | None = None


class CreateSessionBody(BaseModel):
    population: int
    cols: int
    schedule: str | None = None
    sampler: str | None = None
    seed: int | None = None
    scenario: str | None = None
    scan_mode: str | None = None
    mean_scan_seconds: float | None = None
    sorting_seconds: float | None = None
    metric: str | None = None
    step_fraction: float | None = None
    sdd_only: bool = False
    sdd: SddOverrides | None = None


class VerdictEntry(BaseModel):
    label: str
    color: str | None = None
    image_ref: str | None = None
    surface_ref: str | None = None
    scan: bool = False


class VerdictsBody(BaseModel):
    phase: int | None = None
    verdicts: list[VerdictEntry] = Field(min_length=1)


class DecisionBody(BaseModel):
    kind: str
    note: str = ""


# --------------------------------------------------------------------------
# recovered (read-only) sessions

class RecoveredSession:
    """A session rebuilt from a DB file left by an earlier service life."""

    read_only = True

    def __init__(self, session_id: str, doc: dbfile.DbDocument, mean_scan_seconds: float):
        self.id = session_id
        self.doc = doc
        coords = [label_to_coord(l) for l in doc.records[0].containers]
        self.grid = Grid(
            cols=max(c for c, _ in coords) + 1,
            rows=max(r for _, r in coords) + 1,
        )
        self.mean_scan_seconds = mean_scan_seconds
        self.decision: Disposition | None = None

    @property
    def last_complete(self) -> dbfile.PhaseRecord | None:
        recs = [r for r in self.doc.records if r.complete]
        return recs[-1] if recs else None

    @property
    def terminal(self) -> bool:
        rec = self.last_complete
        if rec is None:
            return False
        classified = len(rec.red) + len(rec.orange) + len(rec.green)
        return classified == self.grid.population

    def profile_payload(self, session_id: str) -> dict:
        rec = self.last_complete
        reds = list(rec.red) if rec else []
        oranges = list(rec.orange) if rec else []
        greens = list(rec.green) if rec else []
        status_by_label = (
            {l: "Red" for l in reds}
            | {l: "Orange" for l in oranges}
            | {l: "Green" for l in greens}
        )
        classified = len(status_by_label)
        t_d = sum(
            (r.total_sorting_time or 0.0) + (r.total_detection_time or 0.0)
            for r in self.doc.records
            if r.complete
        )
        t_other = self.grid.population * self.mean_scan_seconds
        return {
            "session": session_id,
            "read_only": True,
            "replayed": False,
            "terminal": self.terminal,
            "phase_step": sum(1 for r in self.doc.records if r.complete),
            "inspections": 3 * sum(1 for r in self.doc.records if r.complete),
            "detections": None,
            "decision": None
            if self.decision is None
            else {"kind": self.decision.kind, "note": self.decision.note},
            "grid": {"cols": self.grid.cols, "rows": self.grid.rows},
            "config": None,
            "ratio": classified / self.grid.population,
            "reds": reds,
            "oranges": oranges,
            "greens": greens,
            "labels": [
                {"label": l, "p": None, "status": status_by_label.get(l)}
                for l in self.grid.labels()
            ],
            "timing": {
                "mode": None,
                "t_other": t_other,
                "t_d": t_d,
                "t_saved": t_other - t_d,
                "t_d_sequential": t_d,
                "t_d_concurrent": t_d,
                "per_phase": [
                    {
                        "sorting_seconds": r.total_sorting_time,
                        "detection_seconds": r.total_detection_time,
                    }
                    for r in self.doc.records
                    if r.complete
                ],
            },
        }


# --------------------------------------------------------------------------
# live session bookkeeping

class ManagedSession:
    def __init__(self, session_id: str, session: InspectionSession):
        self.id = session_id
        self.session = session
        self.lock = threading.Lock()
        self.read_only = False


class SessionManager:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.data_dir = Path(config.data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.store: knowledge.KnowledgeStore | None = None
        if config.knowledge_path:
            self.store = knowledge.KnowledgeStore(
                config.knowledge_path, verify_hits=config.verify_knowledge
            )
        self.sessions: dict[str, ManagedSession | RecoveredSession] = {}
        self._lock = threading.Lock()
        self._recover()

    def _recover(self) -> None:
        for db_file in sorted(self.data_dir.glob("*.db")):
            try:
                doc = dbfile.parse(db_file.read_text(encoding="ascii"))
                recovered = RecoveredSession(
                    db_file.stem, doc, self.config.mean_scan_seconds
                )
            except (ValueError, OSError):
                continue  # foreign or damaged file; not this service's problem
            self.sessions[db_file.stem] = recovered

    def create(self, session_config: SessionConfig) -> ManagedSession:
        session_id = uuid.uuid4().hex[:12]
        db_path = self.data_dir / f"{session_id}.db"
        session = InspectionSession(
            session_config, db_path=db_path, store=self.store
        )
        managed = ManagedSession(session_id, session)
        with self._lock:
            self.sessions[session_id] = managed
        return managed

    def get(self, session_id: str) -> ManagedSession | RecoveredSession:
        found = self.sessions.get(session_id)
        if found is None:
            raise ApiError(404, "not_found", f"no session {session_id!r}")
        return found

    def get_live(self, session_id: str) -> ManagedSession:
        found = self.get(session_id)
        if isinstance(found, RecoveredSession):
            raise ApiError(
                409,
                "read_only",
                f"session {session_id!r} was recovered from disk and is read-only",
            )
        return found


# --------------------------------------------------------------------------
# payload builders

def _suggestion_payload(s: InspectionSession) -> dict:
    suggestion = s.suggestion()
    frame = s.state.current_frame  # type: ignore[union-attr]
    assert frame is not None
    return {
        "phase": suggestion.phase,
        "alpha": suggestion.alpha,
        "beta": suggestion.beta,
        "gamma": suggestion.gamma,
        "labels": list(suggestion.labels),
        "frame": {
            "population": frame.population,
            "alpha_side": list(frame.alpha),
            "beta_side": list(frame.beta),
            "gamma_side": list(frame.gamma),
        },
    }


def _timing_payload(s: InspectionSession) -> dict:
    report = s.timing_report()
    sorting = sum(report.phase_sorting)
    return {
        "mode": report.mode,
        "t_other": report.t_other,
        "t_d": report.t_d,
        "t_saved": report.t_saved,
        "t_d_sequential": sorting + report.detection_total(MODE_SEQUENTIAL),
        "t_d_concurrent": sorting + report.detection_total(MODE_CONCURRENT),
        "per_phase": [
            {"sorting_seconds": pair[0], "detection_seconds": pair[1]}
            for pair in report.per_phase
        ],
    }


def _profile_payload(managed: ManagedSession) -> dict:
    s = managed.session
    profile = s.profile()
    status_by_label: dict[str, str] = {}
    p_by_label: dict[str, float] = {}
    reds: list[str] = []
    oranges: list[str] = []
    greens: list[str] = []
    ratio = 0.0
    if profile is not None:
        reds, oranges, greens = list(profile.reds), list(profile.oranges), list(profile.greens)
        ratio = profile.ratio
        p_by_label = dict(profile.p_by_label)
        for name, group in (("Red", reds), ("Orange", oranges), ("Green", greens)):
            for label in group:
                status_by_label[label] = name
    return {
        "session": managed.id,
        "read_only": False,
        "replayed": s.replayed,
        "terminal": s.terminal,
        "phase_step": s.phase_step,
        "inspections": s.inspections,
        "detections": s.detections,
        "decision": None
        if s.decision is None
        else {"kind": s.decision.kind, "note": s.decision.note},
        "grid": {"cols": s.grid.cols, "rows": s.grid.rows},
        "config": s.config.public_dict(),
        "ratio": ratio,
        "reds": reds,
        "oranges": oranges,
        "greens": greens,
        "labels": [
            {
                "label": label,
                "p": p_by_label.get(label),
                "status": status_by_label.get(label),
            }
            for label in s.grid.labels()
        ],
        "timing": _timing_payload(s),
    }


# --------------------------------------------------------------------------
# verdict entry resolution

def _resolve_ref(data_dir: Path, ref: str) -> Path:
    candidate = (data_dir / ref).resolve()
    if not str(candidate).startswith(str(data_dir.resolve()) + "/"):
        raise ApiError(422, "bad_ref", f"reference {ref!r} escapes the data directory")
    if not candidate.is_file():
        raise ApiError(422, "bad_ref", f"no such scan file: {ref!r}")
    return candidate


def _entry_to_verdict(
    entry: VerdictEntry,
    session_config: SessionConfig,
    data_dir: Path,
    params: SddParams,
) -> Verdict:
    ways = sum(
        1 for flag in (entry.color is not None, entry.scan,
                       entry.image_ref is not None or entry.surface_ref is not None)
        if flag
    )
    if ways != 1:
        raise ApiError(
            422,
            "bad_verdict",
            f"verdict for {entry.label!r} must carry exactly one of: "
            "color, scan, or image_ref+surface_ref",
        )
    if entry.color is not None:
        try:
            return Verdict.from_status(entry.label, Status.from_wire(entry.color))
        except ValueError as exc:
            raise ApiError(422, "bad_verdict", str(exc)) from None
    if entry.scan:
        if session_config.scenario is None:
            raise ApiError(
                422,
                "bad_verdict",
                "simulated scans need a session scenario; create the session "
                "with a scenario tag or send color/image verdicts",
            )
        return scenario_verdict(
            session_config.scenario, entry.label, session_config.seed, params
        )
    if entry.image_ref is None or entry.surface_ref is None:
        raise ApiError(
            422,
            "bad_verdict",
            f"verdict for {entry.label!r} needs both image_ref and surface_ref",
        )
    try:
        image = load_pgm(_resolve_ref(data_dir, entry.image_ref).read_text())
        surface = load_surface(_resolve_ref(data_dir, entry.surface_ref).read_text())
        p = sdd_score(image, surface, params)
    except ValueError as exc:
        raise ApiError(422, "bad_scan_file", str(exc)) from None
    return Verdict(label=entry.label, status=band(p), p=p)


# --------------------------------------------------------------------------
# application factory

def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or load_config()
    manager = SessionManager(config)
    app = FastAPI(title="cargo inspection service", version="0.1.0")
    app.state.manager = manager

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request: Request, exc: RequestValidationError):
        details = [
            f"{'.'.join(str(p) for p in err.get('loc', ()))}: {err.get('msg', '')}"
            for err in exc.errors()
        ]
        return JSONResponse(
            status_code=422,
            content={
                "code": "validation",
                "message": "request body failed validation",
                "details": details,
            },
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "sessions": len(manager.sessions)}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        sdd_over = body.sdd or SddOverrides()
        base = config.sdd_params()
        try:
            params = SddParams(
                threshold=sdd_over.threshold if sdd_over.threshold is not None else base.threshold,
                weight_fraction=sdd_over.weight_fraction
                if sdd_over.weight_fraction is not None
                else base.weight_fraction,
                weight_roughness=sdd_over.weight_roughness
                if sdd_over.weight_roughness is not None
                else base.weight_roughness,
                weight_depth=sdd_over.weight_depth
                if sdd_over.weight_depth is not None
                else base.weight_depth,
                cap_roughness_mm=sdd_over.cap_roughness_mm
                if sdd_over.cap_roughness_mm is not None
                else base.cap_roughness_mm,
                cap_depth_mm=sdd_over.cap_depth_mm
                if sdd_over.cap_depth_mm is not None
                else base.cap_depth_mm,
            )
            session_config = SessionConfig(
                population=body.population,
                cols=body.cols,
                schedule=body.schedule or config.schedule,
                sampler=body.sampler or config.sampler,
                seed=body.seed if body.seed is not None else config.seed,
                scenario=body.scenario,
                scan_mode=body.scan_mode or config.scan_mode,
                mean_scan_seconds=body.mean_scan_seconds
                if body.mean_scan_seconds is not None
                else config.mean_scan_seconds,
                sorting_seconds=body.sorting_seconds
                if body.sorting_seconds is not None
                else config.sorting_seconds,
                metric=body.metric or config.metric,
                step_fraction=body.step_fraction
                if body.step_fraction is not None
                else config.step_fraction,
                sdd_params=params,
                sdd_only=body.sdd_only,
            )
        except GridError as exc:
            raise ApiError(422, "population_too_small", str(exc)) from None
        except (ValueError, engine.ScheduleError) as exc:
            raise ApiError(422, "bad_config", str(exc)) from None
        try:
            managed = manager.create(session_config)
        except (GridError, engine.ScheduleError, LabelError) as exc:
            raise ApiError(422, "bad_grid", str(exc)) from None
        s = managed.session
        payload = {
            "id": managed.id,
            "replayed": s.replayed,
            "terminal": s.terminal,
            "phase_step": s.phase_step,
            "grid": {
                "cols": s.grid.cols,
                "rows": s.grid.rows,
                "labels": s.grid.labels(),
            },
            "config": s.config.public_dict(),
        }
        if not s.config.sdd_only and not s.terminal:
            payload["suggestion"] = _suggestion_payload(s)
        return payload

    @app.get("/sessions/{session_id}/suggestions")
    def get_suggestions(session_id: str):
        managed = manager.get_live(session_id)
        try:
            return _suggestion_payload(managed.session)
        except FeatureDisabledError as exc:
            raise ApiError(409, "sdd_only", str(exc)) from None
        except engine.PhaseOrderError as exc:
            raise ApiError(409, "terminal", str(exc)) from None

    @app.post("/sessions/{session_id}/verdicts")
    def post_verdicts(session_id: str, body: VerdictsBody):
        managed = manager.get_live(session_id)
        s = managed.session
        with managed.lock:
            verdicts = {
                entry.label: _entry_to_verdict(
                    entry, s.config, manager.data_dir, s.config.sdd_params
                )
                for entry in body.verdicts
            }
            if len(verdicts) != len(body.verdicts):
                raise ApiError(422, "bad_verdict", "duplicate labels in one submission")
            try:
                if s.config.sdd_only:
                    s.submit_sdd(verdicts)
                    result_payload = {"scanned": sorted(verdicts)}
                else:
                    result = s.submit(verdicts, phase=body.phase)
                    result_payload = {
                        "phase": result.phase,
                        "alpha": list(result.targets.alpha),
                        "beta": list(result.targets.beta),
                        "gamma": list(result.targets.gamma),
                        "ratio": result.profile.ratio,
                    }
            except engine.VerdictCoverageError as exc:
                raise ApiError(
                    422, "verdict_coverage", str(exc), details=list(exc.labels)
                ) from None
            except engine.PhaseOrderError as exc:
                raise ApiError(409, "phase_conflict", str(exc)) from None
            except LabelError as exc:
                raise ApiError(422, "bad_label", str(exc)) from None
            payload = {
                "result": result_payload,
                "terminal": s.terminal,
                "phase_step": s.phase_step,
                "profile": _profile_payload(managed),
            }
            if not s.terminal and not s.config.sdd_only:
                payload["next_suggestion"] = _suggestion_payload(s)
            return payload

    @app.post("/sessions/{session_id}/advance")
    def advance(session_id: str):
        managed = manager.get_live(session_id)
        s = managed.session
        return {
            "phase_step": s.phase_step,
            "terminal": s.terminal,
            "current_phase": None
            if s.config.sdd_only or s.terminal
            else s.state.current_frame.phase,  # type: ignore[union-attr]
        }

    @app.get("/sessions/{session_id}/profile")
    def get_profile(session_id: str):
        managed = manager.get(session_id)
        if isinstance(managed, RecoveredSession):
            return managed.profile_payload(managed.id)
        return _profile_payload(managed)

    @app.post("/sessions/{session_id}/decision")
    def post_decision(session_id: str, body: DecisionBody):
        managed = manager.get(session_id)
        try:
            disposition = Disposition(kind=body.kind, note=body.note)
        except ValueError as exc:
            raise ApiError(422, "bad_disposition", str(exc)) from None
        if isinstance(managed, RecoveredSession):
            if not managed.terminal:
                raise ApiError(
                    409, "not_terminal", "session did not reach its final phase"
                )
            managed.decision = disposition
            return {"decision": {"kind": disposition.kind, "note": disposition.note}}
        with managed.lock:
            try:
                managed.session.set_decision(disposition)
            except engine.PhaseOrderError as exc:
                raise ApiError(409, "not_terminal", str(exc)) from None
        return {"decision": {"kind": disposition.kind, "note": disposition.note}}

    @app.get("/sessions/{session_id}/db")
    def get_db(session_id: str):
        managed = manager.get(session_id)
        if isinstance(managed, RecoveredSession):
            return PlainTextResponse(dbfile.serialize(managed.doc))
        text = managed.session.db_text()
        if text is None:
            raise ApiError(404, "no_records", "no phase has been recorded yet")
        return PlainTextResponse(text)

    @app.get("/sessions/{session_id}/timing.csv")
    def get_timing_csv(session_id: str):
        managed = manager.get(session_id)
        if isinstance(managed, RecoveredSession):
            payload = managed.profile_payload(managed.id)["timing"]
            rows = [
                timing.ChartRow(
                    n=managed.grid.population,
                    t_other=payload["t_other"],
                    t_d_seq=payload["t_d_sequential"],
                    t_d_conc=payload["t_d_concurrent"],
                    t_saved=payload["t_saved"],
                )
            ]
        else:
            s = managed.session
            rows = timing.chart_series([(s.grid.population, s.timing_report())])
        return PlainTextResponse(timing.chart_csv(rows), media_type="text/csv")

    return app


def __getattr__(name: str):
    # Lazy default app so `uvicorn cddsat.service:app` works without the
    # import itself touching the data directory.
    if name == "app":
        return create_app()
    raise AttributeError(name)
