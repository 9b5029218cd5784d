"""Command-line entry point.

    cddsat simulate  --population 48 --cols 4 --schedule paper48 \\
                     --verdict-script fixtures/table45.script --out-db run.db
    cddsat parse-db  fixtures/fig7.db
    cddsat bench     --populations 48 96 --scenario rust_oxidation --out bench
    cddsat serve     --config service.conf

Exit codes: 0 success, 1 data error (bad file, failing run), 2 usage.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from . import dbfile, knowledge, report, timing
from .engine import SCHEDULES, SAMPLERS, PhaseOrderError, VerdictCoverageError
from .estimator import DEFAULT_STEP_FRACTION
from .grid import MET_CHEBYSHEV, MET_EUCLIDEAN, GridError
from .sdd import MODE_CONCURRENT, MODE_SEQUENTIAL, SCENARIOS
from .session import InspectionSession, SessionConfig, parse_verdict_script

__all__ = ["main"]


def _auto_cols(population: int) -> int:
    """Divisor of the population closest to its square root."""
    best = 1
    for c in range(1, population + 1):
        if population % c == 0 and abs(c - math.sqrt(population)) < abs(
            best - math.sqrt(population)
        ):
            best = c
    return best


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--schedule", choices=SCHEDULES, default="inset1")
    p.add_argument("--sampler", choices=SAMPLERS, default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--scan",
        dest="scan_mode",
        choices=(MODE_SEQUENTIAL, MODE_CONCURRENT),
        default=MODE_SEQUENTIAL,
    )
    p.add_argument("--mean-scan", type=float, default=timing.DEFAULT_MEAN_SCAN_SECONDS,
                   help="simulated seconds per detection scan")
    p.add_argument("--sorting-seconds", type=float, default=0.0)
    p.add_argument("--metric", choices=(MET_EUCLIDEAN, MET_CHEBYSHEV),
                   default=MET_EUCLIDEAN)
    p.add_argument("--step-fraction", type=float, default=DEFAULT_STEP_FRACTION,
                   help="coverage growth per phase, as a fraction of the reach")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cddsat",
        description="Triangulated cargo-damage inspection runs, DB tooling, "
        "benchmarks, and the HTTP service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run all phases in one process")
    sim.add_argument("--population", type=int, required=True)
    sim.add_argument("--cols", type=int, default=None,
                     help="columns in the yard (default: divisor nearest sqrt)")
    _add_run_flags(sim)
    sim.add_argument("--scenario", choices=SCENARIOS, default=None,
                     help="draw verdicts from this synthetic scenario")
    sim.add_argument("--verdict-script", type=Path, default=None,
                     help="fixture script: one 'phase:LABEL=color,...' line per phase")
    sim.add_argument("--sdd-only", action="store_true",
                     help="surface scans for every container, no triangulation")
    sim.add_argument("--knowledge", type=Path, default=None,
                     help="knowledge store file; hits skip detection")
    sim.add_argument("--verify-knowledge", action="store_true",
                     help="replay every cache hit through the estimator")
    sim.add_argument("--out-db", type=Path, default=None,
                     help="DB file path (default: ./sat-<timestamp>.db)")
    sim.add_argument("--tables", type=Path, default=None,
                     help="also export the two-section CSV tables here")
    sim.add_argument("--figures", type=Path, default=None,
                     help="directory for profile.png and timing.png")

    par = sub.add_parser("parse-db", help="parse a DB file and print it as JSON")
    par.add_argument("path", type=Path)

    ben = sub.add_parser("bench", help="timing series across populations")
    ben.add_argument("--populations", type=int, nargs="+", required=True)
    ben.add_argument("--cols", type=int, default=None,
                     help="columns (single population only; default auto)")
    _add_run_flags(ben)
    ben.add_argument("--scenario", choices=SCENARIOS, default="rust_oxidation")
    ben.add_argument("--repeats", type=int, default=1)
    ben.add_argument("--out", type=Path, default=Path("bench"),
                     help="output prefix for .csv/.json/.png")

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--config", type=Path, default=None)
    srv.add_argument("--host", default=None)
    srv.add_argument("--port", type=int, default=None)
    return parser


def _summary(session: InspectionSession, db_path: Path | None, tables: Path | None) -> dict:
    profile = session.profile()
    rep = session.timing_report()
    out: dict = {
        "population": session.grid.population,
        "cols": session.grid.cols,
        "rows": session.grid.rows,
        "schedule": session.config.schedule,
        "phases": session.phase_step,
        "inspections": session.inspections,
        "detections": session.detections,
        "replayed": session.replayed,
        "terminal": session.terminal,
        "db": str(db_path) if db_path is not None else None,
        "tables": str(tables) if tables is not None else None,
        "timing": {
            "mode": rep.mode,
            "t_other": round(rep.t_other, 2),
            "t_d": round(rep.t_d, 2),
            "t_saved": round(rep.t_saved, 2),
        },
    }
    if profile is None:
        out["ratio"] = 0.0
        out["reds"] = out["oranges"] = out["greens"] = []
    else:
        out["ratio"] = profile.ratio
        out["reds"] = list(profile.reds)
        out["oranges"] = list(profile.oranges)
        out["greens"] = list(profile.greens)
    return out


def cmd_simulate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.verdict_script is None and args.scenario is None:
        parser.error("simulate needs a verdict source: --scenario or --verdict-script")
    if args.sdd_only and args.scenario is None:
        parser.error("--sdd-only scans every container and needs --scenario")
    if args.population < 3 and not args.sdd_only:
        parser.error(
            f"a population of {args.population} is below the 3-container minimum "
            "for triangulation; pass --sdd-only to scan it anyway"
        )
    cols = args.cols if args.cols is not None else _auto_cols(args.population)
    db_path = args.out_db
    if db_path is None:
        db_path = Path(time.strftime("sat-%Y%m%d-%H%M%S.db"))
    store = None
    if args.knowledge is not None:
        store = knowledge.KnowledgeStore(args.knowledge, verify_hits=args.verify_knowledge)
    try:
        config = SessionConfig(
            population=args.population,
            cols=cols,
            schedule=args.schedule,
            sampler=args.sampler,
            seed=args.seed,
            scenario=args.scenario,
            scan_mode=args.scan_mode,
            mean_scan_seconds=args.mean_scan,
            sorting_seconds=args.sorting_seconds,
            metric=args.metric,
            step_fraction=args.step_fraction,
            sdd_only=args.sdd_only,
        )
    except (ValueError, GridError) as exc:
        parser.error(str(exc))
    try:
        session = InspectionSession(config, db_path=db_path, store=store)
        if args.verdict_script is not None:
            script = parse_verdict_script(args.verdict_script.read_text())
            for phase in sorted(script):
                session.submit_scripted(phase, script[phase])
            if not session.terminal:
                print(
                    f"error: script ended after phase {session.phase_step} but "
                    "the run is not finished",
                    file=sys.stderr,
                )
                return 1
        else:
            session.run_scenario()
    except (GridError, VerdictCoverageError, PhaseOrderError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    wrote_db = db_path if (session.state is not None and session.state.records) else None
    tables_path = None
    if args.tables is not None:
        doc = session.document()
        if doc is not None:
            args.tables.parent.mkdir(parents=True, exist_ok=True)
            args.tables.write_text(dbfile.export_tables(doc, session.grid), encoding="ascii")
            tables_path = args.tables
    if args.figures is not None:
        args.figures.mkdir(parents=True, exist_ok=True)
        report.save_profile_figure(
            session.grid, session.profile(), args.figures / "profile.png"
        )
        report.save_run_timing_figure(
            session.timing_report(),
            args.figures / "timing.png",
            population=session.grid.population,
        )
    print(json.dumps(_summary(session, wrote_db, tables_path), indent=2))
    return 0


def cmd_parse_db(args: argparse.Namespace) -> int:
    try:
        doc = dbfile.parse(args.path.read_bytes())
    except dbfile.ParseError as exc:
        print(f"error: {args.path}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(dbfile.document_to_dict(doc), indent=2))
    return 0


def cmd_bench(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if len(set(args.populations)) != len(args.populations):
        parser.error("duplicate population in --populations")
    if any(n < 3 for n in args.populations):
        parser.error("bench populations must be at least 3")
    if args.cols is not None and len(args.populations) != 1:
        parser.error("--cols applies only to a single-population bench")
    if args.repeats < 1:
        parser.error("--repeats must be >= 1")
    runs = []
    for n in args.populations:
        cols = args.cols if args.cols is not None else _auto_cols(n)
        reports = []
        for i in range(args.repeats):
            config = SessionConfig(
                population=n,
                cols=cols,
                schedule=args.schedule,
                sampler=args.sampler,
                seed=args.seed + i,
                scenario=args.scenario,
                scan_mode=args.scan_mode,
                mean_scan_seconds=args.mean_scan,
                sorting_seconds=args.sorting_seconds,
                metric=args.metric,
                step_fraction=args.step_fraction,
            )
            session = InspectionSession(config)
            session.run_scenario()
            reports.append(session.timing_report())
        if args.repeats == 1:
            runs.append(timing.chart_series([(n, reports[0])])[0])
        else:
            # repeats only matter when verdict randomness changes the phase
            # count; average the columns down to one row per population
            k = len(reports)
            seq = sum(
                sum(r.phase_sorting) + r.detection_total(MODE_SEQUENTIAL) for r in reports
            ) / k
            conc = sum(
                sum(r.phase_sorting) + r.detection_total(MODE_CONCURRENT) for r in reports
            ) / k
            own = sum(r.t_d for r in reports) / k
            runs.append(
                timing.ChartRow(
                    n=n,
                    t_other=reports[0].t_other,
                    t_d_seq=seq,
                    t_d_conc=conc,
                    t_saved=reports[0].t_other - own,
                )
            )
    rows = tuple(sorted(runs, key=lambda r: r.n))
    csv_path = args.out.with_suffix(".csv")
    json_path = args.out.with_suffix(".json")
    png_path = args.out.with_suffix(".png")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(timing.chart_csv(rows), encoding="ascii")
    json_path.write_text(timing.chart_json(rows), encoding="ascii")
    report.save_timing_series_figure(rows, png_path)
    print(
        json.dumps(
            {
                "rows": [
                    {
                        "n": r.n,
                        "t_other": round(r.t_other, 2),
                        "t_d_seq": round(r.t_d_seq, 2),
                        "t_d_conc": round(r.t_d_conc, 2),
                        "t_saved": round(r.t_saved, 2),
                    }
                    for r in rows
                ],
                "csv": str(csv_path),
                "json": str(json_path),
                "png": str(png_path),
            },
            indent=2,
        )
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .config import load_config
    from .service import create_app

    config = load_config(args.config)
    if args.host is not None:
        config.host = args.host
    if args.port is not None:
        config.port = args.port
    uvicorn.run(create_app(config), host=config.host, port=config.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args, parser)
    if args.command == "parse-db":
        return cmd_parse_db(args)
    if args.command == "bench":
        return cmd_bench(args, parser)
    if args.command == "serve":
        return cmd_serve(args)
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
