"""Acceptance gate: ten pinned behaviors, one test (one pass/fail line) each.

Each test is self-contained and oracle-driven: expected values are either
computed here from first principles or pinned published constants.
"""

import math
import random
import time
from pathlib import Path

import pytest

from cddsat import dbfile, timing
from cddsat.estimator import (
    Status,
    Verdict,
    band,
    estimate,
    nominal_p,
    propagation_reach,
)
from cddsat.grid import Grid, coord_to_label, distance
from cddsat.knowledge import KnowledgeStore
from cddsat.sdd import MODE_CONCURRENT, MODE_SEQUENTIAL, total_scan_seconds
from cddsat.session import InspectionSession, SessionConfig

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

MEAN_SCAN = 12.5554  # pinned published per-scan seconds


def _scripted_run(script, db_path=None, **overrides) -> InspectionSession:
    defaults = dict(population=48, cols=4, schedule="paper48")
    defaults.update(overrides)
    session = InspectionSession(SessionConfig(**defaults), db_path=db_path)
    for phase in sorted(script):
        session.submit_scripted(phase, script[phase])
    return session


def test_01_three_phases_with_pinned_side_populations(script48):
    started = time.perf_counter()
    session = _scripted_run(script48)
    elapsed = time.perf_counter() - started

    assert session.terminal
    assert session.phase_step == 3
    records = session.state.records
    side_sizes = [
        (len(r.frame.alpha), len(r.frame.beta), len(r.frame.gamma)) for r in records
    ]
    assert side_sizes == [(4, 12, 12), (3, 10, 10), (2, 3, 3)]
    assert [len(r.scan_seconds) for r in records] == [3, 3, 3]
    assert session.inspections == 9
    assert elapsed < 1.0


def test_02_per_phase_side_label_lists_are_pinned(script48):
    session = _scripted_run(script48)
    frames = [r.frame for r in session.state.records]
    assert frames[0].alpha == ("A12", "B12", "C12", "D12")
    assert frames[0].beta == tuple(f"D{i}" for i in range(1, 13))
    assert frames[0].gamma == tuple(f"A{i}" for i in range(1, 13))
    assert frames[1].alpha == ("B11", "C11", "D11")
    assert frames[1].beta == tuple(f"D{i}" for i in range(2, 12))
    assert frames[1].gamma == tuple(f"B{i}" for i in range(2, 12))
    assert frames[2].alpha == ("C10", "D10")
    assert frames[2].beta == ("D8", "D9", "D10")
    assert frames[2].gamma == ("C8", "C9", "C10")


def test_03_classified_ratio_endpoints_and_monotonicity(script48):
    session = InspectionSession(
        SessionConfig(population=48, cols=4, schedule="paper48")
    )
    ratios = []
    for phase in sorted(script48):
        session.submit_scripted(phase, script48[phase])
        ratios.append(session.profile().ratio)
    assert ratios[0] == 0.0625  # exactly 3/48
    assert 0.0625 < ratios[1] < 1.0
    assert ratios[2] == 1.0
    assert all(a <= b for a, b in zip(ratios, ratios[1:]))


def test_04_wire_sample_parses_and_serializer_is_canonical(wire56_text):
    doc = dbfile.parse(wire56_text)
    assert doc.terminated
    first, second = doc.records
    assert first.alfa == ("B7",)
    assert first.beta == ("H4",)
    assert first.gamma == ("A2",)
    assert len(first.red) == 38
    assert len(first.orange) == 18
    assert first.green == ()
    assert first.total_sorting_time == 0.68
    assert first.total_detection_time == 193.69
    assert not second.complete

    canonical = dbfile.serialize(doc)
    assert dbfile.serialize(dbfile.parse(canonical)) == canonical

    # the parser must reject or accept, never crash: 10**4 adversarial inputs
    rng = random.Random(2026)
    alphabet = "0123456789ABCDGHZaefmnor:;,./- \t\nPhaseContainerAlfBetGmRdOrngTSDELX"
    for _ in range(10_000):
        kind = rng.randrange(3)
        if kind == 0:
            text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 80)))
        elif kind == 1:
            cut = sorted(rng.randrange(len(wire56_text)) for _ in range(2))
            text = wire56_text[: cut[0]] + wire56_text[cut[1] :]
        else:
            pos = rng.randrange(len(wire56_text))
            text = (
                wire56_text[:pos]
                + rng.choice(alphabet)
                + wire56_text[pos:]
            )
        try:
            dbfile.parse(text)
        except dbfile.ParseError:
            pass


def test_05_timing_pins_for_the_48_yard():
    started = time.perf_counter()
    baseline = timing.baseline_time(48, MEAN_SCAN)
    nine_scans = total_scan_seconds((MEAN_SCAN,) * 9, MODE_SEQUENTIAL)
    saved = timing.t_saved(baseline, nine_scans)
    elapsed = time.perf_counter() - started

    assert baseline == pytest.approx(602.66, abs=0.01)
    assert nine_scans == pytest.approx(113.00, abs=0.01)
    assert saved == pytest.approx(489.66, abs=0.02)
    assert elapsed < 1.0


def test_06_concurrent_triples_cut_sequential_time_to_a_third():
    # dyadic equal durations make the thirds exact in float arithmetic
    equal = (12.5,) * 9
    seq = total_scan_seconds(equal, MODE_SEQUENTIAL)
    conc = total_scan_seconds(equal, MODE_CONCURRENT)
    assert conc == seq / 3

    published = (MEAN_SCAN,) * 9
    assert total_scan_seconds(published, MODE_CONCURRENT) == pytest.approx(
        total_scan_seconds(published, MODE_SEQUENTIAL) / 3, abs=1e-9
    )

    rng = random.Random(1905)
    for _ in range(2_000):
        durations = tuple(rng.uniform(0.0, 30.0) for _ in range(rng.randrange(1, 13)))
        assert total_scan_seconds(durations, MODE_CONCURRENT) <= total_scan_seconds(
            durations, MODE_SEQUENTIAL
        ) + 1e-9


def test_07_banding_boundaries_and_partition():
    assert band(0.2) is Status.ORANGE
    assert band(0.5) is Status.ORANGE
    for status in Status:
        assert band(nominal_p(status)) is status

    rng = random.Random(407)
    for _ in range(100_000):
        p = rng.random()
        status = band(p)  # totality: every p lands in exactly one bucket
        expected = (
            Status.GREEN if p < 0.2 else Status.ORANGE if p <= 0.5 else Status.RED
        )
        assert status is expected


def test_08_estimator_decay_aggregation_and_partition():
    grid = Grid(cols=12, rows=12)
    reach = propagation_reach(grid.population)
    assert reach == 13.0

    seed = Verdict.from_status("D5", Status.RED)
    profile = estimate([seed], grid, phase=1, terminal=True)
    origin = grid.require("D5")
    by_distance = []
    for coord in grid.coords():
        label = coord_to_label(coord)
        d = distance(origin, coord, "euclidean")
        expected = seed.p * min(1.0, reach / max(d, 1.0))
        assert profile.p_by_label[label] == pytest.approx(expected, abs=1e-12)
        by_distance.append((d, profile.p_by_label[label]))
    by_distance.sort()
    for (d1, p1), (d2, p2) in zip(by_distance, by_distance[1:]):
        assert p2 <= p1 + 1e-12  # influence decays with distance

    rng = random.Random(88)
    labels = grid.labels()
    for _ in range(20):
        chosen = rng.sample(labels, 4)
        seeds = [Verdict.from_p(lb, rng.random()) for lb in chosen]
        extra_label = rng.choice([lb for lb in labels if lb not in chosen])
        extra = Verdict.from_p(extra_label, rng.random())
        base = estimate(seeds, grid, phase=3, terminal=True)
        grown = estimate(seeds + [extra], grid, phase=3, terminal=True)
        for label in labels:
            if label != extra_label:
                assert grown.p_by_label[label] >= base.p_by_label[label] - 1e-12

    final = estimate(
        [Verdict.from_p("A1", 0.9), Verdict.from_p("L12", 0.1)],
        grid,
        phase=4,
        terminal=True,
    )
    classified = set(final.reds) | set(final.oranges) | set(final.greens)
    assert classified == set(labels)
    assert len(final.reds) + len(final.oranges) + len(final.greens) == len(labels)


def test_09_identical_scenario_rerun_replays_from_knowledge(tmp_path):
    store = KnowledgeStore(tmp_path / "knowledge.tsv", verify_hits=True)
    config = SessionConfig(
        population=48, cols=4, schedule="paper48", scenario="rust_oxidation", seed=11
    )
    first = InspectionSession(config, store=store)
    first.run_scenario()
    assert first.terminal and not first.replayed
    assert first.detections > 0

    reloaded = KnowledgeStore(tmp_path / "knowledge.tsv", verify_hits=True)
    second = InspectionSession(config, store=reloaded)
    assert second.replayed  # the soundness replay ran inside the lookup
    assert second.terminal
    assert second.detections == 0
    assert second.profile() == first.profile()


def test_10_identical_runs_are_byte_identical(tmp_path, script48):
    paths = (tmp_path / "one.db", tmp_path / "two.db")
    sessions = [_scripted_run(script48, db_path=p) for p in paths]
    assert paths[0].read_bytes() == paths[1].read_bytes()
    exports = [
        dbfile.export_tables(s.document(), s.grid).encode("ascii") for s in sessions
    ]
    assert exports[0] == exports[1]
    charts = [
        timing.chart_csv(
            timing.chart_series([(s.grid.population, s.timing_report())])
        )
        for s in sessions
    ]
    assert charts[0] == charts[1]
