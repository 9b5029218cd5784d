"""Command-line interface: exit codes, outputs, and written files."""

import json
from pathlib import Path

import pytest

from cddsat.cli import main

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _run(capsys, argv: list[str]) -> tuple[int, str, str]:
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# -- simulate ------------------------------------------------------------------


def test_simulate_scripted_run_writes_everything(tmp_path, capsys):
    db = tmp_path / "run.db"
    tables = tmp_path / "tables.csv"
    figures = tmp_path / "figs"
    code, out, err = _run(capsys, [
        "simulate", "--population", "48", "--cols", "4", "--schedule", "paper48",
        "--verdict-script", str(FIXTURES / "table45.script"),
        "--out-db", str(db), "--tables", str(tables), "--figures", str(figures),
    ])
    assert code == 0, err
    summary = json.loads(out)
    assert summary["population"] == 48
    assert summary["phases"] == 3
    assert summary["inspections"] == 9
    assert summary["detections"] == 10
    assert summary["terminal"] is True
    assert summary["ratio"] == 1.0
    assert len(summary["reds"]) == 42
    assert summary["oranges"] == ["C8", "D8", "D10", "D11"]
    assert summary["greens"] == ["B11", "C12"]
    assert summary["timing"] == {
        "mode": "sequential",
        "t_other": 602.66,
        "t_d": 113.0,
        "t_saved": 489.66,
    }
    assert db.read_text() == (GOLDEN / "run48.db").read_text()
    assert tables.read_bytes() == (GOLDEN / "run48_tables.csv").read_bytes()
    for name in ("profile.png", "timing.png"):
        assert (figures / name).read_bytes()[:8] == PNG_MAGIC


def test_simulate_scenario_runs_are_deterministic(tmp_path, capsys):
    def run(name: str) -> tuple[dict, bytes]:
        db = tmp_path / name
        code, out, _ = _run(capsys, [
            "simulate", "--population", "24", "--cols", "4",
            "--scenario", "rust_oxidation", "--seed", "3", "--out-db", str(db),
        ])
        assert code == 0
        summary = json.loads(out)
        summary.pop("db")
        return summary, db.read_bytes()

    first = run("a.db")
    second = run("b.db")
    assert first == second


def test_simulate_scan_only_yard(tmp_path, capsys):
    db = tmp_path / "tiny.db"
    code, out, _ = _run(capsys, [
        "simulate", "--population", "2", "--cols", "1",
        "--sdd-only", "--scenario", "pristine", "--out-db", str(db),
    ])
    assert code == 0
    summary = json.loads(out)
    assert summary["terminal"] is True
    assert summary["ratio"] == 1.0
    assert summary["greens"] == ["A1", "A2"]
    assert summary["db"] is None  # direct scans produce no phase records
    assert not db.exists()


def test_simulate_knowledge_replay(tmp_path, capsys):
    store = tmp_path / "knowledge.tsv"
    argv = [
        "simulate", "--population", "48", "--cols", "4", "--schedule", "paper48",
        "--scenario", "rust_oxidation", "--seed", "5",
        "--knowledge", str(store), "--verify-knowledge",
    ]
    code, out, _ = _run(capsys, argv + ["--out-db", str(tmp_path / "a.db")])
    assert code == 0
    first = json.loads(out)
    assert first["replayed"] is False
    assert store.exists()

    code, out, _ = _run(capsys, argv + ["--out-db", str(tmp_path / "b.db")])
    assert code == 0
    second = json.loads(out)
    assert second["replayed"] is True
    assert second["phases"] == 0
    assert second["detections"] == 0
    assert second["ratio"] == first["ratio"]
    assert second["reds"] == first["reds"]


def test_simulate_script_that_ends_too_early(tmp_path, capsys):
    script = tmp_path / "short.script"
    script.write_text("1:C12=green,D1=red,A7=red\n")
    code, _, err = _run(capsys, [
        "simulate", "--population", "48", "--cols", "4", "--schedule", "paper48",
        "--verdict-script", str(script), "--out-db", str(tmp_path / "x.db"),
    ])
    assert code == 1
    assert "not finished" in err


def test_simulate_bad_script_is_a_data_error(tmp_path, capsys):
    script = tmp_path / "bad.script"
    script.write_text("1:C12\n")
    code, _, err = _run(capsys, [
        "simulate", "--population", "48", "--cols", "4",
        "--verdict-script", str(script), "--out-db", str(tmp_path / "x.db"),
    ])
    assert code == 1
    assert "error:" in err


@pytest.mark.parametrize("argv", [
    ["simulate", "--population", "48"],                          # no verdict source
    ["simulate", "--population", "48", "--sdd-only"],            # scans need a scenario
    ["simulate", "--population", "2", "--scenario", "pristine"],  # too small to triangulate
])
def test_simulate_usage_errors(tmp_path, capsys, argv):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    assert excinfo.value.code == 2


# -- parse-db ------------------------------------------------------------------


def test_parse_db_prints_json(capsys):
    code, out, _ = _run(capsys, ["parse-db", str(FIXTURES / "fig7.db")])
    assert code == 0
    doc = json.loads(out)
    assert doc["terminated"] is True
    assert [r["phase"] for r in doc["records"]] == [1, 2]
    assert doc["records"][0]["complete"] is True
    assert len(doc["records"][0]["red"]) == 38
    assert doc["records"][1]["complete"] is False
    assert "red" not in doc["records"][1]


def test_parse_db_reports_byte_offset(tmp_path, capsys):
    bad = tmp_path / "bad.db"
    bad.write_text("1/PhaseContainers:A01;\nEND\n")
    code, _, err = _run(capsys, ["parse-db", str(bad)])
    assert code == 1
    assert "at byte" in err


def test_parse_db_missing_file(tmp_path, capsys):
    code, _, err = _run(capsys, ["parse-db", str(tmp_path / "ghost.db")])
    assert code == 1
    assert "error:" in err


# -- bench ---------------------------------------------------------------------


def test_bench_writes_sorted_series(tmp_path, capsys):
    out_prefix = tmp_path / "series" / "b"
    code, out, _ = _run(capsys, [
        "bench", "--populations", "56", "48", "--seed", "1",
        "--out", str(out_prefix),
    ])
    assert code == 0
    summary = json.loads(out)
    assert [row["n"] for row in summary["rows"]] == [48, 56]
    csv_text = out_prefix.with_suffix(".csv").read_text()
    assert csv_text.splitlines()[0] == "n,t_other,t_d_seq,t_d_conc,t_saved"
    assert len(csv_text.splitlines()) == 3
    rows = json.loads(out_prefix.with_suffix(".json").read_text())
    assert [row["n"] for row in rows] == [48, 56]
    assert out_prefix.with_suffix(".png").read_bytes()[:8] == PNG_MAGIC


def test_bench_averages_repeats(tmp_path, capsys):
    code, out, _ = _run(capsys, [
        "bench", "--populations", "12", "--repeats", "3",
        "--out", str(tmp_path / "r"),
    ])
    assert code == 0
    summary = json.loads(out)
    assert len(summary["rows"]) == 1
    assert summary["rows"][0]["n"] == 12


@pytest.mark.parametrize("argv", [
    ["bench", "--populations", "48", "48", "--out", "x"],       # duplicate n
    ["bench", "--populations", "2", "--out", "x"],              # below minimum
    ["bench", "--populations", "12", "24", "--cols", "4", "--out", "x"],
    ["bench", "--populations", "12", "--repeats", "0", "--out", "x"],
])
def test_bench_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    assert excinfo.value.code == 2
