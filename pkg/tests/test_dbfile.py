"""Wire-format reader/writer conformance and the CSV export."""

import random
from pathlib import Path

import pytest

from cddsat.dbfile import (
    DbDocument,
    ParseError,
    PhaseRecord,
    document_to_dict,
    export_tables,
    parse,
    serialize,
)
from cddsat.engine import Rect
from cddsat.grid import build_grid

GOLDEN = Path(__file__).resolve().parent / "golden"

MINIMAL = "1/PhaseContainers:A1,B1,C1;Alfa:A1;Beta:C1;Gamma:B1;END"


# -- the archived 56-container sample -----------------------------------------

def test_archived_sample_first_record(wire56_text):
    doc = parse(wire56_text)
    assert doc.terminated
    assert len(doc.records) == 2

    first = doc.records[0]
    assert first.phase_no == 1
    assert first.alfa == ("B7",)
    assert first.beta == ("H4",)
    assert first.gamma == ("A2",)
    assert len(first.red) == 38
    assert len(first.orange) == 18
    assert first.green == ()
    assert first.total_sorting_time == 0.68
    assert first.total_detection_time == 193.69
    # The full yard in placement order, exactly as an 8-column layout names it.
    assert list(first.containers) == build_grid(56, 8).labels()


def test_archived_sample_second_record(wire56_text):
    second = parse(wire56_text).records[1]
    assert second.phase_no == 2
    assert not second.complete
    assert second.alfa == ("B6",)
    assert second.beta == ("G3",)
    assert second.gamma == ("B3",)
    assert len(second.containers) == 36
    # The contracted frame drops one column per side and the top row.
    assert list(second.containers) == Rect(1, 6, 0, 5).labels()


def test_canonical_form_is_a_fixed_point(wire56_text):
    doc = parse(wire56_text)
    canonical = serialize(doc)
    assert parse(canonical) == doc
    assert serialize(parse(canonical)) == canonical
    assert canonical.endswith("END\n")
    # One record per line in canonical output.
    body = canonical.splitlines()
    assert len(body) == 3
    assert body[0].startswith("1/PhaseContainers:")
    assert body[1].startswith("2/PhaseContainers:")


def test_whitespace_is_insignificant_everywhere(wire56_text):
    doc = parse(wire56_text)
    squeezed = "".join(wire56_text.split())
    assert parse(squeezed) == doc
    rng = random.Random(99)
    loose = "".join(
        ch + (rng.choice(" \n\t") if rng.random() < 0.2 else "") for ch in squeezed
    )
    assert parse(loose) == doc


def test_empty_green_list_accepts_both_closers():
    base = (
        "1/PhaseContainers:A1,B1,C1;Alfa:A1;Beta:C1;Gamma:B1;"
        "Red:A1;Orange:B1;Green:{close}TotalSortingTime:0.10;TotalDetectionTime:2.00;END"
    )
    with_semicolon = parse(base.format(close=";"))
    with_colon = parse(base.format(close=":"))
    assert with_semicolon == with_colon
    assert with_semicolon.records[0].green == ()
    # The writer only ever emits the semicolon form.
    assert "Green:;" in serialize(with_colon)


def test_partial_final_record_round_trips():
    text = MINIMAL
    doc = parse(text)
    assert not doc.records[0].complete
    assert serialize(doc) == "1/PhaseContainers:A1,B1,C1;Alfa:A1;Beta:C1;Gamma:B1;\nEND\n"


def test_times_accept_bare_integers():
    text = (
        "1/PhaseContainers:A1,B1,C1;Alfa:A1;Beta:C1;Gamma:B1;"
        "Red:;Orange:;Green:;TotalSortingTime:5;TotalDetectionTime:40;END"
    )
    rec = parse(text).records[0]
    assert rec.total_sorting_time == 5.0
    assert rec.total_detection_time == 40.0
    # ...but the writer always renders two decimals.
    assert "TotalSortingTime:5.00;" in serialize(parse(text))


# -- reader errors ---------------------------------------------------------------

def test_parse_error_carries_byte_offsets():
    with pytest.raises(ParseError) as err:
        parse("1/PhaseContainers:A1;Alfa:A1;Beta:A1;Gamma:A01;END")
    assert err.value.offset == 43
    assert "A01" in str(err.value)

    with pytest.raises(ParseError) as err:
        parse(MINIMAL.replace("END", ""))
    assert "END" in str(err.value)

    with pytest.raises(ParseError) as err:
        parse(MINIMAL + "leftovers")
    assert "trailing" in str(err.value)

    with pytest.raises(ParseError) as err:
        parse(b"1/Phase\xffContainers:A1;END")
    assert err.value.offset == 7


def test_parse_rejects_structural_mistakes():
    with pytest.raises(ParseError):
        parse("END")  # no records at all
    with pytest.raises(ParseError):
        parse("2/PhaseContainers:A1,B1,C1;Alfa:A1;Beta:C1;Gamma:B1;END")
    double = (
        "1/PhaseContainers:A1,B1,C1;Alfa:A1;Beta:C1;Gamma:B1;"
        "Red:;Orange:;Green:;TotalSortingTime:0;TotalDetectionTime:0;"
    )
    with pytest.raises(ParseError) as err:
        parse(double + double + "END")
    assert "out of order" in str(err.value)
    # Sides must come from the record's own population.
    with pytest.raises(ParseError) as err:
        parse("1/PhaseContainers:A1,B1,C1;Alfa:D4;Beta:C1;Gamma:B1;END")
    assert "outside" in str(err.value)
    # One label cannot carry two statuses.
    with pytest.raises(ParseError) as err:
        parse(
            "1/PhaseContainers:A1,B1,C1;Alfa:A1;Beta:C1;Gamma:B1;"
            "Red:A1;Orange:A1;Green:;TotalSortingTime:0;TotalDetectionTime:0;END"
        )
    assert "both" in str(err.value)


def test_parse_rejects_interior_partial_record():
    partial = "1/PhaseContainers:A1,B1,C1;Alfa:A1;Beta:C1;Gamma:B1;"
    full2 = (
        "2/PhaseContainers:A1,B1,C1;Alfa:A1;Beta:C1;Gamma:B1;"
        "Red:;Orange:;Green:;TotalSortingTime:0;TotalDetectionTime:0;"
    )
    with pytest.raises(ParseError) as err:
        parse(partial + full2 + "END")
    assert "incomplete" in str(err.value)


def test_parser_never_crashes_on_noise(wire56_text):
    """Anything at all must come back as a document or a ParseError."""
    rng = random.Random(2024)
    corpus = wire56_text
    alphabet = "ABCD0123456789:;,/ \n\tENDPhaseContainersRedOrangeGreen\xff"
    for trial in range(2000):
        kind = trial % 3
        if kind == 0:
            text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 120)))
        elif kind == 1:
            cut = rng.randrange(0, len(corpus))
            text = corpus[:cut] + "".join(
                rng.choice(alphabet) for _ in range(rng.randrange(0, 10))
            )
        else:
            chars = list(corpus)
            for _ in range(rng.randrange(1, 6)):
                chars[rng.randrange(len(chars))] = rng.choice(alphabet)
            text = "".join(chars)
        try:
            parse(text)
        except ParseError:
            pass


# -- writer guards -----------------------------------------------------------------

def test_serialize_refuses_unfinished_documents():
    record = parse(MINIMAL).records[0]
    with pytest.raises(ValueError):
        serialize(DbDocument(records=(record,), terminated=False))
    with pytest.raises(ValueError):
        serialize(DbDocument(records=()))


def test_record_validation_catches_split_status():
    with pytest.raises(ValueError):
        PhaseRecord(
            phase_no=1,
            containers=("A1", "B1"),
            alfa=("A1",),
            beta=("B1",),
            gamma=("A1",),
            red=("A1",),  # lists and times must arrive together
        )


# -- CSV export --------------------------------------------------------------------

def test_export_tables_matches_golden(run48):
    session = run48()
    doc = parse(session.db_text())
    # Bytes, not read_text(): the export uses \r\n row terminators.
    expected = (GOLDEN / "run48_tables.csv").read_bytes().decode("ascii")
    assert export_tables(doc, session.grid) == expected


def test_export_tables_needs_termination(wire56_text):
    doc = parse(wire56_text)
    with pytest.raises(ValueError):
        export_tables(DbDocument(records=doc.records, terminated=False), build_grid(56, 8))


def test_document_to_dict_shape(wire56_text):
    payload = document_to_dict(parse(wire56_text))
    assert payload["terminated"] is True
    assert len(payload["records"]) == 2
    assert payload["records"][0]["complete"] is True
    assert payload["records"][0]["red"][0] == "A1"
    assert "red" not in payload["records"][1]
