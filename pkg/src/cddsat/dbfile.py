"""Line protocol for inspection records, plus tabular CSV export.

On the wire a document is a sequence of phase records terminated by END:

    1/PhaseContainers:A1,B1,...;Alfa:B7;Beta:H4;Gamma:A2;Red:...;
    Orange:...;Green:;TotalSortingTime:0.68;TotalDetectionTime:193.69;
    2/PhaseContainers:...;Alfa:B6;Beta:G3;Gamma:B3;
    END

Whitespace (including newlines) is insignificant anywhere between
characters; historic files wrap lines mid-label.  The reader also accepts
":" where ";" should follow an empty Green list.  The writer always emits
the canonical form: one record per line, ";" after every field, END on
its own final line, ASCII only.

The field spelling "Alfa" is part of the protocol; code-level naming uses
"alpha" elsewhere in the package.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Sequence

from .grid import Grid, LabelError, label_to_coord

__all__ = [
    "ParseError",
    "PhaseRecord",
    "DbDocument",
    "parse",
    "serialize",
    "export_tables",
    "record_to_dict",
    "document_to_dict",
]


class ParseError(ValueError):
    """Malformed document; carries the byte offset of the offending input."""

    def __init__(self, message: str, offset: int, expected: str | None = None):
        detail = f"at byte {offset}: {message}"
        if expected is not None:
            detail += f" (expected {expected})"
        super().__init__(detail)
        self.offset = offset
        self.expected = expected


def _check_labels(labels: Sequence[str], what: str) -> tuple[str, ...]:
    for label in labels:
        try:
            label_to_coord(label)
        except LabelError as exc:
            raise ValueError(f"{what} contains bad label: {exc}") from exc
    return tuple(labels)


@dataclass(frozen=True)
class PhaseRecord:
    """One phase on the wire.

    The three status lists and the two times travel together: a record
    either carries the full sorting outcome or none of it (an in-progress
    phase, allowed only at the end of a document).
    """

    phase_no: int
    containers: tuple[str, ...]
    alfa: tuple[str, ...]
    beta: tuple[str, ...]
    gamma: tuple[str, ...]
    red: tuple[str, ...] | None = None
    orange: tuple[str, ...] | None = None
    green: tuple[str, ...] | None = None
    total_sorting_time: float | None = None
    total_detection_time: float | None = None

    def __post_init__(self) -> None:
        if self.phase_no < 1:
            raise ValueError(f"phase_no must be >= 1, got {self.phase_no}")
        if not self.containers:
            raise ValueError(f"phase {self.phase_no}: empty container list")
        _check_labels(self.containers, "containers")
        pool = set(self.containers)
        for name, side in (("Alfa", self.alfa), ("Beta", self.beta), ("Gamma", self.gamma)):
            if not side:
                raise ValueError(f"phase {self.phase_no}: empty {name} list")
            _check_labels(side, name)
            outside = [l for l in side if l not in pool]
            if outside:
                raise ValueError(
                    f"phase {self.phase_no}: {name} labels outside the phase "
                    f"population: {', '.join(outside)}"
                )
        status_parts = (self.red, self.orange, self.green,
                        self.total_sorting_time, self.total_detection_time)
        have = [p is not None for p in status_parts]
        if any(have) and not all(have):
            raise ValueError(
                f"phase {self.phase_no}: status lists and times must be "
                "present together or absent together"
            )
        if self.complete:
            for name, lst in (("Red", self.red), ("Orange", self.orange), ("Green", self.green)):
                _check_labels(lst, name)  # type: ignore[arg-type]
            seen: dict[str, str] = {}
            for name, lst in (("Red", self.red), ("Orange", self.orange), ("Green", self.green)):
                for label in lst:  # type: ignore[union-attr]
                    if label in seen:
                        raise ValueError(
                            f"phase {self.phase_no}: label {label} in both "
                            f"{seen[label]} and {name}"
                        )
                    seen[label] = name
            if self.total_sorting_time < 0 or self.total_detection_time < 0:  # type: ignore[operator]
                raise ValueError(f"phase {self.phase_no}: negative time")

    @property
    def complete(self) -> bool:
        return self.red is not None


@dataclass(frozen=True)
class DbDocument:
    records: tuple[PhaseRecord, ...]
    terminated: bool = True

    def __post_init__(self) -> None:
        last = 0
        for rec in self.records:
            if rec.phase_no <= last:
                raise ValueError(
                    f"phase numbers must increase: {rec.phase_no} after {last}"
                )
            last = rec.phase_no
        if self.records and self.records[0].phase_no != 1:
            raise ValueError(
                f"first record must be phase 1, got {self.records[0].phase_no}"
            )
        for rec in self.records[:-1]:
            if not rec.complete:
                raise ValueError(
                    f"phase {rec.phase_no} is incomplete but not the final record"
                )


# --------------------------------------------------------------------------
# reader

class _Cursor:
    """Whitespace-stripped view of the input that remembers original offsets."""

    def __init__(self, text: str):
        chars: list[str] = []
        offsets: list[int] = []
        for i, ch in enumerate(text):
            if not ch.isspace():
                chars.append(ch)
                offsets.append(i)
        self.text = "".join(chars)
        self.offsets = offsets
        self.end_offset = len(text)
        self.i = 0

    def offset(self, i: int | None = None) -> int:
        i = self.i if i is None else i
        return self.offsets[i] if i < len(self.offsets) else self.end_offset

    def fail(self, message: str, expected: str | None = None, at: int | None = None):
        raise ParseError(message, self.offset(at), expected)

    @property
    def done(self) -> bool:
        return self.i >= len(self.text)

    def peek_literal(self, literal: str) -> bool:
        return self.text.startswith(literal, self.i)

    def expect(self, literal: str) -> None:
        if not self.peek_literal(literal):
            found = self.text[self.i : self.i + len(literal)] or "end of input"
            self.fail(f"found {found!r}", expected=repr(literal))
        self.i += len(literal)

    def take_digits(self) -> str:
        start = self.i
        while self.i < len(self.text) and self.text[self.i].isdigit():
            self.i += 1
        if self.i == start:
            found = self.text[self.i] if self.i < len(self.text) else "end of input"
            self.fail(f"found {found!r}", expected="digits")
        return self.text[start : self.i]

    def take_decimal(self) -> float:
        start = self.i
        self.take_digits()
        if self.i < len(self.text) and self.text[self.i] == ".":
            self.i += 1
            self.take_digits()
        return float(self.text[start : self.i])

    def take_label(self) -> str:
        start = self.i
        while self.i < len(self.text) and "A" <= self.text[self.i] <= "Z":
            self.i += 1
        letter_end = self.i
        while self.i < len(self.text) and self.text[self.i].isdigit():
            self.i += 1
        candidate = self.text[start : self.i]
        if letter_end == start or letter_end == self.i:
            self.fail(f"found {candidate!r}", expected="container label", at=start)
        try:
            label_to_coord(candidate)
        except LabelError:
            self.fail(f"bad container label {candidate!r}", at=start)
        return candidate

    def take_labels(self) -> tuple[str, ...]:
        labels = [self.take_label()]
        while self.peek_literal(","):
            self.i += 1
            labels.append(self.take_label())
        return tuple(labels)

    def take_labels_or_empty(self, closers: str) -> tuple[str, ...]:
        if self.i < len(self.text) and self.text[self.i] in closers:
            return ()
        return self.take_labels()


def parse(data: str | bytes) -> DbDocument:
    """Parse a document; every failure is a :class:`ParseError` with offset."""
    if isinstance(data, bytes):
        try:
            text = data.decode("ascii")
        except UnicodeDecodeError as exc:
            raise ParseError("non-ASCII byte", exc.start) from None
    else:
        text = data
    cur = _Cursor(text)
    records: list[PhaseRecord] = []
    last_phase = 0
    while True:
        if cur.peek_literal("END"):
            if not records:
                cur.fail("document has no records before END")
            cur.i += 3
            if not cur.done:
                cur.fail("trailing data after END")
            break
        if cur.done:
            cur.fail("unterminated document", expected="'END'")
        record_at = cur.i
        phase_text = cur.take_digits()
        phase_no = int(phase_text)
        if phase_no <= last_phase or (not records and phase_no != 1):
            cur.fail(
                f"phase {phase_no} out of order after {last_phase}", at=record_at
            )
        cur.expect("/")
        cur.expect("PhaseContainers:")
        containers = cur.take_labels()
        cur.expect(";")
        cur.expect("Alfa:")
        alfa = cur.take_labels()
        cur.expect(";")
        cur.expect("Beta:")
        beta = cur.take_labels()
        cur.expect(";")
        cur.expect("Gamma:")
        gamma = cur.take_labels()
        cur.expect(";")
        red = orange = green = None
        sorting = detection = None
        if cur.peek_literal("Red:"):
            cur.i += 4
            red = cur.take_labels_or_empty(";")
            cur.expect(";")
            cur.expect("Orange:")
            orange = cur.take_labels_or_empty(";")
            cur.expect(";")
            cur.expect("Green:")
            # Historic files write "Green::TotalSortingTime" for an empty
            # green list; both ";" and ":" close the field on read.
            green = cur.take_labels_or_empty(";:")
            if cur.peek_literal(";") or cur.peek_literal(":"):
                cur.i += 1
            else:
                cur.fail("unclosed Green list", expected="';'")
            cur.expect("TotalSortingTime:")
            sorting = cur.take_decimal()
            cur.expect(";")
            cur.expect("TotalDetectionTime:")
            detection = cur.take_decimal()
            cur.expect(";")
        try:
            records.append(
                PhaseRecord(
                    phase_no=phase_no,
                    containers=containers,
                    alfa=alfa,
                    beta=beta,
                    gamma=gamma,
                    red=red,
                    orange=orange,
                    green=green,
                    total_sorting_time=sorting,
                    total_detection_time=detection,
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), cur.offset(record_at)) from None
        last_phase = phase_no
    try:
        return DbDocument(records=tuple(records), terminated=True)
    except ValueError as exc:
        raise ParseError(str(exc), cur.end_offset) from None


# --------------------------------------------------------------------------
# writer

def _times(value: float) -> str:
    return format(value, ".2f")


def serialize(doc: DbDocument) -> str:
    """Canonical text for a complete document.

    Only terminated documents with at least one record are writable;
    anything else is refused before a byte is produced.
    """
    if not doc.terminated:
        raise ValueError("refusing to serialize an unterminated document")
    if not doc.records:
        raise ValueError("refusing to serialize a document with no records")
    out = io.StringIO()
    for rec in doc.records:
        out.write(f"{rec.phase_no}/PhaseContainers:{','.join(rec.containers)};")
        out.write(f"Alfa:{','.join(rec.alfa)};")
        out.write(f"Beta:{','.join(rec.beta)};")
        out.write(f"Gamma:{','.join(rec.gamma)};")
        if rec.complete:
            out.write(f"Red:{','.join(rec.red)};")
            out.write(f"Orange:{','.join(rec.orange)};")
            out.write(f"Green:{','.join(rec.green)};")
            out.write(f"TotalSortingTime:{_times(rec.total_sorting_time)};")
            out.write(f"TotalDetectionTime:{_times(rec.total_detection_time)};")
        out.write("\n")
    out.write("END\n")
    text = out.getvalue()
    text.encode("ascii")  # the protocol is 7-bit; labels/times guarantee this
    return text


# --------------------------------------------------------------------------
# tabular export

def _csv_cell(value: str) -> str:
    if any(ch in value for ch in ',"\n'):
        return '"' + value.replace('"', '""') + '"'
    return value


def _csv_row(cells: Iterable[str]) -> str:
    return ",".join(_csv_cell(str(c)) for c in cells)


_SORTING_HEADER = (
    "phase",
    "population",
    "alpha_side",
    "beta_side",
    "gamma_side",
    "alpha_detected",
    "beta_detected",
    "gamma_detected",
    "detected_red",
    "detected_orange",
    "detected_green",
    "inspections",
)

_ESTIMATE_HEADER = (
    "phase",
    "estimated_red",
    "estimated_orange",
    "estimated_green",
    "classified_ratio",
)


def _rect_dims(containers: Sequence[str]) -> tuple[int, int]:
    coords = [label_to_coord(l) for l in containers]
    cols = {c for c, _ in coords}
    rows = {r for _, r in coords}
    return len(cols), len(rows)


def export_tables(doc: DbDocument, grid: Grid) -> str:
    """Two CSV sections: the per-phase sorting view and the estimate view.

    The sorting section ends with a totals row (inspections only); ratios
    are cumulative classified counts over the full yard population.
    """
    if not doc.terminated:
        raise ValueError("export needs a terminated document")
    lines = [_csv_row(_SORTING_HEADER)]
    total_inspections = 0
    for rec in doc.records:
        width, height = _rect_dims(rec.containers)
        detected = []
        for side in (rec.alfa, rec.beta, rec.gamma):
            for label in side:
                if label not in detected:
                    detected.append(label)
        by_status = {"red": [], "orange": [], "green": []}
        if rec.complete:
            for label in detected:
                if label in rec.red:
                    by_status["red"].append(label)
                elif label in rec.orange:
                    by_status["orange"].append(label)
                elif label in rec.green:
                    by_status["green"].append(label)
        inspections = 3 if rec.complete else 0
        total_inspections += inspections
        lines.append(
            _csv_row(
                (
                    rec.phase_no,
                    len(rec.containers),
                    width,
                    height,
                    height,
                    ", ".join(rec.alfa),
                    ", ".join(rec.beta),
                    ", ".join(rec.gamma),
                    ", ".join(by_status["red"]),
                    ", ".join(by_status["orange"]),
                    ", ".join(by_status["green"]),
                    inspections,
                )
            )
        )
    lines.append(_csv_row(("total", "", "", "", "", "", "", "", "", "", "", total_inspections)))
    lines.append("")
    lines.append(_csv_row(_ESTIMATE_HEADER))
    for rec in doc.records:
        if rec.complete:
            classified = len(rec.red) + len(rec.orange) + len(rec.green)
            ratio = format(classified / grid.population, ".6g")
            lines.append(
                _csv_row(
                    (
                        rec.phase_no,
                        ", ".join(rec.red),
                        ", ".join(rec.orange),
                        ", ".join(rec.green),
                        ratio,
                    )
                )
            )
        else:
            lines.append(_csv_row((rec.phase_no, "", "", "", "")))
    return "\r\n".join(lines) + "\r\n"


# --------------------------------------------------------------------------
# plain-data views (CLI JSON output)

def record_to_dict(rec: PhaseRecord) -> dict:
    out: dict = {
        "phase": rec.phase_no,
        "containers": list(rec.containers),
        "alfa": list(rec.alfa),
        "beta": list(rec.beta),
        "gamma": list(rec.gamma),
        "complete": rec.complete,
    }
    if rec.complete:
        out["red"] = list(rec.red)
        out["orange"] = list(rec.orange)
        out["green"] = list(rec.green)
        out["total_sorting_time"] = rec.total_sorting_time
        out["total_detection_time"] = rec.total_detection_time
    return out


def document_to_dict(doc: DbDocument) -> dict:
    return {
        "terminated": doc.terminated,
        "records": [record_to_dict(r) for r in doc.records],
    }
