"""Shared fixtures: the wire-format sample, the scripted 48-yard run."""

from pathlib import Path

import pytest

from cddsat.session import InspectionSession, SessionConfig, parse_verdict_script

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"

WIRE56 = FIXTURES / "fig7.db"
SCRIPT48 = FIXTURES / "table45.script"


@pytest.fixture(scope="session")
def wire56_text() -> str:
    return WIRE56.read_text()


@pytest.fixture(scope="session")
def script48_text() -> str:
    return SCRIPT48.read_text()


@pytest.fixture(scope="session")
def script48(script48_text):
    return parse_verdict_script(script48_text)


@pytest.fixture
def run48(tmp_path, script48):
    """A completed scripted run on the 4x12 yard, DB file included."""

    def make(db_name="run.db", **overrides) -> InspectionSession:
        defaults = dict(population=48, cols=4, schedule="paper48")
        defaults.update(overrides)
        cfg = SessionConfig(**defaults)
        db_path = tmp_path / db_name if db_name else None
        session = InspectionSession(cfg, db_path=db_path)
        for phase in sorted(script48):
            session.submit_scripted(phase, script48[phase])
        return session

    return make
