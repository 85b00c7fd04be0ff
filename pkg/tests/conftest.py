from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from rowg.syntax import parse_program

settings.register_profile("rowg", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("rowg")

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"


@pytest.fixture
def program():
    """Load a corpus program by file name."""

    def load(name: str):
        return parse_program((PROGRAMS / name).read_text(encoding="utf-8"))

    return load
