import os
import random

import pytest
from hypothesis import settings

from trajmine.model import EventAlphabet, Sequence

settings.register_profile("default", deadline=None, max_examples=100)
settings.register_profile("ci", deadline=None, max_examples=300)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def alphabet():
    return EventAlphabet.default()


@pytest.fixture
def worked_pair():
    """Bleeding-Infection-Respiratory failure-Death vs Bleeding-Bleeding-Infection."""
    p1 = Sequence("P1", ("BLD", "INF", "RSP", "DTH"))
    p2 = Sequence("P2", ("BLD", "BLD", "INF"))
    return p1, p2


def random_codes(rng: random.Random, alphabet_size: int, max_len: int, min_len: int = 1):
    letters = "ABCDEFGHIJKLMNOP"[:alphabet_size]
    return tuple(rng.choice(letters) for _ in range(rng.randint(min_len, max_len)))


@pytest.fixture
def acceptance():
    """Record a named criterion's outcome for the end-of-run summary."""

    class Recorder:
        def check(self, number, title, ok, detail=""):
            _ACCEPTANCE.append((number, title, bool(ok), detail))
            assert ok, f"criterion {number} ({title}) failed: {detail}"

    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        mark = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{mark} [{number:2d}] {title}" + (f" -- {detail}" if detail else ""))
