import re

import numpy as np
import pytest

from pitrecal.archive import PitSeries
from pitrecal.synth.gaussian_pair import GaussianPairScenario

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Record one acceptance line: (criterion id, passed, detail)."""

    def _record(cid, passed, detail):
        ACCEPTANCE_LINES.append((cid, bool(passed), detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    def natural(row):
        num, rest = re.match(r"(\d+)(.*)", row[0]).groups()
        return int(num), rest

    for cid, ok, detail in sorted(ACCEPTANCE_LINES, key=natural):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {cid}: {detail}")


@pytest.fixture(scope="session")
def pair():
    return GaussianPairScenario(0.0, 1.0, 0.3, 1.3)


def uniform_series(n, seed):
    return PitSeries.from_values(np.random.default_rng(seed).random(n))
