"""Shared fixtures and the acceptance scoreboard.

Acceptance tests append one line per criterion through the
``acceptance_report`` fixture; the lines are replayed in a dedicated
terminal section after the run so the verdicts stay visible even when
pytest captures stdout.
"""

import numpy as np
import pytest

from specsurv import SurvivalDataset

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_report():
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_ds(time, event, X=None):
    """Dataset from plain lists; features default to a zero column."""
    time = np.asarray(time, dtype=np.float64)
    if X is None:
        X = np.zeros((time.shape[0], 1))
    return SurvivalDataset(np.asarray(X, dtype=np.float64), time, event)


@pytest.fixture
def ds_three():
    """Times 1 < 2 < 3, middle observation censored."""
    return make_ds([1.0, 2.0, 3.0], [1, 0, 1])
