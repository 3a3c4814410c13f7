import numpy as np
import pytest

from mckean_ipm.measures import EmpiricalSegmentMeasure
from mckean_ipm.segments import TimeGrid


def constant_measure(values, grid=None, weights=None):
    """Measure whose atoms are constant 1-d segments at ``values``."""
    grid = grid or TimeGrid(0.0, 1.0)
    arr = np.asarray(values, dtype=float)
    segs = np.broadcast_to(arr[:, None, None], (len(arr), grid.length, 1)).copy()
    return EmpiricalSegmentMeasure(grid, segs, weights)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


# One (number, title, passed, detail) entry per acceptance criterion, filled by
# test_acceptance.py and echoed at the end of the run.
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {num:>2}: {title} | {detail}")
