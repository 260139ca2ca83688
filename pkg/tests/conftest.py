import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from idp.model import CovariatePath, ObservedSeries, day_grid  # noqa: E402


def make_data(counts, h, p=None, start="2020-03-29"):
    counts = np.asarray(counts)
    dates = day_grid(start, len(counts))
    p = np.zeros(len(counts)) if p is None else np.asarray(p)
    return ObservedSeries(dates, counts), CovariatePath(dates, np.asarray(h), p)


@pytest.fixture
def rng():
    return np.random.default_rng(20201115)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(RESULTS):
        verdict = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
        terminalreporter.write_line(f"{criterion}: {verdict}  {detail}")
