import os

import numpy as np
import pytest

from ridgelab.harness.estimators import binomial_ci

# full-size Monte Carlo versions of the slower module examples
SLOW = os.environ.get("RIDGELAB_SLOW", "0") not in ("0", "", "false", "no")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale Monte Carlo example (set RIDGELAB_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    if SLOW:
        return
    skip = pytest.mark.skip(reason="full-scale run; set RIDGELAB_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def freq_at_least(k: int, n: int, p: float, level: float = 0.99) -> bool:
    """Binomial check: the upper end of the CI for k/n reaches p."""
    return binomial_ci(k, n, level)[1] >= p


def freq_at_most(k: int, n: int, p: float, level: float = 0.99) -> bool:
    return binomial_ci(k, n, level)[0] <= p


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def unit(d, i=0):
    e = np.zeros(d)
    e[i] = 1.0
    return e


# acceptance verdicts, echoed in the terminal summary so they survive output capture
CRITERIA = []


def report_criterion(name: str, ok: bool, detail: str) -> bool:
    line = f"{name}: {'PASS' if ok else 'FAIL'} | {detail}"
    CRITERIA.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
