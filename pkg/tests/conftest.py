import os

import numpy as np
import pytest

from relabc import GammaParams, NormalGammaParams, ObservedStat, update

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}

LONG = os.environ.get("RELABC_LONG") == "1"


def record(criterion, passed, detail=""):
    prev = ACCEPTANCE.get(criterion)
    if prev is not None:
        passed = passed and prev[0]
        detail = f"{prev[1]}; {detail}" if prev[1] else detail
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def prior():
    return NormalGammaParams(0.0, 1.0, 1.0, 1.0)


@pytest.fixture
def gamma_prior():
    return GammaParams(1.0, 1.0)


@pytest.fixture
def stat20():
    return ObservedStat.normal(0.5, 1.2, 20)


@pytest.fixture
def post20(prior, stat20):
    return update(prior, stat20)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
