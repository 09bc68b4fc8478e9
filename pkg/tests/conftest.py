"""Shared fixtures.

Every TMLE run anywhere in the suite is checked against the efficient
influence-curve score equation:  |mean IC| <= 1e-8 * sd(IC) + 1e-12.
"""

from pathlib import Path

import numpy as np
import pytest

from roadmap_engine import estimation
from roadmap_engine.data import Dataset
from roadmap_engine.estimand import StatisticalEstimand

from oracles import WORKED_A, WORKED_C, WORKED_W, WORKED_Y

DEMO = Path(__file__).resolve().parent.parent / "demos" / "study"

TMLE_RUNS = {"checked": 0, "violations": []}
_original_tmle = estimation._tmle


def _checked_tmle(p, se, sl, gb, ob, bootstrap, diag):
    out = _original_tmle(p, se, sl, gb, ob, bootstrap, diag)
    TMLE_RUNS["checked"] += 1
    if not abs(diag["ic_mean"]) <= 1e-8 * diag["ic_sd"] + 1e-12:
        TMLE_RUNS["violations"].append((diag["ic_mean"], diag["ic_sd"]))
        raise AssertionError(f"TMLE score equation not solved: mean IC {diag['ic_mean']:.3e}, "
                             f"sd {diag['ic_sd']:.3e}")
    return out


estimation._tmle = _checked_tmle


@pytest.fixture
def worked():
    cols = {"W": np.array(WORKED_W), "A": np.array(WORKED_A), "C": np.array(WORKED_C),
            "Y": np.array(WORKED_Y, dtype=float)}
    return Dataset(cols, "A", "Y", "C", ("W",))


@pytest.fixture
def se_w():
    return StatisticalEstimand(("W",), "A", "Y", "risk_difference", "C")


@pytest.fixture
def demo_dir():
    return DEMO


# -- acceptance summary ------------------------------------------------------------

CRITERIA = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, text = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {text}")
