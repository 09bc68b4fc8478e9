import math

import numpy as np
import pytest

from roadmap_engine.data import Dataset
from roadmap_engine.errors import SensitivityError
from roadmap_engine.estimand import StatisticalEstimand
from roadmap_engine.estimation import EstimateResult
from roadmap_engine.learners import LearnerSpec, SuperLearnerSpec
from roadmap_engine.sensitivity import (GapBounds, e_value, e_value_rr, negative_control_check,
                                        sensitivity_report, shifted_interval)


def result(ci, point=None, arm=(0.3, 0.2)):
    point = sum(ci) / 2 if point is None else point
    return EstimateResult("tmle", "risk_difference", point, 0.02, tuple(ci), arm, {}, None)


@pytest.mark.parametrize("ci, gap, expected", [
    ((0.02, 0.10), (0.0, 0.0), (0.02, 0.10)),
    ((0.02, 0.10), (-0.01, 0.03), (-0.01, 0.11)),
    ((0.02, 0.10), (0.04, 0.04), (-0.02, 0.06)),
])
def test_shifted_interval(ci, gap, expected):
    got = shifted_interval(result(ci), GapBounds(*gap, "expert judgement"))
    assert got == pytest.approx(expected, abs=1e-15)


def test_gap_needs_provenance_and_order():
    with pytest.raises(SensitivityError):
        GapBounds(0.0, 0.1, "  ")
    with pytest.raises(SensitivityError):
        GapBounds(0.1, 0.0, "x")


def test_e_value_closed_form():
    assert e_value_rr(2.0) == pytest.approx(2 + math.sqrt(2), abs=1e-12)
    assert e_value_rr(0.5) == pytest.approx(e_value_rr(2.0), abs=1e-12)
    assert e_value_rr(1.0) == 1.0
    with pytest.raises(SensitivityError):
        e_value_rr(0.0)


def test_e_value_from_result_crossing_null():
    er = EstimateResult("tmle", "risk_ratio", 1.1, 0.2, (0.8, 1.5), (0.22, 0.2), {}, None)
    point, limit = e_value(er)
    assert point == pytest.approx(e_value_rr(1.1))
    assert limit == 1.0


def test_report_verdicts():
    rep = sensitivity_report(result((0.02, 0.10)), GapBounds(-0.01, 0.03, "registry audit"))
    assert "includes 0" in rep.verdict
    rep = sensitivity_report(result((0.05, 0.10)), GapBounds(-0.01, 0.01, "registry audit"))
    assert "excludes 0" in rep.verdict
    assert rep.to_dict()["shifted_ci95"] == pytest.approx([0.04, 0.11])


def _rct(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(0, 2, n)
    W = rng.integers(0, 2, n)
    Y = (rng.random(n) < 0.3 + 0.2 * A).astype(float)
    return {"W": W, "A": A, "Y": Y, "NC": rng.integers(0, 2, n)}


SE = StatisticalEstimand(("W",), "A", "Y", "risk_difference")
FAST = SuperLearnerSpec((LearnerSpec("mean_only"), LearnerSpec("logistic_main_terms")), seed=0)


def test_negative_control_equal_to_treatment_detected():
    cols = _rct(400, 1)
    cols["NC"] = cols["A"].astype(float)
    d = Dataset(cols, "A", "Y", covariates=("W", "NC"))
    (res,) = negative_control_check(d, SE, ["NC"], "unadjusted", FAST)
    assert res["null_excluded"]


def test_negative_control_empty_list():
    d = Dataset(_rct(100, 2), "A", "Y", covariates=("W",))
    assert negative_control_check(d, SE, []) == []


def test_negative_control_in_adjustment_set_rejected():
    d = Dataset(_rct(100, 3), "A", "Y", covariates=("W",))
    with pytest.raises(SensitivityError):
        negative_control_check(d, SE, ["W"])


def test_negative_control_null_tmle():
    d = Dataset(_rct(1000, 4), "A", "Y", covariates=("W", "NC"))
    (res,) = negative_control_check(d, SE, ["NC"], "tmle", FAST)
    assert res["estimate"].diagnostics["score_equation_solved"]
    assert abs(res["estimate"].point) < 4 * res["estimate"].se
