"""The ten acceptance criteria, each at its stated tolerance.

A pass/fail line per criterion is printed in the terminal summary (and to
stdout when run with ``-s``).
"""

import contextlib
import itertools
import json
import math
import time

import numpy as np
import pytest

from roadmap_engine.data import Dataset
from roadmap_engine.estimand import StatisticalEstimand
from roadmap_engine.estimation import estimate
from roadmap_engine.graph import d_separated
from roadmap_engine.learners import LearnerSpec, SuperLearnerSpec
from roadmap_engine.sensitivity import e_value_rr, negative_control_check
from roadmap_engine.simulation import DesignSpec, evaluate, parse_dgp, simulate_dataset, true_estimand

import conftest
from oracles import (WORKED_A, WORKED_C, WORKED_W, WORKED_Y, d_separated_bruteforce, expit,
                     stratified_risk_difference)
from pipeline import run_all, study_copy
from test_graph import all_queries, random_dag

ALT = "W ~ Bernoulli(0.5); A ~ Bernoulli(expit(-0.4 + 0.8*W)); Y ~ Bernoulli(expit(-1 + 1.0*A + 1.0*W))"
NULL = ALT.replace("1.0*A", "0*A")
TRUTH_ALT = 0.5 * (expit(0) - expit(-1)) + 0.5 * (expit(1) - expit(0))   # enumeration oracle
M = 1000
MASTER_SEED = 20240601

# Hybrid worst-case type I at delta = 1.0 (n_rct = n_external = 250, M = 1000,
# master seed above, default library).  Measured on the first verified run
# and frozen; the simulation is bit-reproducible, so the value must recur.
HYBRID_WORST_TYPE1 = 0.864


@contextlib.contextmanager
def criterion(n, text):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        conftest.CRITERIA[n] = (False, f"{text} [{type(exc).__name__}: {str(exc).splitlines()[0][:120]}]")
        print(f"criterion {n}: FAIL  {text}")
        raise
    conftest.CRITERIA[n] = (True, f"{text} ({time.perf_counter() - t0:.1f} s)")
    print(f"criterion {n}: PASS  {text}")


# -- 1 ----------------------------------------------------------------------------

def test_c1_saturated_equivalence():
    with criterion(1, "saturated gcomp/ipw/tmle equal stratified-means oracle 0.50 within 1e-10, < 1 s"):
        t0 = time.perf_counter()
        oracle = stratified_risk_difference(WORKED_W, WORKED_A, WORKED_Y, WORKED_C)
        d = Dataset({"W": WORKED_W, "A": WORKED_A, "C": WORKED_C, "Y": WORKED_Y}, "A", "Y", "C", ("W",))
        se = StatisticalEstimand(("W",), "A", "Y", "risk_difference", "C")
        sl = SuperLearnerSpec((LearnerSpec("stratified_histogram"),), folds=2)
        values = {m: estimate(d, se, m, sl, outcome_bounds=(0.0, 1.0)).point for m in ("gcomp", "ipw", "tmle")}
        elapsed = time.perf_counter() - t0
        assert abs(oracle - 0.5) <= 1e-10
        for m, v in values.items():
            assert abs(v - 0.5) <= 1e-10, (m, v)
        assert elapsed < 1.0


# -- 2 ----------------------------------------------------------------------------

def test_c2_dseparation_oracle():
    with criterion(2, "200 random DAGs (<= 6 nodes): every query matches brute-force path enumeration, < 30 s"):
        t0 = time.perf_counter()
        rng = np.random.default_rng(12345)
        queries = 0
        for _ in range(200):
            g = random_dag(rng, max_nodes=6)
            edges = list(g.edges)
            for x, y, z in all_queries(g):
                assert d_separated(g, x, y, z).separated == d_separated_bruteforce(edges, x, y, z)
                queries += 1
        assert queries > 1000
        assert time.perf_counter() - t0 < 30.0


# -- 3 ----------------------------------------------------------------------------

def test_c3_tmle_score_equation():
    # Every TMLE run in the suite is checked by the wrapper in conftest; this
    # test adds a battery across contrasts, censoring and learner libraries.
    with criterion(3, "|mean IC| <= 1e-8 sd(IC) + 1e-12 on every TMLE run"):
        dgp = parse_dgp(ALT + "; C ~ Bernoulli(expit(-2 + 0.5*A + 0.5*W))")
        libs = [SuperLearnerSpec(), SuperLearnerSpec((LearnerSpec("mean_only"),)),
                SuperLearnerSpec((LearnerSpec("stratified_histogram"),))]
        for r, (contrast, sl) in enumerate(itertools.product(("risk_difference", "risk_ratio"), libs)):
            d = simulate_dataset(dgp, DesignSpec("o", "observational", n=800), r, 77)
            se = StatisticalEstimand(("W",), "A", "Y", contrast, "C")
            diag = estimate(d, se, "tmle", sl.with_seed(r)).diagnostics
            assert abs(diag["ic_mean"]) <= 1e-8 * diag["ic_sd"] + 1e-12
        assert conftest.TMLE_RUNS["checked"] >= 6
        assert not conftest.TMLE_RUNS["violations"]


# -- 4..7: one shared Monte Carlo evaluation ----------------------------------------

@pytest.fixture(scope="module")
def operating_characteristics():
    designs = [
        DesignSpec("rct", "rct", n=1000, estimators=("tmle",)),
        DesignSpec("obs", "observational", n=1000, estimators=("unadjusted", "tmle")),
        DesignSpec("hybrid", "hybrid", n_rct=250, n_external=250, deltas=(0.0, 0.25, 0.5, 1.0),
                   estimators=("tmle",)),
    ]
    t0 = time.perf_counter()
    rep = evaluate(parse_dgp(NULL), parse_dgp(ALT), designs, M=M, master_seed=MASTER_SEED)
    print(f"\nshared evaluation: {time.perf_counter() - t0:.0f} s")
    print(rep.to_markdown())
    return rep


def test_c4_coverage(operating_characteristics):
    rep = operating_characteristics
    cell = rep.cell("rct", "tmle")
    cov = cell["alt"]["coverage"]
    with criterion(4, f"tmle RCT n=1000 M=1000 coverage of psi*=0.23106: {cov:.3f} in [0.92, 0.97]"):
        assert rep.truths["risk_difference"]["alt"] == pytest.approx(TRUTH_ALT, abs=1e-12)
        assert round(TRUTH_ALT, 5) == 0.23106
        assert cell["valid"]
        assert 0.92 <= cov <= 0.97


def test_c5_type1(operating_characteristics):
    t1 = operating_characteristics.cell("rct", "tmle")["type1"]
    with criterion(5, f"tmle RCT null n=1000 M=1000 type I: {t1:.3f} in [0.035, 0.065]"):
        assert 0.035 <= t1 <= 0.065


def test_c6_confounding_detected(operating_characteristics):
    rep = operating_characteristics
    un, tm = rep.cell("obs", "unadjusted")["alt"], rep.cell("obs", "tmle")["alt"]
    text = (f"observational: unadjusted |bias| {abs(un['bias']):.4f} vs 3 MCSE {3 * un['bias_mcse']:.4f}; "
            f"tmle |bias| {abs(tm['bias']):.4f} vs 3 MCSE {3 * tm['bias_mcse']:.4f}")
    with criterion(6, text):
        assert abs(un["bias"]) > 3 * un["bias_mcse"]
        assert abs(tm["bias"]) <= 3 * tm["bias_mcse"]


def test_c7_hybrid_worst_case(operating_characteristics):
    rep = operating_characteristics
    cells = sorted((c for c in rep.cells if c["design"] == "hybrid"), key=lambda c: c["delta"])
    t1 = [c["type1"] for c in cells]
    at1 = cells[-1]
    text = (f"hybrid type I over delta {[c['delta'] for c in cells]}: {[round(v, 3) for v in t1]}; "
            f"at delta=1: {at1['type1']:.3f} > 0.05 + 3 MCSE = {0.05 + 3 * at1['type1_mcse']:.3f}")
    with criterion(7, text):
        assert [c["delta"] for c in cells] == [0.0, 0.25, 0.5, 1.0]
        assert all(b >= a for a, b in zip(t1, t1[1:]))
        assert at1["type1"] > 0.05 + 3 * at1["type1_mcse"]
        assert at1["type1"] > 0.10
        summary = [s for s in rep.summaries if s["design"] == "hybrid"][0]
        assert summary["worst_case_delta"] == 1.0 and summary["type1_nondecreasing"]
        if HYBRID_WORST_TYPE1 is not None:
            assert at1["type1"] == pytest.approx(HYBRID_WORST_TYPE1, abs=1e-12)


# -- 8 ----------------------------------------------------------------------------

def test_c8_e_value():
    with criterion(8, "E-value: RR=2 -> 2+sqrt(2) within 1e-12; RR=0.5 symmetric; RR=1 -> 1"):
        assert abs(e_value_rr(2.0) - (2 + math.sqrt(2))) <= 1e-12
        assert abs(e_value_rr(0.5) - e_value_rr(2.0)) <= 1e-12
        assert e_value_rr(1.0) == 1.0


# -- 9 ----------------------------------------------------------------------------

NC_DGP = parse_dgp("W ~ Bernoulli(0.5); NC ~ Bernoulli(0.3); A ~ Bernoulli(0.5); "
                   "Y ~ Bernoulli(expit(-1 + 1.0*A + 1.0*W))")


def test_c9_negative_control_false_positive_rate():
    reps = 200
    design = DesignSpec("rct", "rct", n=2000, adjust=("W",))
    se = StatisticalEstimand(("W",), "A", "Y", "risk_difference")
    hits = 0
    for r in range(reps):
        d = simulate_dataset(NC_DGP, design, r, 9090)
        (res,) = negative_control_check(d, se, ["NC"], "tmle", SuperLearnerSpec(seed=r))
        hits += res["null_excluded"]
    rate = hits / reps
    with criterion(9, f"by-construction-null control, 200 reps n=2000: null-excluded rate {rate:.3f} in [0.01, 0.10]"):
        assert 0.01 <= rate <= 0.10


# -- 10 ---------------------------------------------------------------------------

def test_c10_report_determinism(tmp_path):
    with criterion(10, "two full 'report' runs: byte-identical JSON outside the metadata block"):
        study = study_copy(tmp_path / "study")
        texts = []
        for k in (1, 2):
            out = tmp_path / f"out{k}"
            assert run_all(study, out) == [0] * 7
            doc = json.loads((out / "report.json").read_text())
            doc.pop("metadata")
            texts.append(json.dumps(doc, indent=2).encode())
        assert texts[0] == texts[1]
