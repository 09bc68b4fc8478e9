import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roadmap_engine.data import (Dataset, Schema, load_dataset, missingness_summary,
                                 positivity_diagnostics, write_dataset)
from roadmap_engine.errors import DataError

from oracles import WORKED_A, WORKED_W, WORKED_Y

SCHEMA = Schema("A", "Y", "C")


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def worked_csv():
    rows = ["W,A,C,Y"] + [f"{w},{a},0,{y}" for w, a, y in zip(WORKED_W, WORKED_A, WORKED_Y)]
    return "\n".join(rows) + "\n"


def test_load_worked(tmp_path):
    d = load_dataset(write(tmp_path, worked_csv()), SCHEMA)
    assert d.n == 8 and d.covariates == ("W",)
    assert d.observed().all()


def test_bad_treatment_value_names_row_and_column(tmp_path):
    text = worked_csv().replace("\n1,1,0,1\n", "\n1,2,0,1\n", 1)
    with pytest.raises(DataError) as err:
        load_dataset(write(tmp_path, text), SCHEMA)
    msg = str(err.value)
    assert "'A'" in msg and "row 7" in msg and msg.startswith("[Step 2]")


@pytest.mark.parametrize("text, fragment", [
    ("W,A,Y\n0,1,1\n", "'C'"),
    ("W,A,C,Y\n", "no data rows"),
    ("W,A,C,Y\n0,1,0\n", "fields"),
    ("W,A,C,Y\n,1,0,1\n", "missing value"),
    ("W,A,C,Y\nx,1,0,1\n", "non-numeric"),
    ("W,A,C,Y\n0,1,0,3\n", "0/1"),
])
def test_load_errors(tmp_path, text, fragment):
    with pytest.raises(DataError, match=fragment):
        load_dataset(write(tmp_path, text), SCHEMA)


def test_censored_missing_outcomes_load(tmp_path):
    text = "W,A,C,Y\n" + "0,1,0,1\n" * 8 + "0,1,1,\n1,0,1,NA\n"
    d = load_dataset(write(tmp_path, text), SCHEMA)
    m = missingness_summary(d)
    assert m["missing_fraction"]["Y"] == pytest.approx(0.2)
    assert m["censoring_vs_outcome_missing"]["C=1"]["outcome_missing"] == 2
    assert m["uncensored_missing_outcome"]["count"] == 0


def test_missingness_fully_observed(worked):
    m = missingness_summary(worked)
    assert all(v == 0 for v in m["missing_fraction"].values())
    assert m["uncensored_missing_outcome"]["count"] == 0


def test_uncensored_missing_outcome_flagged(tmp_path):
    d = load_dataset(write(tmp_path, "W,A,C,Y\n0,1,0,1\n0,0,0,NA\n1,1,1,NA\n"), SCHEMA)
    m = missingness_summary(d)
    assert m["uncensored_missing_outcome"] == {"count": 1, "rows": [2]}
    assert d.observed().tolist() == [True, False, False]


def test_round_trip_idempotent(tmp_path, demo_dir):
    d = load_dataset(demo_dir / "data.csv", SCHEMA)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_dataset(d, p1)
    d1 = load_dataset(p1, SCHEMA)
    write_dataset(d1, p2)
    assert d1 == d and p1.read_bytes() == p2.read_bytes()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 1), st.integers(0, 1),
                          st.sampled_from([0.0, 1.0, None])), min_size=1, max_size=30))
def test_round_trip_property(tmp_path_factory, rows):
    cols = {"W": [r[0] for r in rows], "A": [r[1] for r in rows], "C": [r[2] for r in rows],
            "Y": [np.nan if r[3] is None else r[3] for r in rows]}
    d = Dataset(cols, "A", "Y", "C", ("W",))
    p = tmp_path_factory.mktemp("rt") / "d.csv"
    write_dataset(d, p)
    text = p.read_text()
    d2 = load_dataset(p, SCHEMA)
    assert d2 == d
    write_dataset(d2, p)
    assert p.read_text() == text


def test_dataset_does_not_freeze_caller_arrays():
    a = np.array([0.0, 1.0])
    Dataset({"A": a, "Y": np.array([0.0, 1.0])}, "A", "Y")
    a[0] = 1.0


def test_positivity_worked_strata(worked):
    rep = positivity_diagnostics(worked, ["W"])
    assert [s["treated_proportion"] for s in rep.strata] == [0.5, 0.5]
    assert not rep.flagged_strata
    assert rep.propensity_min == pytest.approx(0.5, abs=1e-6)


def test_positivity_structural_violation():
    W = np.array([0] * 10 + [1] * 10)
    A = np.array([0, 1] * 5 + [1] * 10)
    d = Dataset({"W": W, "A": A, "Y": np.zeros(20)}, "A", "Y", covariates=("W",))
    rep = positivity_diagnostics(d, ["W"])
    flagged = rep.flagged_strata
    assert len(flagged) == 1 and flagged[0]["stratum"] == {"W": 1}
    assert flagged[0]["treated_proportion"] == 1.0
    assert rep.fraction_above > 0


def test_positivity_randomized_balanced():
    rng = np.random.default_rng(3)
    n = 20000
    W = rng.normal(size=n)
    A = rng.integers(0, 2, n)
    d = Dataset({"W": W, "A": A, "Y": np.zeros(n)}, "A", "Y", covariates=("W",))
    rep = positivity_diagnostics(d, ["W"])
    assert 0.45 < rep.propensity_min <= rep.propensity_max < 0.55
    assert rep.fraction_below == rep.fraction_above == 0.0
    assert rep.strata == ()


def test_positivity_threshold_validated(worked):
    with pytest.raises(DataError):
        positivity_diagnostics(worked, ["W"], tau=0.7)
