import numpy as np
import pytest

from roadmap_engine.learners import (LearnerSpec, SuperLearnerSpec, cv_select, fit_learner,
                                     fold_assignment)
from roadmap_engine.simulation import parse_dgp, _draw


def test_mean_only():
    f = fit_learner(LearnerSpec("mean_only"), np.zeros((4, 1)), np.array([1, 1, 0, 0.0]))
    assert np.allclose(f.predict(np.zeros((3, 1))), 0.5)


def test_saturated_logistic_matches_cell_means():
    x = np.repeat([0.0, 1.0], 8)[:, None]
    y = np.array([1, 0, 0, 0] * 2 + [1, 1, 1, 0] * 2, dtype=float)
    f = fit_learner(LearnerSpec("logistic_main_terms"), x, y)
    assert f.converged and not f.fallback
    assert np.allclose(f.predict(np.array([[0.0], [1.0]])), [0.25, 0.75], atol=1e-6)


def test_saturated_logistic_two_binary_with_interaction():
    # cell means oracle on a 2x2 design with interaction
    rng = np.random.default_rng(0)
    X = rng.integers(0, 2, (400, 2)).astype(float)
    y = rng.integers(0, 2, 400).astype(float)
    f = fit_learner(LearnerSpec("logistic_with_pairwise_interactions"), X, y, bounds=(0, 1))
    for cell in ((0, 0), (0, 1), (1, 0), (1, 1)):
        rows = (X == cell).all(axis=1)
        assert f.predict(np.array([cell], float))[0] == pytest.approx(y[rows].mean(), abs=1e-6)


def test_all_ones_truncated():
    X = np.arange(10.0)[:, None]
    for kind in ("mean_only", "logistic_main_terms", "stratified_histogram"):
        f = fit_learner(LearnerSpec(kind), X, np.ones(10))
        assert np.allclose(f.predict(X), 0.995)


def test_separation_falls_back_or_bounds():
    X = np.arange(10.0)[:, None]
    y = (X[:, 0] > 4).astype(float)
    f = fit_learner(LearnerSpec("logistic_main_terms"), X, y)
    p = f.predict(X)
    assert np.all((p >= 0.005) & (p <= 0.995))


def test_weights_respected():
    X = np.zeros((4, 1))
    f = fit_learner(LearnerSpec("mean_only"), X, np.array([1, 0, 0, 0.0]), weights=np.array([3, 1, 1, 1.0]))
    assert f.predict(X)[0] == pytest.approx(0.5)


def test_histogram_unseen_cell_gets_overall_mean():
    X = np.array([[0.0], [0.0], [1.0], [1.0]])
    y = np.array([0, 0, 1, 1.0])
    f = fit_learner(LearnerSpec("stratified_histogram"), X, y, bounds=(0, 1))
    assert f.predict(np.array([[0.0], [1.0]])).tolist() == [0.0, 1.0]
    assert f.predict(np.array([[7.0]]))[0] == pytest.approx(0.5)


def test_folds_balanced_and_seeded():
    f = fold_assignment(103, 10, 5)
    assert np.array_equal(f, fold_assignment(103, 10, 5))
    counts = np.bincount(f)
    assert counts.max() - counts.min() <= 1
    assert not np.array_equal(f, fold_assignment(103, 10, 6))


def test_singleton_library_selected():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 2))
    y = rng.integers(0, 2, 60).astype(float)
    sel = cv_select(SuperLearnerSpec((LearnerSpec("mean_only"),)), X, y)
    assert sel.index == 0 and sel.labels == ("mean_only",)


def test_duplicate_learner_does_not_change_selection():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(300, 2))
    y = (rng.random(300) < 1 / (1 + np.exp(-X[:, 0]))).astype(float)
    lib = (LearnerSpec("mean_only"), LearnerSpec("logistic_main_terms"))
    a = cv_select(SuperLearnerSpec(lib, seed=4), X, y)
    b = cv_select(SuperLearnerSpec(lib + (LearnerSpec("logistic_main_terms"),), seed=4), X, y)
    assert a.index == b.index == 1
    assert b.risks[1] == b.risks[2]


def test_cv_risk_is_minimal():
    rng = np.random.default_rng(3)
    X = rng.integers(0, 3, (200, 2)).astype(float)
    y = rng.integers(0, 2, 200).astype(float)
    sel = cv_select(SuperLearnerSpec(seed=1), X, y)
    assert sel.risks[sel.index] == min(sel.risks)
    assert list(sel.to_dict()) and len(sel.risks) == 4


def test_too_many_folds():
    from roadmap_engine.errors import EstimationError
    with pytest.raises(EstimationError):
        cv_select(SuperLearnerSpec(folds=10), np.zeros((5, 1)), np.array([0, 1, 0, 1, 0.0]))


INTERACTION_DGP = parse_dgp("X1 ~ Bernoulli(0.5); X2 ~ Bernoulli(0.5); "
                            "A ~ Bernoulli(0.5); Y ~ Bernoulli(expit(-1 + 0.2*X1 + 0.2*X2 + 2.5*X1*X2))")


def test_interaction_learner_selected():
    lib = (LearnerSpec("logistic_main_terms"), LearnerSpec("logistic_with_pairwise_interactions"))
    wins = 0
    for r in range(100):
        rng = np.random.default_rng([2024, r])
        v = _draw(INTERACTION_DGP, 2000, rng)
        X = np.column_stack([v["X1"], v["X2"]])
        sel = cv_select(SuperLearnerSpec(lib, seed=r), X, v["Y"])
        wins += sel.index == 1
    assert wins >= 95
