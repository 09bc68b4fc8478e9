"""Nuisance learners for binary targets and a discrete (winner-take-all)
cross-validated super learner."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import expit

from .errors import EstimationError

log = logging.getLogger(__name__)

KINDS = (
    "mean_only",
    "logistic_main_terms",
    "logistic_with_pairwise_interactions",
    "stratified_histogram",
)
OUTCOME_BOUNDS = (0.005, 0.995)
IRLS_TOL = 1e-8
IRLS_MAX_ITER = 100


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    bins: int = 4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise EstimationError(f"unknown learner kind {self.kind!r}")
        if self.bins < 1:
            raise EstimationError("stratified_histogram needs bins >= 1")

    @property
    def label(self):
        if self.kind == "stratified_histogram":
            return f"{self.kind}(bins={self.bins})"
        return self.kind


DEFAULT_LIBRARY = tuple(LearnerSpec(k) for k in KINDS)


@dataclass(frozen=True)
class SuperLearnerSpec:
    library: tuple = DEFAULT_LIBRARY
    folds: int | None = None
    seed: int = 0
    loss: str = "negative_log_likelihood"

    def __post_init__(self):
        object.__setattr__(self, "library", tuple(self.library))
        if not self.library:
            raise EstimationError("super learner library must not be empty")
        if self.folds is not None and self.folds < 2:
            raise EstimationError("super learner needs at least 2 folds")
        if self.loss != "negative_log_likelihood":
            raise EstimationError(f"unsupported loss {self.loss!r}")

    def folds_for(self, n):
        v = self.folds if self.folds is not None else (10 if n >= 100 else 5)
        if v > n:
            raise EstimationError(f"{v} folds requested for only {n} rows")
        return v

    def with_seed(self, seed):
        return SuperLearnerSpec(self.library, self.folds, seed, self.loss)

    def to_dict(self):
        return {
            "library": [s.label for s in self.library],
            "folds": self.folds,
            "seed": self.seed,
            "loss": self.loss,
        }


@dataclass
class FittedLearner:
    """A probability predictor; ``fallback`` is set when IRLS failed to converge
    and the constant mean was used instead."""

    spec: LearnerSpec
    bounds: tuple
    _predict: object = field(repr=False)
    converged: bool = True
    fallback: bool = False
    iterations: int = 0

    def predict(self, X):
        X = _as_matrix(X)
        p = self._predict(X)
        lo, hi = self.bounds
        return np.clip(p, lo, hi)


def _as_matrix(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _design(X, pairwise):
    cols = [np.ones(X.shape[0]), *X.T]
    if pairwise:
        cols.extend(X[:, i] * X[:, j] for i, j in combinations(range(X.shape[1]), 2))
    return np.column_stack(cols)


def _weighted_mean(y, w):
    total = w.sum()
    return float(np.dot(w, y) / total)


def _wls(D, z, w):
    """Weighted least squares; normal equations, or lstsq when they are singular."""
    Dw = D * w[:, None]
    try:
        beta = np.linalg.solve(D.T @ Dw, Dw.T @ z)
        if np.all(np.isfinite(beta)) and np.linalg.cond(D.T @ Dw) < 1e12:
            return beta
    except np.linalg.LinAlgError:
        pass
    sw = np.sqrt(w)
    return np.linalg.lstsq(D * sw[:, None], z * sw, rcond=None)[0]


def _irls(D, y, w):
    """Logistic regression by iteratively reweighted least squares.

    Returns (beta, converged, iterations).  Convergence is judged on the
    relative change in deviance, which also settles under complete separation
    (fitted probabilities pinned at 0/1 are handled by prediction bounds).
    """
    ybar = min(max(_weighted_mean(y, w), 1e-6), 1 - 1e-6)
    beta = np.zeros(D.shape[1])
    beta[0] = np.log(ybar / (1 - ybar))
    eta = D @ beta
    dev_old = np.inf
    for it in range(1, IRLS_MAX_ITER + 1):
        mu = expit(np.clip(eta, -35.0, 35.0))
        var = mu * (1.0 - mu)
        z = eta + (y - mu) / var
        beta_new = _wls(D, z, w * var)
        if not np.all(np.isfinite(beta_new)):
            return beta, False, it
        beta = beta_new
        eta = D @ beta
        mu = expit(np.clip(eta, -35.0, 35.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = np.where(y > 0, np.log(mu), 0.0) + np.where(y < 1, np.log1p(-mu), 0.0)
        dev = -2.0 * float(np.dot(w, ll))
        if abs(dev - dev_old) < IRLS_TOL * (abs(dev) + 0.1):
            return beta, True, it
        dev_old = dev
    return beta, False, IRLS_MAX_ITER


def _histogram_codes(X, bins):
    """Per-column discretisation: raw levels when there are at most ``bins`` of
    them, otherwise quantile bins."""
    encoders = []
    for col in X.T:
        levels = np.unique(col)
        if len(levels) <= bins:
            encoders.append(("levels", levels))
        else:
            edges = np.unique(np.quantile(col, np.linspace(0, 1, bins + 1)[1:-1]))
            encoders.append(("edges", edges))
    return encoders


def _encode(X, encoders):
    """Mixed-radix cell index per row; -1 for values never seen in training."""
    code = np.zeros(X.shape[0], dtype=np.int64)
    unseen = np.zeros(X.shape[0], dtype=bool)
    for j, (kind, ref) in enumerate(encoders):
        col = X[:, j]
        if kind == "levels":
            idx = np.searchsorted(ref, col)
            idx_c = np.minimum(idx, len(ref) - 1)
            unseen |= ref[idx_c] != col
            radix = len(ref)
            code = code * radix + idx_c
        else:
            code = code * (len(ref) + 1) + np.searchsorted(ref, col, side="right")
    code[unseen] = -1
    return code


def fit_learner(spec, X, y, weights=None, bounds=OUTCOME_BOUNDS):
    """Fit one learner to a binary target and return a :class:`FittedLearner`.

    Predictions are clipped to ``bounds``.  A logistic fit that does not
    converge within 100 IRLS iterations falls back to the weighted mean.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 1:
        raise EstimationError("cannot fit a learner on zero rows")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.any(w > 0):
        raise EstimationError("learner weights must be non-negative and not all zero")

    if spec.kind == "mean_only":
        m = _weighted_mean(y, w)
        return FittedLearner(spec, bounds, lambda Xn: np.full(Xn.shape[0], m))

    if spec.kind == "stratified_histogram":
        encoders = _histogram_codes(X, spec.bins)
        codes = _encode(X, encoders)
        keys, inv = np.unique(codes, return_inverse=True)
        wsum = np.bincount(inv, weights=w, minlength=len(keys))
        ysum = np.bincount(inv, weights=w * y, minlength=len(keys))
        overall = _weighted_mean(y, w)
        with np.errstate(invalid="ignore", divide="ignore"):
            means = np.where(wsum > 0, ysum / np.where(wsum > 0, wsum, 1.0), overall)

        def predict(Xn):
            c = _encode(Xn, encoders)
            pos = np.searchsorted(keys, c)
            pos_c = np.minimum(pos, len(keys) - 1)
            hit = (keys[pos_c] == c) & (c >= 0)
            return np.where(hit, means[pos_c], overall)

        return FittedLearner(spec, bounds, predict)

    pairwise = spec.kind == "logistic_with_pairwise_interactions"
    D = _design(X, pairwise)
    beta, converged, iters = _irls(D, y, w)
    if not converged:
        log.warning("%s did not converge after %d iterations; using mean_only", spec.label, iters)
        m = _weighted_mean(y, w)
        return FittedLearner(spec, bounds, lambda Xn: np.full(Xn.shape[0], m),
                             converged=False, fallback=True, iterations=iters)

    def predict(Xn):
        return expit(_design(Xn, pairwise) @ beta)

    return FittedLearner(spec, bounds, predict, iterations=iters)


def _nll(y, p, w):
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = np.where(y > 0, np.log(p), 0.0) + np.where(y < 1, np.log1p(-p), 0.0)
    return -float(np.dot(w, ll) / w.sum())


@dataclass
class Selection:
    """Outcome of :func:`cv_select`."""

    predictor: FittedLearner
    index: int
    risks: tuple
    labels: tuple

    @property
    def label(self):
        return self.labels[self.index]

    def predict(self, X):
        return self.predictor.predict(X)

    def to_dict(self):
        return {
            "selected": self.label,
            "cv_risk": {lab: (None if not np.isfinite(r) else r)
                        for lab, r in zip(self.labels, self.risks)},
            "fallback": self.predictor.fallback,
        }


def fold_assignment(n, v, seed):
    """Seeded V-fold labels: a random permutation dealt round-robin."""
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=np.int64)
    folds[perm] = np.arange(n) % v
    return folds


def cv_select(spec, X, y, weights=None, bounds=OUTCOME_BOUNDS):
    """V-fold cross-validated discrete super learner.

    Each library member is scored by held-out weighted negative
    log-likelihood; the minimum wins (ties go to the earliest member) and is
    refit on all rows.  A learner that raises gets infinite risk.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    n = len(y)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    v = spec.folds_for(n)
    folds = fold_assignment(n, v, spec.seed)
    labels = tuple(s.label for s in spec.library)
    risks = []
    cache = {}
    for learner in spec.library:
        if learner in cache:
            risks.append(cache[learner])
            continue
        loss = 0.0
        try:
            for k in range(v):
                test = folds == k
                train = ~test
                if not np.any(w[train] > 0):
                    raise EstimationError("empty training fold")
                fit = fit_learner(learner, X[train], y[train], w[train], bounds)
                loss += _nll(y[test], fit.predict(X[test]), w[test]) * w[test].sum()
            risk = loss / w.sum()
        except (EstimationError, np.linalg.LinAlgError, FloatingPointError) as exc:
            log.warning("learner %s failed during cross-validation: %s", learner.label, exc)
            risk = np.inf
        if np.isnan(risk):
            risk = np.inf
        cache[learner] = risk
        risks.append(risk)
    index = int(np.argmin(risks))
    assert all(risks[index] <= r for r in risks)
    winner = fit_learner(spec.library[index], X, y, w, bounds)
    return Selection(winner, index, tuple(float(r) for r in risks), labels)
