"""Point-treatment estimators of the g-formula contrast.

All four estimators share the same observed-data conventions: a row
contributes an outcome only when it is uncensored *and* its outcome is
recorded; the probability of that event given ``(A, Z)`` is the censoring
mechanism used for weighting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .errors import EstimationError
from .learners import OUTCOME_BOUNDS, SuperLearnerSpec, cv_select, fit_learner

log = logging.getLogger(__name__)

METHODS = ("unadjusted", "gcomp", "ipw", "tmle")
PROPENSITY_BOUNDS = (0.025, 0.975)
Z95 = 1.96
BOOTSTRAP_RESAMPLES = 200
SCORE_RTOL = 1e-8
SCORE_ATOL = 1e-12


@dataclass(frozen=True)
class EstimateResult:
    """One estimate of the statistical estimand.

    For ``risk_ratio`` results ``se`` is on the log scale and ``ci95`` is the
    back-transformed interval.  ``secondary`` carries the other contrast from
    the same fit (used for E-values and gap shifting).
    """

    estimator: str
    contrast: str
    point: float
    se: float
    ci95: tuple
    arm_risks: tuple
    diagnostics: dict = field(default_factory=dict)
    secondary: dict | None = None

    @property
    def null_value(self):
        return 0.0 if self.contrast == "risk_difference" else 1.0

    @property
    def rejects_null(self):
        lo, hi = self.ci95
        return not (lo <= self.null_value <= hi)

    @property
    def se_scale(self):
        return "difference" if self.contrast == "risk_difference" else "log"

    def contrast_summary(self, contrast):
        """``(point, se, ci95)`` on the requested contrast scale, or None."""
        if contrast == self.contrast:
            return self.point, self.se, self.ci95
        if self.secondary and self.secondary["contrast"] == contrast:
            s = self.secondary
            return s["point"], s["se"], tuple(s["ci95"])
        return None

    @classmethod
    def from_dict(cls, data):
        return cls(data["estimator"], data["contrast"], data["point"], data["se"],
                   tuple(data["ci95"]), tuple(data["arm_risks"]),
                   data.get("diagnostics", {}), data.get("secondary"))

    def to_dict(self):
        return {
            "estimator": self.estimator,
            "contrast": self.contrast,
            "point": self.point,
            "se": self.se,
            "se_scale": self.se_scale,
            "ci95": list(self.ci95),
            "arm_risks": list(self.arm_risks),
            "rejects_null": self.rejects_null,
            "secondary": self.secondary,
            "diagnostics": self.diagnostics,
        }


def _interval(point, se, contrast):
    if contrast == "risk_difference":
        return (point - Z95 * se, point + Z95 * se)
    lp = np.log(point)
    return (float(np.exp(lp - Z95 * se)), float(np.exp(lp + Z95 * se)))


def _summaries(psi1, psi0, var_rd, var_log):
    """Both contrasts from arm risks and variances (None where undefined)."""
    out = {}
    se = float(np.sqrt(var_rd)) if var_rd is not None else np.nan
    rd = psi1 - psi0
    out["risk_difference"] = (rd, se, _interval(rd, se, "risk_difference"))
    if psi1 > 0 and psi0 > 0 and var_log is not None:
        se_l = float(np.sqrt(var_log))
        rr = psi1 / psi0
        out["risk_ratio"] = (rr, se_l, _interval(rr, se_l, "risk_ratio"))
    else:
        out["risk_ratio"] = None
    return out


def _ic_variances(ic1, ic0, psi1, psi0):
    n = len(ic1)
    var_rd = float(np.var(ic1 - ic0, ddof=1) / n)
    var_log = None
    if psi1 > 0 and psi0 > 0:
        var_log = float(np.var(ic1 / psi1 - ic0 / psi0, ddof=1) / n)
    return var_rd, var_log


class _Problem:
    """Arrays shared by the estimators."""

    def __init__(self, d, se):
        missing = [z for z in se.adjustment_set if z not in d.columns]
        if missing:
            raise EstimationError(f"adjustment columns missing from data: {', '.join(missing)}")
        self.n = d.n
        self.A = d.A
        self.R = d.observed()
        self.Y = np.where(self.R, d.Y, 0.0)
        self.Z = d.matrix(list(se.adjustment_set))
        for a in (1, 0):
            if not np.any(self.R & (self.A == a)):
                raise EstimationError(f"no uncensored rows with observed outcome in arm A={a}")
        self.XA = np.column_stack([self.A, self.Z])
        self.X1 = np.column_stack([np.ones(self.n), self.Z])
        self.X0 = np.column_stack([np.zeros(self.n), self.Z])


def _outcome_fit(p, sl, bounds):
    sel = cv_select(sl, p.XA[p.R], p.Y[p.R], bounds=bounds)
    return sel, sel.predict(p.X1), sel.predict(p.X0)


def _weights_fit(p, sl, gbounds):
    """Propensity g(1|Z) and observation probabilities pi_a = P(R=1|A=a,Z)."""
    lo, hi = gbounds
    g_sel = cv_select(sl, p.Z, p.A)
    g_raw = g_sel.predict(p.Z)
    g1 = np.clip(g_raw, lo, hi)
    diag = {
        "propensity": g_sel.to_dict(),
        "propensity_truncated_fraction": float(np.mean((g_raw < lo) | (g_raw > hi))),
    }
    if p.R.all():
        pi1 = pi0 = np.ones(p.n)
        diag["censoring"] = "none observed; P(C=0|A,Z) = 1"
    else:
        c_sel = cv_select(sl, p.XA, p.R.astype(float))
        pi1 = np.maximum(c_sel.predict(p.X1), lo)
        pi0 = np.maximum(c_sel.predict(p.X0), lo)
        diag["censoring"] = c_sel.to_dict()
    return g1, 1.0 - g1, pi1, pi0, diag


def _fluctuate(offset, h, y):
    """Solve the one-parameter logistic score equation sum h*(y - expit(offset + eps*h)) = 0.

    Rows with an infinite offset (initial prediction exactly 0 or 1) carry no
    information and are skipped.
    """
    keep = np.isfinite(offset) & (h != 0)
    off, h, y = offset[keep], h[keep], y[keep]
    if len(h) == 0:
        return 0.0, True

    def loglik(e):
        eta = off + e * h
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))

    eps = 0.0
    ll = loglik(eps)
    for _ in range(200):
        pr = expit(off + eps * h)
        score = float(np.dot(h, y - pr))
        info = float(np.dot(h * h, pr * (1.0 - pr)))
        if score == 0.0:
            return eps, True
        if info <= 0.0 or not np.isfinite(info):
            return eps, False
        step = score / info
        new = eps + step
        ll_new = loglik(new)
        halvings = 0
        while ll_new < ll - 1e-12 * (1.0 + abs(ll)) and halvings < 60:
            step /= 2.0
            new = eps + step
            ll_new = loglik(new)
            halvings += 1
        eps, ll = new, ll_new
        if abs(step) <= 1e-14 * (1.0 + abs(eps)):
            return eps, True
    return eps, False


def _score_ok(ic):
    return abs(float(np.mean(ic))) <= SCORE_RTOL * float(np.std(ic, ddof=1)) + SCORE_ATOL


def estimate(d, se, method="tmle", sl=None, *, propensity_bounds=PROPENSITY_BOUNDS,
             outcome_bounds=OUTCOME_BOUNDS, bootstrap=BOOTSTRAP_RESAMPLES):
    """Estimate ``se`` (a :class:`StatisticalEstimand`) on dataset ``d``.

    Parameters
    ----------
    method : {"unadjusted", "gcomp", "ipw", "tmle"}
    sl : SuperLearnerSpec, optional
        Library, folds and seed for every nuisance fit.  Defaults to the full
        four-learner library with seed 0.
    propensity_bounds : (float, float)
        Truncation applied to the propensity score; its lower bound also
        floors the probability of remaining uncensored.
    outcome_bounds : (float, float)
        Truncation applied to every learner prediction.
    bootstrap : int
        Resamples for the g-computation standard error.
    """
    if method not in METHODS:
        raise EstimationError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    sl = sl or SuperLearnerSpec()
    p = _Problem(d, se)
    diag = {
        "n": p.n,
        "n_observed": int(p.R.sum()),
        "propensity_bounds": list(propensity_bounds),
        "outcome_bounds": list(outcome_bounds),
        "flags": [],
    }
    fn = {"unadjusted": _unadjusted, "gcomp": _gcomp, "ipw": _ipw, "tmle": _tmle}[method]
    psi1, psi0, summaries = fn(p, se, sl, propensity_bounds, outcome_bounds, bootstrap, diag)

    primary = summaries[se.contrast]
    if primary is None:
        raise EstimationError("risk ratio undefined: an estimated arm risk is zero")
    point, s, ci = primary
    if not np.isfinite(s):
        raise EstimationError("standard error could not be computed")
    if s == 0.0:
        diag["flags"].append("degenerate_variance")
        ci = (point, point)
    other = "risk_ratio" if se.contrast == "risk_difference" else "risk_difference"
    secondary = None
    if summaries[other] is not None:
        o_point, o_se, o_ci = summaries[other]
        secondary = {"contrast": other, "point": o_point, "se": o_se, "ci95": list(o_ci)}
    return EstimateResult(method, se.contrast, float(point), float(s),
                          (float(ci[0]), float(ci[1])), (float(psi1), float(psi0)),
                          diag, secondary)


def _unadjusted(p, se, sl, gb, ob, bootstrap, diag):
    arms = {}
    for a in (1, 0):
        rows = p.R & (p.A == a)
        arms[a] = (float(p.Y[rows].mean()), int(rows.sum()))
    (p1, n1), (p0, n0) = arms[1], arms[0]
    var_rd = p1 * (1 - p1) / n1 + p0 * (1 - p0) / n0
    var_log = None
    if p1 > 0 and p0 > 0:
        var_log = (1 - p1) / (n1 * p1) + (1 - p0) / (n0 * p0)
    diag["arm_sizes"] = [n1, n0]
    return p1, p0, _summaries(p1, p0, var_rd, var_log)


def _gcomp(p, se, sl, gb, ob, bootstrap, diag):
    sel, q1, q0 = _outcome_fit(p, sl, ob)
    diag["nuisance"] = {"outcome": sel.to_dict()}
    psi1, psi0 = float(q1.mean()), float(q0.mean())
    rng = np.random.default_rng([sl.seed, 0x6B])
    rd, lrr = [], []
    failures = 0
    for _ in range(bootstrap):
        idx = rng.integers(0, p.n, p.n)
        obs = idx[p.R[idx]]
        try:
            fit = fit_learner(sel.predictor.spec, p.XA[obs], p.Y[obs], bounds=ob)
        except EstimationError:
            failures += 1
            continue
        b1 = fit.predict(p.X1[idx]).mean()
        b0 = fit.predict(p.X0[idx]).mean()
        rd.append(b1 - b0)
        if b1 > 0 and b0 > 0:
            lrr.append(np.log(b1) - np.log(b0))
    diag["bootstrap"] = {"resamples": bootstrap, "failures": failures}
    var_rd = float(np.var(rd, ddof=1)) if len(rd) > 1 else np.nan
    var_log = float(np.var(lrr, ddof=1)) if len(lrr) > 1 and psi1 > 0 and psi0 > 0 else None
    return psi1, psi0, _summaries(psi1, psi0, var_rd, var_log)


def _ipw(p, se, sl, gb, ob, bootstrap, diag):
    g1, g0, pi1, pi0, wdiag = _weights_fit(p, sl, gb)
    diag["nuisance"] = wdiag
    t1 = p.R * (p.A == 1) * p.Y / (g1 * pi1)
    t0 = p.R * (p.A == 0) * p.Y / (g0 * pi0)
    psi1, psi0 = float(t1.mean()), float(t0.mean())
    ic1, ic0 = t1 - psi1, t0 - psi0
    diag["ic_mean"] = float(np.mean(ic1 - ic0))
    var_rd, var_log = _ic_variances(ic1, ic0, psi1, psi0)
    return psi1, psi0, _summaries(psi1, psi0, var_rd, var_log)


def _tmle(p, se, sl, gb, ob, bootstrap, diag):
    sel, q1, q0 = _outcome_fit(p, sl, ob)
    g1, g0, pi1, pi0, wdiag = _weights_fit(p, sl, gb)
    diag["nuisance"] = {"outcome": sel.to_dict(), **wdiag}
    h1, h0 = 1.0 / (g1 * pi1), 1.0 / (g0 * pi0)
    with np.errstate(divide="ignore"):
        l1, l0 = logit(q1), logit(q0)
    obs = p.R
    treated = p.A == 1

    if se.contrast == "risk_difference":
        h_a = np.where(treated, h1, -h0)
        offset = np.where(treated, l1, l0)
        eps, ok = _fluctuate(offset[obs], h_a[obs], p.Y[obs])
        if not ok:
            raise EstimationError("TMLE fluctuation did not converge")
        qs1, qs0 = expit(l1 + eps * h1), expit(l0 - eps * h0)
        psi1, psi0 = float(qs1.mean()), float(qs0.mean())
        qsa = np.where(treated, qs1, qs0)
        resid = np.where(obs, p.Y - qsa, 0.0)
        ic1 = treated * h1 * resid + qs1 - psi1
        ic0 = (~treated) * h0 * resid + qs0 - psi0
        ic = h_a * resid + qs1 - qs0 - (psi1 - psi0)
        diag["fluctuation_epsilon"] = [eps]
    else:
        eps_arm = []
        arms = []
        for a, la, ha in ((1, l1, h1), (0, l0, h0)):
            rows = obs & (p.A == a)
            eps, ok = _fluctuate(la[rows], ha[rows], p.Y[rows])
            if not ok:
                raise EstimationError(f"TMLE fluctuation for arm A={a} did not converge")
            qs = expit(la + eps * ha)
            psi = float(qs.mean())
            resid = np.where(rows, p.Y - qs, 0.0)
            arms.append((psi, ha * resid + qs - psi))
            eps_arm.append(eps)
        (psi1, ic1), (psi0, ic0) = arms
        ic = ic1 / psi1 - ic0 / psi0
        diag["fluctuation_epsilon"] = eps_arm

    diag["ic_mean"] = float(np.mean(ic))
    diag["ic_sd"] = float(np.std(ic, ddof=1))
    diag["score_equation_solved"] = _score_ok(ic)
    if not diag["score_equation_solved"]:
        diag["flags"].append("score_equation_not_solved")
    var_rd, var_log = _ic_variances(ic1, ic0, psi1, psi0)
    if se.contrast == "risk_difference":
        var_rd = float(np.var(ic, ddof=1) / p.n)
    return psi1, psi0, _summaries(psi1, psi0, var_rd, var_log)
