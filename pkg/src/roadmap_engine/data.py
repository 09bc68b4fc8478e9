"""Observed data: loading, fit-for-use summaries and positivity diagnostics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError
from .learners import LearnerSpec, fit_learner

MISSING_TOKENS = ("", "NA")
DEFAULT_TAU = 0.025
DISCRETE_MAX_LEVELS = 10


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed rows ``(W, A, C, Y*)``.

    ``columns`` maps names to float arrays; the outcome may hold NaN
    (missing), every other column is complete.  Without a censoring column
    all rows count as uncensored.
    """

    columns: dict
    treatment: str
    outcome: str
    censoring: str | None = None
    covariates: tuple = ()
    source: str | None = None

    def __post_init__(self):
        cols = {k: np.array(v, dtype=float) for k, v in self.columns.items()}
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "covariates", tuple(self.covariates))
        lengths = {len(v) for v in cols.values()}
        if len(lengths) > 1:
            raise DataError("columns have different lengths")
        if not lengths or lengths == {0}:
            raise DataError("dataset has no rows")
        required = [self.treatment, self.outcome, *self.covariates]
        required += [c for c in (self.censoring, self.source) if c]
        for name in required:
            if name not in cols:
                raise DataError(f"missing column {name!r}")
        for name in (self.treatment, self.censoring, self.source):
            if name:
                _check_binary(cols[name], name)
        for name, col in cols.items():
            if name != self.outcome and np.isnan(col).any():
                row = int(np.flatnonzero(np.isnan(col))[0]) + 1
                raise DataError(f"missing value in column {name!r}, row {row}")
        y = cols[self.outcome]
        bad = ~np.isnan(y) & (y != 0) & (y != 1)
        if bad.any():
            row = int(np.flatnonzero(bad)[0]) + 1
            raise DataError(f"outcome column {self.outcome!r} must be 0/1, got {y[row - 1]:g} at row {row}")
        for col in cols.values():
            col.setflags(write=False)

    @property
    def n(self):
        return len(self.columns[self.treatment])

    @property
    def A(self):
        return self.columns[self.treatment]

    @property
    def Y(self):
        return self.columns[self.outcome]

    @property
    def C(self):
        if self.censoring is None:
            return np.zeros(self.n)
        return self.columns[self.censoring]

    def observed(self):
        """Rows whose outcome is usable: uncensored with a recorded outcome."""
        return (self.C == 0) & ~np.isnan(self.Y)

    def matrix(self, names):
        if not names:
            return np.empty((self.n, 0))
        for name in names:
            if name not in self.columns:
                raise DataError(f"missing column {name!r}")
        return np.column_stack([self.columns[c] for c in names])

    def with_outcome(self, name):
        """Same rows with ``name`` as the outcome (used for negative controls)."""
        if name not in self.columns:
            raise DataError(f"missing column {name!r}")
        covs = tuple(c for c in self.covariates if c != name)
        cols = {k: v for k, v in self.columns.items() if k != self.outcome}
        return replace(self, columns=cols, outcome=name, covariates=covs)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        same_roles = (self.treatment, self.outcome, self.censoring, self.covariates, self.source) == (
            other.treatment, other.outcome, other.censoring, other.covariates, other.source)
        return (same_roles and list(self.columns) == list(other.columns)
                and all(np.array_equal(self.columns[k], other.columns[k], equal_nan=True)
                        for k in self.columns))

    __hash__ = None


def _check_binary(col, name):
    bad = (col != 0) & (col != 1)
    if bad.any():
        row = int(np.flatnonzero(bad)[0]) + 1
        raise DataError(f"column {name!r} must be 0/1, got {col[row - 1]:g} at row {row}")


@dataclass(frozen=True)
class Schema:
    """Column roles for :func:`load_dataset`.  ``covariates=None`` means every
    column without another role."""

    treatment: str
    outcome: str
    censoring: str | None = None
    covariates: tuple | None = None
    source: str | None = None


def load_dataset(path, schema):
    """Read a comma-separated file with a header row into a :class:`Dataset`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(cell.strip() for cell in r)]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    named = [schema.treatment, schema.outcome, schema.censoring, schema.source]
    for name in [*filter(None, named), *(schema.covariates or ())]:
        if name not in header:
            raise DataError(f"{path}: missing column {name!r}")
    if not rows:
        raise DataError(f"{path}: no data rows")

    columns = {}
    for j, name in enumerate(header):
        values = np.empty(len(rows))
        for i, row in enumerate(rows):
            if len(row) != len(header):
                raise DataError(f"{path}: row {i + 1} has {len(row)} fields, expected {len(header)}")
            cell = row[j].strip()
            if cell in MISSING_TOKENS:
                if name != schema.outcome:
                    raise DataError(f"{path}: missing value in column {name!r}, row {i + 1}")
                values[i] = np.nan
                continue
            try:
                values[i] = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} in column {name!r}, row {i + 1}") from None
        columns[name] = values

    if schema.covariates is None:
        roles = set(filter(None, named))
        covariates = tuple(h for h in header if h not in roles)
    else:
        covariates = tuple(schema.covariates)
    try:
        return Dataset(columns, schema.treatment, schema.outcome, schema.censoring,
                       covariates, schema.source)
    except DataError as exc:
        raise DataError(f"{path}: {exc.message}") from None


def _fmt(x):
    if np.isnan(x):
        return "NA"
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def write_dataset(d, path):
    """Canonical serialisation: header, then one row per line, ``NA`` for missing."""
    names = list(d.columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(d.n):
            writer.writerow([_fmt(d.columns[c][i]) for c in names])


def missingness_summary(d):
    """Per-column missing fractions and the censoring / missing-outcome cross-tab."""
    missing_y = np.isnan(d.Y)
    c = d.C.astype(bool)
    fractions = {name: float(np.isnan(col).mean()) for name, col in d.columns.items()}
    crosstab = {
        "C=0": {"outcome_observed": int((~c & ~missing_y).sum()),
                "outcome_missing": int((~c & missing_y).sum())},
        "C=1": {"outcome_observed": int((c & ~missing_y).sum()),
                "outcome_missing": int((c & missing_y).sum())},
    }
    flagged = np.flatnonzero(~c & missing_y)
    return {
        "n": d.n,
        "missing_fraction": fractions,
        "censored_fraction": float(c.mean()),
        "censoring_vs_outcome_missing": crosstab,
        "uncensored_missing_outcome": {
            "count": int(len(flagged)),
            "rows": [int(i) + 1 for i in flagged],
        },
    }


@dataclass(frozen=True)
class PositivityReport:
    threshold: float
    propensity_min: float
    propensity_max: float
    fraction_below: float
    fraction_above: float
    strata: tuple = field(default=())
    fallback: bool = False

    @property
    def flagged_strata(self):
        return tuple(s for s in self.strata if s["flagged"])

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "propensity_min": self.propensity_min,
            "propensity_max": self.propensity_max,
            "fraction_below_threshold": self.fraction_below,
            "fraction_above_one_minus_threshold": self.fraction_above,
            "strata": list(self.strata),
            "propensity_fit_fallback": self.fallback,
        }


def _is_discrete(col):
    return np.all(col == np.round(col)) and len(np.unique(col)) <= DISCRETE_MAX_LEVELS


def positivity_diagnostics(d, Z, tau=DEFAULT_TAU):
    """Propensity-score overlap diagnostics on all rows.

    A main-terms logistic propensity model for the treatment given ``Z`` is
    fitted without truncation.  When every column of ``Z`` is discrete the
    exact treated proportion of each stratum is tabulated too.
    """
    if not 0 < tau < 0.5:
        raise DataError(f"positivity threshold must lie in (0, 0.5), got {tau}", step="3")
    Z = list(Z)
    X = d.matrix(Z)
    A = d.A
    fit = fit_learner(LearnerSpec("logistic_main_terms"), X, A, bounds=(0.0, 1.0))
    g = fit.predict(X)
    strata = []
    if all(_is_discrete(d.columns[c]) for c in Z):
        if Z:
            keys, inv = np.unique(X, axis=0, return_inverse=True)
            inv = np.asarray(inv).reshape(-1)
        else:
            keys, inv = np.empty((1, 0)), np.zeros(d.n, dtype=int)
        for k, key in enumerate(keys):
            rows = inv == k
            p = float(A[rows].mean())
            strata.append({
                "stratum": {c: _num(v) for c, v in zip(Z, key)},
                "n": int(rows.sum()),
                "treated_proportion": p,
                "flagged": bool(p < tau or p > 1 - tau),
            })
    return PositivityReport(
        threshold=tau,
        propensity_min=float(g.min()),
        propensity_max=float(g.max()),
        fraction_below=float((g < tau).mean()),
        fraction_above=float((g > 1 - tau).mean()),
        strata=tuple(strata),
        fallback=fit.fallback,
    )


def _num(v):
    v = float(v)
    return int(v) if v.is_integer() else v
