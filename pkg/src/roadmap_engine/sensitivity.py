"""Sensitivity analysis for violations of the identification assumptions:
causal-gap interval shifting, E-values and negative-control outcomes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import SensitivityError
from .estimation import estimate


@dataclass(frozen=True)
class GapBounds:
    """Plausible range of ``statistical estimand - causal estimand`` on the
    risk-difference scale, with a written justification."""

    lo: float
    hi: float
    provenance: str

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise SensitivityError(f"gap bounds need lo <= hi, got [{self.lo}, {self.hi}]")
        if not self.provenance or not self.provenance.strip():
            raise SensitivityError("gap bounds need a provenance statement")

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "provenance": self.provenance}


def shifted_interval(er, gb):
    """Confidence interval for the causal effect allowing any gap in ``gb``.

    The causal effect equals the statistical estimand minus the gap, so the
    lower limit moves by the largest gap and the upper by the smallest.
    """
    summary = er.contrast_summary("risk_difference")
    if summary is None:
        raise SensitivityError("gap shifting is defined on the risk-difference scale only")
    lo, hi = summary[2]
    return (lo - gb.hi, hi - gb.lo)


def e_value_rr(rr):
    """E-value for a risk ratio: RR + sqrt(RR * (RR - 1)), after inverting RR < 1."""
    if not rr > 0 or not math.isfinite(rr):
        raise SensitivityError(f"E-value needs a positive finite risk ratio, got {rr}")
    if rr < 1:
        rr = 1.0 / rr
    return rr + math.sqrt(rr * (rr - 1.0))


def e_value(er):
    """E-values for the point estimate and for the confidence limit nearer the null.

    The risk ratio comes from the arm risks whatever the headline contrast.
    The limit's E-value is 1 when the interval crosses 1.
    """
    p1, p0 = er.arm_risks
    if p0 <= 0:
        raise SensitivityError("risk ratio undefined: estimated control-arm risk is 0")
    rr = p1 / p0
    point = e_value_rr(rr)
    summary = er.contrast_summary("risk_ratio")
    if summary is None:
        return point, None
    lo, hi = summary[2]
    if rr >= 1:
        limit = 1.0 if lo <= 1 else e_value_rr(lo)
    else:
        limit = 1.0 if hi >= 1 else e_value_rr(hi)
    return point, limit


def negative_control_check(d, se, nc_columns, method="tmle", sl=None, **kwargs):
    """Re-run the estimator with each negative-control column as the outcome.

    Returns one dict per column with the :class:`EstimateResult` and whether
    0 falls outside its 95% interval on the difference scale.
    """
    out = []
    for col in nc_columns:
        if col in se.adjustment_set:
            raise SensitivityError(f"negative control {col!r} is in the adjustment set")
        nc_se = replace(se, outcome=col, contrast="risk_difference")
        er = estimate(d.with_outcome(col), nc_se, method, sl, **kwargs)
        lo, hi = er.ci95
        out.append({"column": col, "estimate": er, "null_excluded": not (lo <= 0.0 <= hi)})
    return out


@dataclass(frozen=True)
class SensitivityReport:
    shifted_ci: tuple | None
    e_value: float
    e_value_ci: float | None
    negative_controls: tuple = field(default=())
    gap: GapBounds | None = None
    verdict: str = ""

    def to_dict(self):
        return {
            "gap": self.gap.to_dict() if self.gap else None,
            "gap_scale": "risk_difference",
            "shifted_ci95": list(self.shifted_ci) if self.shifted_ci else None,
            "e_value": self.e_value,
            "e_value_ci": self.e_value_ci,
            "negative_controls": [
                {"column": r["column"], "null_excluded": r["null_excluded"],
                 "estimate": r["estimate"].to_dict()}
                for r in self.negative_controls
            ],
            "verdict": self.verdict,
        }


def sensitivity_report(er, gb=None, nc_results=()):
    shifted = shifted_interval(er, gb) if gb is not None else None
    ev, ev_ci = e_value(er)
    lines = []
    if shifted is not None:
        if shifted[0] > 0 or shifted[1] < 0:
            lines.append("the gap-shifted interval excludes 0: the effect survives the stated causal gap")
        else:
            lines.append("the gap-shifted interval includes 0: the stated causal gap could explain the estimate")
    lines.append(f"E-value {ev:.3f} (confidence limit {ev_ci:.3f})" if ev_ci is not None
                 else f"E-value {ev:.3f}")
    flagged = [r["column"] for r in nc_results if r["null_excluded"]]
    if flagged:
        lines.append("negative controls with non-null estimates (possible residual bias): "
                     + ", ".join(flagged))
    elif nc_results:
        lines.append("no negative control showed a non-null estimate")
    return SensitivityReport(shifted, ev, ev_ci, tuple(nc_results), gb, "; ".join(lines))
