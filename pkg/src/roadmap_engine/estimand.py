"""Causal question, identification assessment, and the statistical estimand."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EstimandError, IdentificationError, NotIdentifiedError
from .graph import (
    adjustment_pool,
    backdoor_blocked,
    censoring_blocked,
    find_adjustment_sets,
)

CONTRASTS = ("risk_difference", "risk_ratio")
POSITIVITY_VERDICT = "empirical - see diagnostics"


@dataclass(frozen=True)
class TreatmentStrategy:
    a: int
    c: int = 0

    def __post_init__(self):
        if self.a not in (0, 1):
            raise EstimandError(f"treatment level must be 0 or 1, got {self.a!r}")
        if self.c != 0:
            raise EstimandError("censoring level is fixed at 0 (no one is lost to follow-up)")


@dataclass(frozen=True)
class CausalEstimand:
    """Contrast of P(Y^{a,c=0} = 1) between two treatment strategies."""

    population: str
    outcome: str
    contrast: str = "risk_difference"
    strategy1: TreatmentStrategy = field(default_factory=lambda: TreatmentStrategy(1))
    strategy0: TreatmentStrategy = field(default_factory=lambda: TreatmentStrategy(0))
    outcome_description: str = ""

    def __post_init__(self):
        if self.contrast not in CONTRASTS:
            raise EstimandError(
                f"contrast must be one of {', '.join(CONTRASTS)}, got {self.contrast!r}"
            )
        if self.strategy1.a == self.strategy0.a:
            raise EstimandError("the two treatment strategies must differ in treatment level")

    def formula(self, treatment="A", censoring="C"):
        y = self.outcome
        arm = lambda s: f"P({y}^{{{treatment.lower()}={s.a},{censoring.lower()}=0}} = 1)"
        op = " - " if self.contrast == "risk_difference" else " / "
        return arm(self.strategy1) + op + arm(self.strategy0)

    def to_dict(self):
        return {
            "population": self.population,
            "outcome": self.outcome,
            "outcome_description": self.outcome_description,
            "contrast": self.contrast,
            "strategies": [
                {"a": self.strategy1.a, "c": self.strategy1.c},
                {"a": self.strategy0.a, "c": self.strategy0.c},
            ],
        }


@dataclass(frozen=True)
class IdentificationResult:
    status: str
    adjustment_sets: tuple
    assumptions: dict
    treatment: str
    outcome: str
    censoring: str | None = None

    @property
    def identified(self):
        return self.status == "identified"

    @property
    def witnesses(self):
        out = []
        for verdict in self.assumptions.values():
            out.extend(verdict.get("witnesses", ()))
        return tuple(out)

    def to_dict(self):
        assumptions = {}
        for key, verdict in self.assumptions.items():
            entry = dict(verdict)
            entry["witnesses"] = [w.to_dict() for w in verdict.get("witnesses", ())]
            assumptions[key] = entry
        return {
            "status": self.status,
            "treatment": self.treatment,
            "outcome": self.outcome,
            "censoring": self.censoring,
            "adjustment_sets": [sorted(s) for s in self.adjustment_sets],
            "assumptions": assumptions,
        }


@dataclass(frozen=True)
class StatisticalEstimand:
    """The g-formula contrast over the observed data for a chosen adjustment set."""

    adjustment_set: tuple
    treatment: str
    outcome: str
    contrast: str = "risk_difference"
    censoring: str | None = None

    def arm_mean(self, a):
        y = self.outcome + ("*" if self.censoring else "")
        cond = [f"{self.censoring}=0"] if self.censoring else []
        cond.append(f"{self.treatment}={a}")
        cond.extend(self.adjustment_set)
        return f"P[{y}|{','.join(cond)}]"

    @property
    def formula(self):
        m1, m0 = self.arm_mean(1), self.arm_mean(0)
        z = ",".join(self.adjustment_set)
        if self.contrast == "risk_difference":
            if z:
                return f"E_{z}({m1} - {m0})"
            return f"{m1} - {m0}"
        if z:
            return f"E_{z}({m1}) / E_{z}({m0})"
        return f"{m1} / {m0}"

    def to_dict(self):
        return {
            "adjustment_set": list(self.adjustment_set),
            "treatment": self.treatment,
            "outcome": self.outcome,
            "censoring": self.censoring,
            "contrast": self.contrast,
            "arm_means": [self.arm_mean(1), self.arm_mean(0)],
            "formula": self.formula,
        }


def check_identification(g, ce):
    """Assess exchangeability for treatment and censoring from the graph.

    Positivity is never settled by the graph; its verdict always points at the
    empirical diagnostics.
    """
    a, y, c = g.treatment, g.outcome, g.censoring
    if a is None or y is None:
        raise IdentificationError("graph needs a treatment node and an outcome node")
    if ce.outcome != y:
        raise IdentificationError(
            f"estimand outcome {ce.outcome!r} is not the graph's outcome node {y!r}"
        )
    sets = tuple(find_adjustment_sets(g))
    positivity = {"verdict": POSITIVITY_VERDICT}
    if sets:
        z = sets[0]
        assumptions = {
            "exchangeability_treatment": {"verdict": "satisfied", "given": sorted(z)},
            "exchangeability_censoring": {
                "verdict": "satisfied" if c else "not applicable",
                "given": sorted(z),
            },
            "positivity": positivity,
        }
        return IdentificationResult("identified", sets, assumptions, a, y, c)

    pool = adjustment_pool(g)
    bd = backdoor_blocked(g, pool)
    cens = censoring_blocked(g, pool)
    assumptions = {
        "exchangeability_treatment": _verdict(bd, pool),
        "exchangeability_censoring": (
            _verdict(cens, pool) if c else {"verdict": "not applicable", "given": pool}
        ),
        "positivity": positivity,
    }
    return IdentificationResult("not_identified", (), assumptions, a, y, c)


def _verdict(dsep, pool):
    if dsep:
        return {"verdict": "satisfied", "given": list(pool)}
    return {"verdict": "violated", "given": list(pool), "witnesses": dsep.witnesses}


def compile_statistical_estimand(ce, ir, choice=0):
    """Bind the chosen adjustment set and contrast into a :class:`StatisticalEstimand`."""
    if not ir.identified:
        paths = "; ".join(str(w) for w in ir.witnesses) or "no valid adjustment set"
        raise NotIdentifiedError(
            f"causal effect is not identified from the graph (open path: {paths})",
            witnesses=ir.witnesses,
        )
    if not 0 <= choice < len(ir.adjustment_sets):
        raise IdentificationError(
            f"adjustment-set index {choice} out of range (have {len(ir.adjustment_sets)})",
            step="4",
        )
    z = tuple(sorted(ir.adjustment_sets[choice]))
    return StatisticalEstimand(z, ir.treatment, ir.outcome, ce.contrast, ir.censoring)
