"""Outcome-blind Monte Carlo evaluation of estimators and study designs.

Data-generating processes are binary structural equations written as::

    W ~ Bernoulli(0.5);
    A ~ Bernoulli(expit(-0.4 + 0.8*W)) role=treatment;
    Y ~ Bernoulli(expit(-1 + 1.0*A + 1.0*W - 0.5*A*W)) role=outcome;

Roles default to ``A`` (treatment), ``Y`` (outcome) and ``C`` (censoring)
when not declared; every other node is a covariate unless it says
``role=none``.  The harness accepts only these files, never an observed
outcome column.

Seeding: replication ``r`` under master seed ``s`` draws from
``SeedSequence(s, spawn_key=(r,))``; its super-learner fold seed comes from
``SeedSequence(s, spawn_key=(r, 1))``.  The same replication stream is used
for the null and alternative DGPs, every design and every external-bias
shift, so comparisons across them use common random numbers.
"""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import Dataset
from .errors import DGPError, DGPSyntaxError, EstimationError, SimulationError
from .estimand import CONTRASTS, StatisticalEstimand
from .estimation import METHODS, estimate
from .graph import ROLES, CausalGraph, Node
from .learners import SuperLearnerSpec

log = logging.getLogger(__name__)

DEFAULT_DELTAS = (0.0, 0.25, 0.5, 1.0)
MAX_ENUMERATED = 20
MC_TRUTH_DRAWS = 10_000_000
FAILURE_LIMIT = 0.05
SOURCE_COLUMN = "S"


# -- DGP specification -----------------------------------------------------------

@dataclass(frozen=True)
class DGPNode:
    """One structural equation.  ``const`` is set for ``Bernoulli(p)``;
    otherwise the success probability is ``expit(intercept + sum(coef * term))``
    where each term is a tuple of one or two parent names."""

    name: str
    role: str = "covariate"
    const: float | None = None
    intercept: float = 0.0
    terms: tuple = ()

    @property
    def parents(self):
        return tuple(dict.fromkeys(v for _, term in self.terms for v in term))

    def prob(self, values, n, shift=0.0):
        if self.const is not None and not np.any(shift):
            return np.full(n, self.const)
        if self.const is not None:
            eta = np.full(n, np.log(self.const / (1 - self.const)))
        else:
            eta = np.full(n, self.intercept, dtype=float)
        eta = eta + shift
        for coef, term in self.terms:
            x = values[term[0]]
            if len(term) == 2:
                x = x * values[term[1]]
            eta = eta + coef * x
        return expit(eta)

    def render(self):
        if self.const is not None:
            body = f"Bernoulli({self.const!r})"
        else:
            parts = [repr(self.intercept)]
            for coef, term in self.terms:
                sign = "-" if coef < 0 else "+"
                parts.append(f"{sign} {abs(coef)!r}*{'*'.join(term)}")
            body = f"Bernoulli(expit({' '.join(parts)}))"
        return f"{self.name} ~ {body} role={self.role};"


@dataclass(frozen=True)
class DGPSpec:
    nodes: tuple

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        seen = set()
        for node in self.nodes:
            if node.name in seen:
                raise DGPError(f"node {node.name!r} defined twice")
            if node.role not in ROLES:
                raise DGPError(f"node {node.name!r}: unknown role {node.role!r}")
            for parent in node.parents:
                if parent not in seen:
                    raise DGPError(f"node {node.name!r} references {parent!r} before it is defined")
            if node.const is not None and not 0 < node.const < 1:
                raise DGPError(f"node {node.name!r}: probability {node.const} outside (0, 1)")
            seen.add(node.name)
        if SOURCE_COLUMN in seen:
            raise DGPError(f"node name {SOURCE_COLUMN!r} is reserved for the source indicator")
        for role in ("treatment", "outcome"):
            if sum(n.role == role for n in self.nodes) != 1:
                raise DGPError(f"DGP needs exactly one {role} node")
        if sum(n.role == "censoring" for n in self.nodes) > 1:
            raise DGPError("DGP allows at most one censoring node")

    def _role(self, role):
        for n in self.nodes:
            if n.role == role:
                return n.name
        return None

    @property
    def treatment(self):
        return self._role("treatment")

    @property
    def outcome(self):
        return self._role("outcome")

    @property
    def censoring(self):
        return self._role("censoring")

    @property
    def names(self):
        return tuple(n.name for n in self.nodes)

    @property
    def covariates(self):
        return tuple(n.name for n in self.nodes if n.role == "covariate")

    def node(self, name):
        for n in self.nodes:
            if n.name == name:
                return n
        raise DGPError(f"unknown node {name!r}")

    def replace_node(self, name, **changes):
        from dataclasses import replace
        return DGPSpec(tuple(replace(n, **changes) if n.name == name else n for n in self.nodes))

    def to_graph(self, name="dgp"):
        """The causal graph implied by the equations (all nodes measured)."""
        nodes = [Node(n.name, n.role) for n in self.nodes]
        edges = [(p, n.name) for n in self.nodes for p in n.parents]
        return CausalGraph(name, nodes, edges)

    def render(self):
        return "\n".join(n.render() for n in self.nodes) + "\n"


_DGP_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\n]+)|(?P<comment>#[^\n]*)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[~()*+\-;=])"
)


def _dgp_tokens(text):
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _DGP_TOKEN.match(text, pos)
        if m is None:
            raise DGPSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        if m.lastgroup not in ("ws", "comment"):
            tokens.append((m.lastgroup, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        if "\n" in chunk:
            line += chunk.count("\n")
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(("eof", "<eof>", line, pos - line_start + 1))
    return tokens


class _DGPParser:
    def __init__(self, text):
        self.toks = _dgp_tokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        if tok[0] != "eof":
            self.i += 1
        return tok

    def expect(self, value=None, kind=None):
        k, v, line, col = self.take()
        if (kind and k != kind) or (value and v != value):
            want = value or kind
            raise DGPSyntaxError(f"expected {want!r}, got {v!r}", line, col)
        return v, line, col

    def number(self):
        sign = 1.0
        while self.peek()[1] in "+-" and self.peek()[0] == "punct":
            if self.take()[1] == "-":
                sign = -sign
        v, _, _ = self.expect(kind="num")
        return sign * float(v)

    def statement(self, defined):
        name, line, col = self.expect(kind="ident")
        self.expect("~")
        self.expect("Bernoulli")
        self.expect("(")
        const, intercept, terms = None, 0.0, []
        if self.peek()[1] == "expit":
            self.take()
            self.expect("(")
            intercept = self.number()
            while self.peek()[1] in ("+", "-"):
                _, op, _, _ = self.take()
                coef = self.number() * (-1.0 if op == "-" else 1.0)
                self.expect("*")
                term = [self.ref(defined)]
                if self.peek()[1] == "*":
                    self.take()
                    term.append(self.ref(defined))
                    if self.peek()[1] == "*":
                        _, _, l2, c2 = self.peek()
                        raise DGPSyntaxError("only products of two nodes are allowed", l2, c2)
                terms.append((coef, tuple(term)))
            self.expect(")")
        else:
            _, _, pl, pc = self.peek()
            const = self.number()
            if not 0 < const < 1:
                raise DGPSyntaxError(f"probability {const} outside (0, 1)", pl, pc)
        self.expect(")")
        role = None
        if self.peek()[1] == "role":
            self.take()
            self.expect("=")
            role, rl, rc = self.expect(kind="ident")
            if role not in ROLES:
                raise DGPSyntaxError(f"unknown role {role!r}", rl, rc)
        if name in defined:
            raise DGPSyntaxError(f"node {name!r} defined twice", line, col)
        return name, role, const, intercept, tuple(terms)

    def ref(self, defined):
        v, line, col = self.expect(kind="ident")
        if v not in defined:
            raise DGPSyntaxError(f"reference to {v!r} before its definition", line, col)
        return v


def parse_dgp(text):
    """Parse structural-equation source into a :class:`DGPSpec`."""
    p = _DGPParser(text)
    raw = []
    defined = set()
    while p.peek()[0] != "eof":
        stmt = p.statement(defined)
        defined.add(stmt[0])
        raw.append(stmt)
        if p.peek()[0] == "eof":
            break
        p.expect(";")
    if not raw:
        raise DGPSyntaxError("no node definitions", 1, 1)
    declared = {r for _, r, *_ in raw if r}
    defaults = {"A": "treatment", "Y": "outcome", "C": "censoring"}
    nodes = []
    for name, role, const, intercept, terms in raw:
        if role is None:
            role = defaults.get(name, "covariate")
            if role in declared:
                role = "covariate"
        nodes.append(DGPNode(name, role, const, intercept, terms))
    return DGPSpec(tuple(nodes))


# -- truth -----------------------------------------------------------------------

def _arm_risks_exact(dgp):
    a_name, y_name, c_name = dgp.treatment, dgp.outcome, dgp.censoring
    fixed = {a_name, c_name} - {None}
    needed = set()
    stack = [y_name]
    while stack:
        v = stack.pop()
        for parent in dgp.node(v).parents:
            if parent not in needed and parent not in fixed:
                needed.add(parent)
                stack.append(parent)
    free = [n.name for n in dgp.nodes if n.name in needed]
    if len(free) > MAX_ENUMERATED:
        raise DGPError(
            f"exact enumeration over {len(free)} nodes is unsupported (limit {MAX_ENUMERATED}); "
            "use the Monte Carlo fallback (monte_carlo=True)"
        )
    configs = np.array(list(itertools.product((0.0, 1.0), repeat=len(free))))
    m = len(configs)
    risks = []
    for a in (1.0, 0.0):
        values = {v: configs[:, j] for j, v in enumerate(free)}
        values[a_name] = np.full(m, a)
        if c_name:
            values[c_name] = np.zeros(m)
        weight = np.ones(m)
        for node in dgp.nodes:
            if node.name in values and node.name in needed:
                p = node.prob(values, m)
                x = values[node.name]
                weight = weight * np.where(x == 1.0, p, 1.0 - p)
            elif node.name == y_name:
                risks.append(float(np.dot(weight, node.prob(values, m))))
                break
    return risks[0], risks[1]


def _contrast(p1, p0, contrast):
    return p1 - p0 if contrast == "risk_difference" else p1 / p0


def true_estimand_mc(dgp, contrast="risk_difference", draws=MC_TRUTH_DRAWS, seed=0, chunk=1_000_000):
    """Monte Carlo approximation of the causal contrast; returns (value, mc_se)."""
    rng = np.random.default_rng(seed)
    totals = np.zeros(2)
    done = 0
    while done < draws:
        k = min(chunk, draws - done)
        ys = []
        for a in (1.0, 0.0):
            sub = np.random.default_rng(rng.integers(2**63))
            values = {}
            for node in dgp.nodes:
                if node.name == dgp.treatment:
                    values[node.name] = np.full(k, a)
                elif node.name == dgp.censoring:
                    values[node.name] = np.zeros(k)
                else:
                    values[node.name] = (sub.random(k) < node.prob(values, k)).astype(float)
            ys.append(values[dgp.outcome])
        totals += ys[0].sum(), ys[1].sum()
        done += k
    p1, p0 = totals / draws
    v1, v0 = p1 * (1 - p1), p0 * (1 - p0)
    if contrast == "risk_difference":
        return p1 - p0, float(np.sqrt((v1 + v0) / draws))
    return p1 / p0, float(np.sqrt(v1 / p0**2 + v0 * p1**2 / p0**4) / np.sqrt(draws))


def true_estimand(dgp, contrast="risk_difference", monte_carlo=False):
    """Causal contrast of P(Y=1) with treatment set to 1 vs 0 and censoring
    prevented, by exact enumeration over the binary ancestors of the outcome.

    ``contrast`` may also be a :class:`~roadmap_engine.estimand.CausalEstimand`.
    """
    contrast = getattr(contrast, "contrast", contrast)
    if contrast not in CONTRASTS:
        raise DGPError(f"unknown contrast {contrast!r}")
    if monte_carlo:
        return true_estimand_mc(dgp, contrast)[0]
    p1, p0 = _arm_risks_exact(dgp)
    return _contrast(p1, p0, contrast)


# -- designs and data ------------------------------------------------------------

DESIGN_KINDS = ("rct", "observational", "hybrid")


@dataclass(frozen=True)
class DesignSpec:
    """A complete analytic design to simulate.

    ``hybrid`` draws ``n_rct`` randomized rows plus ``n_external`` external
    controls (treatment forced to 0, outcome logit shifted by each value in
    ``deltas``) marked by a source column ``S``.  The analysis pools all rows
    and adjusts for ``adjust`` but never for ``S``.
    """

    name: str
    kind: str
    n: int = 0
    n_rct: int = 0
    n_external: int = 0
    deltas: tuple = DEFAULT_DELTAS
    estimators: tuple = ("tmle",)
    alpha: float = 0.05
    adjust: tuple | None = None
    contrast: str = "risk_difference"
    sl: SuperLearnerSpec = field(default_factory=SuperLearnerSpec)

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "deltas", tuple(float(x) for x in self.deltas))
        if self.kind not in DESIGN_KINDS:
            raise SimulationError(f"design {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "hybrid":
            if self.n_rct < 1 or self.n_external < 1:
                raise SimulationError(f"design {self.name!r}: hybrid needs n_rct and n_external")
            if not self.deltas:
                raise SimulationError(f"design {self.name!r}: empty delta grid")
        elif self.n < 1:
            raise SimulationError(f"design {self.name!r}: sample size n must be positive")
        for est in self.estimators:
            if est not in METHODS:
                raise SimulationError(f"design {self.name!r}: unknown estimator {est!r}")
        if self.alpha != 0.05:
            raise SimulationError("only alpha = 0.05 (95% intervals) is supported")
        if self.contrast not in CONTRASTS:
            raise SimulationError(f"design {self.name!r}: unknown contrast {self.contrast!r}")

    @property
    def total_n(self):
        return self.n_rct + self.n_external if self.kind == "hybrid" else self.n

    @property
    def delta_grid(self):
        return self.deltas if self.kind == "hybrid" else (0.0,)

    def adjustment_for(self, dgp):
        if self.adjust is not None:
            return tuple(self.adjust)
        g = dgp.to_graph()
        downstream = g.descendants(dgp.treatment)
        return tuple(c for c in dgp.covariates if c not in downstream)

    def to_dict(self):
        out = {"name": self.name, "kind": self.kind, "estimators": list(self.estimators),
               "alpha": self.alpha, "contrast": self.contrast, "super_learner": self.sl.to_dict()}
        if self.kind == "hybrid":
            out.update(n_rct=self.n_rct, n_external=self.n_external, deltas=list(self.deltas))
        else:
            out["n"] = self.n
        if self.adjust is not None:
            out["adjust"] = list(self.adjust)
        return out


def replication_streams(master_seed, index):
    """(data generator, super-learner seed) for one replication."""
    data = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))
    sl_seed = int(np.random.SeedSequence(master_seed, spawn_key=(index, 1)).generate_state(1, np.uint64)[0])
    return data, sl_seed


def _draw(dgp, n, rng, forced=None, treat_p=None, outcome_shift=None):
    """Sample every node in order.  One uniform per node and row is consumed
    whatever the overrides, keeping streams aligned across designs."""
    forced = forced or {}
    values = {}
    for node in dgp.nodes:
        u = rng.random(n)
        if node.name == dgp.treatment and treat_p is not None:
            p = treat_p
        elif node.name == dgp.outcome and outcome_shift is not None:
            p = node.prob(values, n, outcome_shift)
        else:
            p = node.prob(values, n)
        x = (u < p).astype(float)
        if node.name in forced:
            x = np.where(np.isnan(forced[node.name]), x, forced[node.name])
        values[node.name] = x
    return values


def simulate_dataset(dgp, design, replication_index, master_seed, delta=0.0):
    """Draw one replication of ``design`` from ``dgp`` as a :class:`Dataset`."""
    rng, _ = replication_streams(master_seed, replication_index)
    n = design.total_n
    columns_extra = {}
    if design.kind == "observational":
        values = _draw(dgp, n, rng)
    elif design.kind == "rct":
        values = _draw(dgp, n, rng, treat_p=np.full(n, 0.5))
    else:
        ext = np.arange(n) >= design.n_rct
        forced_a = np.where(ext, 0.0, np.nan)
        values = _draw(dgp, n, rng, forced={dgp.treatment: forced_a},
                       treat_p=np.full(n, 0.5), outcome_shift=np.where(ext, delta, 0.0))
        columns_extra[SOURCE_COLUMN] = ext.astype(float)
    if dgp.censoring:
        values[dgp.outcome] = np.where(values[dgp.censoring] == 1, np.nan, values[dgp.outcome])
    columns = {**values, **columns_extra}
    return Dataset(columns, dgp.treatment, dgp.outcome, dgp.censoring, dgp.covariates,
                   SOURCE_COLUMN if columns_extra else None)


# -- evaluation ------------------------------------------------------------------

def _replicate(dgp, design, delta, r, master_seed, stat):
    d = simulate_dataset(dgp, design, r, master_seed, delta)
    _, sl_seed = replication_streams(master_seed, r)
    sl = design.sl.with_seed(sl_seed)
    out = []
    for est in design.estimators:
        try:
            res = estimate(d, stat, est, sl)
        except (EstimationError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            log.debug("replication %d, %s failed: %s", r, est, exc)
            out.append(None)
            continue
        solved = res.diagnostics.get("score_equation_solved", True)
        out.append((res.point, res.se, res.ci95[0], res.ci95[1], res.rejects_null, solved))
    return out


def _run_cell_group(dgp, design, delta, M, master_seed, stat, n_jobs):
    if n_jobs == 1:
        results = [_replicate(dgp, design, delta, r, master_seed, stat) for r in range(M)]
    else:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=n_jobs)(
            delayed(_replicate)(dgp, design, delta, r, master_seed, stat) for r in range(M))
    # results are indexed by replication, so aggregation is order-independent
    return results


def _rate(flags):
    m = len(flags)
    p = float(np.mean(flags)) if m else float("nan")
    return p, float(np.sqrt(p * (1 - p) / m)) if m else float("nan")


def _metrics(rows, truth, M):
    ok = [r for r in rows if r is not None]
    failures = M - len(ok)
    est = np.array([r[0] for r in ok])
    lo = np.array([r[2] for r in ok])
    hi = np.array([r[3] for r in ok])
    m = len(ok)
    out = {"replications": M, "failures": failures, "valid": failures <= FAILURE_LIMIT * M}
    if m < 2:
        return out
    var = float(np.var(est, ddof=1))
    cov, cov_se = _rate((lo <= truth) & (truth <= hi))
    rej, rej_se = _rate(np.array([r[4] for r in ok]))
    out.update(
        mean_estimate=float(est.mean()),
        bias=float(est.mean() - truth),
        bias_mcse=float(np.sqrt(var / m)),
        variance=var,
        variance_mcse=float(var * np.sqrt(2.0 / (m - 1))),
        mean_se=float(np.mean([r[1] for r in ok])),
        coverage=cov,
        coverage_mcse=cov_se,
        rejection_rate=rej,
        rejection_rate_mcse=rej_se,
        score_equation_failures=int(sum(not r[5] for r in ok)),
    )
    return out


@dataclass
class SimulationReport:
    M: int
    master_seed: int
    truths: dict
    cells: list
    designs: list
    summaries: list

    def cell(self, design, estimator, delta=0.0):
        for c in self.cells:
            if c["design"] == design and c["estimator"] == estimator and c["delta"] == float(delta):
                return c
        raise KeyError((design, estimator, delta))

    def to_dict(self):
        return {
            "replications": self.M,
            "master_seed": self.master_seed,
            "truth": self.truths,
            "designs": self.designs,
            "cells": self.cells,
            "design_summaries": self.summaries,
        }

    def to_markdown(self):
        head = ("| design | estimator | delta | bias | variance | coverage | type I | power | valid |\n"
                "|---|---|---|---|---|---|---|---|---|")
        lines = [head]
        for c in self.cells:
            a, z = c["alt"], c["null"]
            lines.append(
                f"| {c['design']} | {c['estimator']} | {c['delta']:g} | "
                f"{_f(a.get('bias'))} | {_f(a.get('variance'), 6)} | {_f(a.get('coverage'))} | "
                f"{_f(c.get('type1'))} | {_f(c.get('power'))} | {'yes' if c['valid'] else 'NO'} |")
        lines.append("")
        lines.append("| design | estimator | worst-case type I | at delta | nondecreasing | total n |")
        lines.append("|---|---|---|---|---|---|")
        for s in self.summaries:
            lines.append(f"| {s['design']} | {s['estimator']} | {_f(s['worst_case_type1'])} | "
                         f"{s['worst_case_delta']:g} | {s['type1_nondecreasing']} | "
                         f"{s['mean_total_sample_size']} |")
        return "\n".join(lines) + "\n"


def _f(x, digits=4):
    return "-" if x is None else f"{x:.{digits}f}"


def evaluate(dgp_null, dgp_alt, designs, M=1000, master_seed=0, n_jobs=1):
    """Operating characteristics of every design x estimator x external-bias cell.

    Under the alternative DGP: bias, variance and coverage of the true causal
    contrast, and power.  Under the null DGP: type I error.  Hybrid designs
    also get the worst-case type I error over their shift grid.
    """
    if M < 100:
        raise SimulationError(f"need at least 100 replications, got {M}")
    for dgp in (dgp_null, dgp_alt):
        if not isinstance(dgp, DGPSpec):
            raise SimulationError("evaluate accepts DGP specifications only (outcome-blind)")
    if (dgp_null.treatment, dgp_null.outcome) != (dgp_alt.treatment, dgp_alt.outcome):
        raise SimulationError("null and alternative DGPs must share treatment and outcome nodes")
    truths = {}
    cells, summaries = [], []
    for design in designs:
        key = design.contrast
        if key not in truths:
            truths[key] = {"null": true_estimand(dgp_null, key), "alt": true_estimand(dgp_alt, key),
                           "method": "exact enumeration"}
        truth = truths[key]
        stats = {}
        for tag, dgp in (("null", dgp_null), ("alt", dgp_alt)):
            stats[tag] = StatisticalEstimand(design.adjustment_for(dgp), dgp.treatment, dgp.outcome,
                                             design.contrast, dgp.censoring)
        for delta in design.delta_grid:
            per_dgp = {}
            for tag, dgp in (("null", dgp_null), ("alt", dgp_alt)):
                per_dgp[tag] = _run_cell_group(dgp, design, delta, M, master_seed, stats[tag], n_jobs)
            for j, est in enumerate(design.estimators):
                m_null = _metrics([r[j] for r in per_dgp["null"]], truth["null"], M)
                m_alt = _metrics([r[j] for r in per_dgp["alt"]], truth["alt"], M)
                cells.append({
                    "design": design.name,
                    "kind": design.kind,
                    "estimator": est,
                    "delta": float(delta),
                    "adjustment_set": list(stats["alt"].adjustment_set),
                    "total_sample_size": design.total_n,
                    "null": m_null,
                    "alt": m_alt,
                    "type1": m_null.get("rejection_rate"),
                    "type1_mcse": m_null.get("rejection_rate_mcse"),
                    "power": m_alt.get("rejection_rate"),
                    "power_mcse": m_alt.get("rejection_rate_mcse"),
                    "valid": m_null["valid"] and m_alt["valid"],
                })
        for est in design.estimators:
            mine = [c for c in cells if c["design"] == design.name and c["estimator"] == est]
            mine.sort(key=lambda c: abs(c["delta"]))
            t1 = [c["type1"] for c in mine]
            worst = max(range(len(mine)), key=lambda i: (t1[i] if t1[i] is not None else -1.0))
            summaries.append({
                "design": design.name,
                "estimator": est,
                "worst_case_type1": t1[worst],
                "worst_case_type1_mcse": mine[worst]["type1_mcse"],
                "worst_case_delta": mine[worst]["delta"],
                "type1_nondecreasing": all(
                    a is not None and b is not None and b >= a for a, b in zip(t1, t1[1:])),
                "power_at_no_bias": mine[0]["power"],
                "mean_total_sample_size": design.total_n,
            })
    return SimulationReport(M, master_seed, truths, cells, [d.to_dict() for d in designs], summaries)


def calibrate_dgp(dgp, d):
    """Set constant-probability covariate, treatment and censoring nodes to
    the marginal frequencies in ``d``.  The outcome column is never read."""
    out = dgp
    for node in dgp.nodes:
        if node.role == "outcome" or node.const is None or node.name not in d.columns:
            continue
        if node.name == d.outcome:
            continue
        p = float(np.mean(d.columns[node.name]))
        p = min(max(p, 1e-6), 1 - 1e-6)
        out = out.replace_node(node.name, const=p)
    return out
