"""Study-configuration and design-file loading (TOML).

Study configuration::

    [study]
    population = "Adults with condition X eligible for drug D"
    graph = "graph.dag"                # relative to this file
    outcome_description = "progression by 2 years"
    contrast = "risk_difference"       # or "risk_ratio"
    adjustment_set = 0                 # index into the identified sets
    outcome_redefinition = ""          # e.g. composite of progression or death

    [columns]                          # defaults: the graph's role nodes
    treatment = "A"
    outcome = "Y"
    censoring = "C"

    [attestations]                     # free text, copied into the report
    time_zero = "..."

    [estimator]
    method = "tmle"
    library = ["mean_only", "logistic_main_terms"]
    folds = 10
    seed = 1
    propensity_bounds = [0.025, 0.975]
    outcome_bounds = [0.005, 0.995]

    [diagnostics]
    positivity_threshold = 0.025

    [sensitivity]
    gap = [-0.01, 0.03]
    provenance = "..."
    negative_controls = ["NC"]

Design file::

    [[design]]
    name = "trial"
    kind = "rct"                       # rct | observational | hybrid
    n = 1000
    estimators = ["unadjusted", "tmle"]

    [[design]]
    name = "augmented"
    kind = "hybrid"
    n_rct = 250
    n_external = 250
    deltas = [0.0, 0.25, 0.5, 1.0]
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import RoadmapError
from .estimation import METHODS, PROPENSITY_BOUNDS
from .learners import KINDS, OUTCOME_BOUNDS, LearnerSpec, SuperLearnerSpec
from .sensitivity import GapBounds
from .simulation import DEFAULT_DELTAS, DesignSpec


class ConfigError(RoadmapError):
    step = "1a"


def file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def block_hash(block):
    return hashlib.sha256(json.dumps(block, sort_keys=True).encode()).hexdigest()


def _load_toml(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def library_from(names, bins=4):
    specs = []
    for name in names:
        if name not in KINDS:
            raise ConfigError(f"unknown learner {name!r}; choose from {', '.join(KINDS)}", step="5")
        specs.append(LearnerSpec(name, bins))
    return tuple(specs)


@dataclass(frozen=True)
class EstimatorConfig:
    method: str = "tmle"
    sl: SuperLearnerSpec = field(default_factory=SuperLearnerSpec)
    propensity_bounds: tuple = PROPENSITY_BOUNDS
    outcome_bounds: tuple = OUTCOME_BOUNDS

    def to_dict(self):
        return {"method": self.method, "super_learner": self.sl.to_dict(),
                "propensity_bounds": list(self.propensity_bounds),
                "outcome_bounds": list(self.outcome_bounds)}


@dataclass(frozen=True)
class StudyConfig:
    path: Path
    raw: dict
    population: str
    graph_path: Path
    contrast: str
    adjustment_choice: int
    outcome_description: str
    outcome_redefinition: str
    columns: dict
    attestations: dict
    estimator: EstimatorConfig
    positivity_threshold: float
    gap: GapBounds | None
    negative_controls: tuple
    negative_control_attestation: str

    @property
    def sensitivity_block(self):
        return self.raw.get("sensitivity", {})


def load_study_config(path, seed=None):
    """Read a study configuration; ``seed`` overrides ``[estimator].seed``."""
    path = Path(path)
    raw = _load_toml(path)
    study = raw.get("study")
    if not isinstance(study, dict):
        raise ConfigError(f"{path}: missing [study] table")
    for key in ("population", "graph"):
        if key not in study:
            raise ConfigError(f"{path}: [study] needs {key!r}")
    est = raw.get("estimator", {})
    method = est.get("method", "tmle")
    if method not in METHODS:
        raise ConfigError(f"{path}: unknown estimator method {method!r}", step="5")
    library = library_from(est.get("library", KINDS), est.get("histogram_bins", 4))
    sl = SuperLearnerSpec(library, est.get("folds"), int(seed if seed is not None else est.get("seed", 0)))
    estimator = EstimatorConfig(
        method, sl,
        tuple(est.get("propensity_bounds", PROPENSITY_BOUNDS)),
        tuple(est.get("outcome_bounds", OUTCOME_BOUNDS)),
    )
    sens = raw.get("sensitivity", {})
    gap = None
    if "gap" in sens:
        lo, hi = sens["gap"]
        gap = GapBounds(float(lo), float(hi), sens.get("provenance", ""))
    return StudyConfig(
        path=path,
        raw=raw,
        population=study["population"],
        graph_path=(path.parent / study["graph"]),
        contrast=study.get("contrast", "risk_difference"),
        adjustment_choice=int(study.get("adjustment_set", 0)),
        outcome_description=study.get("outcome_description", ""),
        outcome_redefinition=study.get("outcome_redefinition", ""),
        columns=dict(raw.get("columns", {})),
        attestations=dict(raw.get("attestations", {})),
        estimator=estimator,
        positivity_threshold=float(raw.get("diagnostics", {}).get("positivity_threshold", 0.025)),
        gap=gap,
        negative_controls=tuple(sens.get("negative_controls", ())),
        negative_control_attestation=sens.get("negative_control_attestation", ""),
    )


def load_designs(path):
    """Read a design file into a list of :class:`DesignSpec`."""
    raw = _load_toml(path)
    entries = raw.get("design")
    if not entries:
        raise ConfigError(f"{path}: no [[design]] entries", step="7")
    designs = []
    for i, e in enumerate(entries):
        name = e.get("name", f"design{i + 1}")
        try:
            sl = SuperLearnerSpec(library_from(e.get("library", KINDS), e.get("histogram_bins", 4)),
                                  e.get("folds"))
            designs.append(DesignSpec(
                name=name,
                kind=e.get("kind", ""),
                n=int(e.get("n", 0)),
                n_rct=int(e.get("n_rct", 0)),
                n_external=int(e.get("n_external", 0)),
                deltas=tuple(e.get("deltas", DEFAULT_DELTAS)),
                estimators=tuple(e.get("estimators", ("tmle",))),
                alpha=float(e.get("alpha", 0.05)),
                adjust=tuple(e["adjust"]) if "adjust" in e else None,
                contrast=e.get("contrast", "risk_difference"),
                sl=sl,
            ))
        except RoadmapError as exc:
            raise ConfigError(f"{path}: {exc.message}", step="7") from None
    return designs, raw.get("seed")
