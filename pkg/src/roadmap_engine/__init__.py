"""Causal Roadmap workflow engine: causal graphs, identification, targeted
estimation, sensitivity analysis and outcome-blind design simulation."""

__version__ = "0.1.0"

from .errors import RoadmapError
from .graph import (CausalGraph, Node, PathWitness, d_separated, find_adjustment_sets,
                    parse_graph, render_graph)
from .estimand import (CausalEstimand, IdentificationResult, StatisticalEstimand,
                       TreatmentStrategy, check_identification, compile_statistical_estimand)
from .data import Dataset, Schema, load_dataset, missingness_summary, positivity_diagnostics
from .learners import LearnerSpec, SuperLearnerSpec, cv_select, fit_learner
from .estimation import EstimateResult, estimate
from .sensitivity import GapBounds, e_value, negative_control_check, sensitivity_report, shifted_interval
from .simulation import (DesignSpec, DGPSpec, SimulationReport, evaluate, parse_dgp,
                         simulate_dataset, true_estimand)

__all__ = [
    "RoadmapError", "CausalGraph", "Node", "PathWitness", "d_separated", "find_adjustment_sets",
    "parse_graph", "render_graph", "CausalEstimand", "IdentificationResult", "StatisticalEstimand",
    "TreatmentStrategy", "check_identification", "compile_statistical_estimand", "Dataset",
    "Schema", "load_dataset", "missingness_summary", "positivity_diagnostics", "LearnerSpec",
    "SuperLearnerSpec", "cv_select", "fit_learner", "EstimateResult", "estimate", "GapBounds",
    "e_value", "negative_control_check", "sensitivity_report", "shifted_interval", "DesignSpec",
    "DGPSpec", "SimulationReport", "evaluate", "parse_dgp", "simulate_dataset", "true_estimand",
]
