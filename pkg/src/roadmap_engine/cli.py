"""``roadmap-engine`` command line.

Each subcommand writes one JSON artifact into the ``--out`` directory and a
short summary to standard output.  Later steps read the artifacts of earlier
ones, which is how the Roadmap ordering (and pre-specification of the
sensitivity analysis) is enforced.

Exit status: 0 success, 1 domain error (e.g. effect not identified, missing
earlier step), 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, block_hash, file_hash, load_designs, load_study_config
from .data import Schema, load_dataset, missingness_summary, positivity_diagnostics
from .errors import DGPError, GraphError, RoadmapError, WorkflowError
from .estimand import CausalEstimand, check_identification, compile_statistical_estimand
from .estimation import EstimateResult, estimate
from .graph import parse_graph
from .sensitivity import negative_control_check, sensitivity_report
from .simulation import SimulationReport, evaluate, parse_dgp

PROG = "roadmap-engine"
SCHEMA_VERSION = 1

ARTIFACTS = {
    "validate-dag": ("graph.json", "1b"),
    "identify": ("identify.json", "3"),
    "diagnose": ("diagnose.json", "2"),
    "estimate": ("estimate.json", "5"),
    "sensitivity": ("sensitivity.json", "6"),
    "simulate": ("simulate.json", "5"),
    "compare-designs": ("compare_designs.json", "7"),
}

STEP_TITLES = {
    "1": "Specify the causal question and causal model",
    "2": "Describe the observed data",
    "3": "Assess identifiability",
    "4": "Define the statistical estimand",
    "5": "Specify the statistical model, estimator and confidence intervals",
    "6": "Specify the sensitivity analyses",
    "7": "Compare complete analytic study designs",
}

log = logging.getLogger(__name__)


class UsageError(RoadmapError):
    step = "-"


# -- artifact I/O ----------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (tuple, set, frozenset)):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def dumps(doc):
    return json.dumps(doc, indent=2, default=_jsonable, allow_nan=True) + "\n"


def _metadata(**extra):
    now = time.time()
    meta = {
        "created": _dt.datetime.fromtimestamp(now, _dt.timezone.utc).isoformat(),
        "created_unix": now,
    }
    meta.update(extra)
    return meta


def write_artifact(out_dir, command, body, **meta):
    fname, step = ARTIFACTS[command]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": PROG, "version": __version__},
        "command": command,
        "step": step,
        "body": body,
        "metadata": _metadata(**meta),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / fname).write_text(dumps(doc), encoding="utf-8")
    return doc


def read_artifact(out_dir, command, needed_by):
    fname, step = ARTIFACTS[command]
    path = out_dir / fname
    if not path.exists():
        raise WorkflowError(f"Step {step} missing: run '{command}' first ({fname} not in {out_dir})",
                            step=needed_by)
    return json.loads(path.read_text(encoding="utf-8"))


def _require_out(args):
    if not args.out:
        raise UsageError("--out DIRECTORY is required")
    return Path(args.out)


def _require(args, *flags):
    for flag in flags:
        if getattr(args, flag.replace("-", "_")) is None:
            raise UsageError(f"--{flag} is required for '{args.command}'")


def _read_text(path, what):
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise UsageError(f"{what} file not found: {path}") from None


# -- commands --------------------------------------------------------------------

def cmd_validate_dag(args):
    _require(args, "graph")
    g = parse_graph(_read_text(args.graph, "graph"))
    print(f"graph {g.name}: {len(g.nodes)} nodes, {len(g.edges)} edges, acyclic")
    for role in ("treatment", "outcome", "censoring"):
        print(f"  {role}: {g.role_node(role) or '-'}")
    latent = [n.id for n in g.nodes if n.latent]
    if latent:
        print(f"  latent: {', '.join(latent)}")
    if args.out:
        body = {"graph": g.to_dict(), "canonical": g.render(), "graph_sha256": file_hash(args.graph)}
        write_artifact(Path(args.out), "validate-dag", body)
    return 0


def _graph_and_estimand(cfg):
    g = parse_graph(_read_text(cfg.graph_path, "graph"))
    if g.outcome is None or g.treatment is None:
        raise GraphError("graph needs a treatment node and an outcome node")
    ce = CausalEstimand(cfg.population, g.outcome, cfg.contrast,
                        outcome_description=cfg.outcome_description)
    return g, ce


def cmd_identify(args):
    _require(args, "config")
    out = _require_out(args)
    cfg = load_study_config(args.config)
    g, ce = _graph_and_estimand(cfg)
    ir = check_identification(g, ce)
    stat = None
    if ir.identified:
        stat = compile_statistical_estimand(ce, ir, cfg.adjustment_choice)
    step_1a = ce.to_dict()
    step_1a["causal_formula"] = ce.formula(g.treatment, g.censoring or "C")
    step_1a["outcome_redefinition"] = cfg.outcome_redefinition or None
    step_1a["out_of_scope"] = ["subgroup (conditional) estimands",
                               "stochastic or dynamic treatment rules"]
    body = {
        "step_1a": step_1a,
        "step_1b": {"graph": g.to_dict(), "canonical": g.render(),
                    "graph_file": cfg.graph_path.name, "graph_sha256": file_hash(cfg.graph_path)},
        "step_3": ir.to_dict(),
        "step_4": None if stat is None else {**stat.to_dict(), "choice": cfg.adjustment_choice},
        "study_sha256": block_hash({"study": cfg.raw.get("study"), "columns": cfg.columns}),
    }
    write_artifact(out, "identify", body)
    if not ir.identified:
        paths = "; ".join(str(w) for w in ir.witnesses)
        print(f"[Step 3] not identified: open path {paths}", file=sys.stderr)
        return 1
    print(f"identified; adjustment sets: {[sorted(s) for s in ir.adjustment_sets]}")
    print(f"statistical estimand: {stat.formula}")
    print("positivity: " + ir.assumptions["positivity"]["verdict"])
    return 0


def _identified(out, cfg, needed_by):
    ident = read_artifact(out, "identify", needed_by)
    body = ident["body"]
    if body["step_4"] is None:
        raise WorkflowError("Step 3: effect not identified; no statistical estimand to use", step=needed_by)
    if body["step_1b"]["graph_sha256"] != file_hash(cfg.graph_path):
        raise WorkflowError("Step 3 stale: graph changed since 'identify'; re-run it", step=needed_by)
    from .estimand import StatisticalEstimand
    s4 = body["step_4"]
    stat = StatisticalEstimand(tuple(s4["adjustment_set"]), s4["treatment"], s4["outcome"],
                               s4["contrast"], s4["censoring"])
    return body, stat


def _schema(cfg, stat):
    cols = cfg.columns
    return Schema(
        treatment=cols.get("treatment", stat.treatment),
        outcome=cols.get("outcome", stat.outcome),
        censoring=cols.get("censoring", stat.censoring),
        covariates=tuple(cols["covariates"]) if "covariates" in cols else None,
        source=cols.get("source"),
    )


def _column_estimand(stat, schema):
    """Statistical estimand re-keyed to data column names."""
    from dataclasses import replace
    return replace(stat, treatment=schema.treatment, outcome=schema.outcome,
                   censoring=schema.censoring)


def cmd_diagnose(args):
    _require(args, "config", "data")
    out = _require_out(args)
    cfg = load_study_config(args.config)
    _, stat = _identified(out, cfg, "2")
    d = load_dataset(args.data, _schema(cfg, stat))
    miss = missingness_summary(d)
    pos = positivity_diagnostics(d, stat.adjustment_set, cfg.positivity_threshold)
    body = {
        "step_2": {
            "data_file": Path(args.data).name,
            "data_sha256": file_hash(args.data),
            "n": d.n,
            "columns": {"treatment": d.treatment, "outcome": d.outcome, "censoring": d.censoring,
                        "covariates": list(d.covariates), "source": d.source},
            "missingness": miss,
            "attestations": cfg.attestations,
        },
        "step_3_positivity": pos.to_dict(),
    }
    write_artifact(out, "diagnose", body)
    print(f"n = {d.n}; outcome missing fraction {miss['missing_fraction'][d.outcome]:.3f}; "
          f"uncensored rows missing outcome: {miss['uncensored_missing_outcome']['count']}")
    print(f"propensity range [{pos.propensity_min:.3f}, {pos.propensity_max:.3f}]; "
          f"flagged strata: {len(pos.flagged_strata)}")
    return 0


def cmd_estimate(args):
    _require(args, "config", "data")
    out = _require_out(args)
    cfg = load_study_config(args.config, seed=args.seed)
    _, stat = _identified(out, cfg, "5")
    schema = _schema(cfg, stat)
    d = load_dataset(args.data, schema)
    est = cfg.estimator
    er = estimate(d, _column_estimand(stat, schema), est.method, est.sl,
                  propensity_bounds=est.propensity_bounds, outcome_bounds=est.outcome_bounds)
    body = {
        "estimator_config": est.to_dict(),
        "data_sha256": file_hash(args.data),
        "result": er.to_dict(),
        "sensitivity_block_sha256": block_hash(cfg.sensitivity_block),
    }
    write_artifact(out, "estimate", body)
    lo, hi = er.ci95
    print(f"{er.estimator} {er.contrast}: {er.point:.4f} (95% CI {lo:.4f}, {hi:.4f}); "
          f"arm risks {er.arm_risks[0]:.4f} vs {er.arm_risks[1]:.4f}")
    return 0


def cmd_sensitivity(args):
    _require(args, "config")
    out = _require_out(args)
    cfg = load_study_config(args.config, seed=args.seed)
    est_doc = read_artifact(out, "estimate", "6")
    est_time = est_doc["metadata"]["created_unix"]
    cfg_mtime = os.stat(cfg.path).st_mtime
    if cfg_mtime > est_time:
        raise WorkflowError("sensitivity configuration is newer than the estimate it attaches to; "
                            "the analysis must be specified before estimation", step="6")
    if block_hash(cfg.sensitivity_block) != est_doc["body"]["sensitivity_block_sha256"]:
        raise WorkflowError("sensitivity block differs from the one recorded at estimation", step="6")
    if cfg.gap is None and not cfg.negative_controls:
        raise WorkflowError("no sensitivity analysis specified ([sensitivity] gap or negative_controls)",
                            step="6")
    er = EstimateResult.from_dict(est_doc["body"]["result"])
    nc = []
    if cfg.negative_controls:
        _require(args, "data")
        _, stat = _identified(out, cfg, "6")
        schema = _schema(cfg, stat)
        d = load_dataset(args.data, schema)
        e = cfg.estimator
        nc = negative_control_check(d, _column_estimand(stat, schema), cfg.negative_controls,
                                    e.method, e.sl, propensity_bounds=e.propensity_bounds,
                                    outcome_bounds=e.outcome_bounds)
    rep = sensitivity_report(er, cfg.gap, nc)
    body = rep.to_dict()
    body["negative_control_attestation"] = cfg.negative_control_attestation or None
    body["gap_scale_note"] = "gap shifting is defined on the risk-difference scale only"
    write_artifact(out, "sensitivity", body,
                   sensitivity_config_mtime=cfg_mtime, estimate_created_unix=est_time)
    print(rep.verdict)
    return 0


def _simulation_inputs(args):
    _require(args, "dgp-null", "dgp-alt", "designs")
    null = parse_dgp(_read_text(args.dgp_null, "null DGP"))
    alt = parse_dgp(_read_text(args.dgp_alt, "alternative DGP"))
    designs, file_seed = load_designs(args.designs)
    seed = args.seed if args.seed is not None else int(file_seed or 0)
    reps = args.reps if args.reps is not None else 1000
    hashes = {"dgp_null": file_hash(args.dgp_null), "dgp_alt": file_hash(args.dgp_alt),
              "designs": file_hash(args.designs)}
    return null, alt, designs, seed, reps, hashes


def _run_evaluation(args, out):
    null, alt, designs, seed, reps, hashes = _simulation_inputs(args)
    prior = out / ARTIFACTS["simulate"][0]
    if args.command == "compare-designs" and prior.exists():
        doc = json.loads(prior.read_text(encoding="utf-8"))["body"]
        if doc["input_sha256"] == hashes and doc["master_seed"] == seed and doc["replications"] == reps:
            return doc, hashes, seed, reps, null, alt
    rep = evaluate(null, alt, designs, reps, seed, n_jobs=args.jobs)
    body = rep.to_dict()
    body["input_sha256"] = hashes
    body["dgp_null"] = null.render()
    body["dgp_alt"] = alt.render()
    body["markdown"] = rep.to_markdown()
    return body, hashes, seed, reps, null, alt


def cmd_simulate(args):
    out = _require_out(args)
    body, *_ = _run_evaluation(args, out)
    write_artifact(out, "simulate", body)
    (out / "simulate.md").write_text(body["markdown"], encoding="utf-8")
    print(body["markdown"], end="")
    return 0


def cmd_compare_designs(args):
    out = _require_out(args)
    sim, hashes, seed, reps, null, alt = _run_evaluation(args, out)
    rows = []
    for s in sim["design_summaries"]:
        cells = [c for c in sim["cells"] if c["design"] == s["design"] and c["estimator"] == s["estimator"]]
        at_zero = min(cells, key=lambda c: abs(c["delta"]))
        rows.append({
            "design": s["design"],
            "estimator": s["estimator"],
            "power": s["power_at_no_bias"],
            "coverage": at_zero["alt"].get("coverage"),
            "type1": at_zero["type1"],
            "worst_case_type1": s["worst_case_type1"],
            "worst_case_type1_mcse": s["worst_case_type1_mcse"],
            "worst_case_delta": s["worst_case_delta"],
            "type1_nondecreasing": s["type1_nondecreasing"],
            "mean_total_sample_size": s["mean_total_sample_size"],
            "valid": all(c["valid"] for c in cells),
        })
    kinds = {d["kind"] for d in sim["designs"]}
    body = {
        "simulation": sim,
        "comparison": rows,
        "includes_rct": "rct" in kinds,
        "notes": [] if "rct" in kinds else ["no randomized design included in the comparison"],
    }
    md = ["| design | estimator | power | coverage | type I | worst-case type I | total n |",
          "|---|---|---|---|---|---|---|"]
    for r in rows:
        md.append(f"| {r['design']} | {r['estimator']} | {_fmt(r['power'])} | {_fmt(r['coverage'])} | "
                  f"{_fmt(r['type1'])} | {_fmt(r['worst_case_type1'])} | {r['mean_total_sample_size']} |")
    body["markdown"] = "\n".join(md) + "\n"
    write_artifact(out, "compare-designs", body)
    (out / "compare_designs.md").write_text(body["markdown"], encoding="utf-8")
    print(body["markdown"], end="")
    return 0


def _fmt(x):
    return "-" if x is None else f"{x:.3f}"


# -- report ----------------------------------------------------------------------

REPORT_ORDER = ("1", "2", "3", "4", "5", "6", "7")


def build_report(out):
    docs = {cmd: read_artifact(out, cmd, "report")
            for cmd in ("identify", "diagnose", "estimate", "sensitivity", "simulate", "compare-designs")}
    ident = docs["identify"]["body"]
    diag = docs["diagnose"]["body"]
    est = docs["estimate"]["body"]
    sens = docs["sensitivity"]["body"]
    sim = docs["simulate"]["body"]
    cmp_ = docs["compare-designs"]["body"]
    sections = [
        {"step": "1", "title": STEP_TITLES["1"],
         "1a": ident["step_1a"], "1b": ident["step_1b"]},
        {"step": "2", "title": STEP_TITLES["2"], **diag["step_2"]},
        {"step": "3", "title": STEP_TITLES["3"], "identification": ident["step_3"],
         "positivity": diag["step_3_positivity"]},
        {"step": "4", "title": STEP_TITLES["4"], "statistical_estimand": ident["step_4"]},
        {"step": "5", "title": STEP_TITLES["5"], "estimator": est["estimator_config"],
         "estimate": est["result"],
         "estimator_comparison": {k: sim[k] for k in ("replications", "master_seed", "truth",
                                                      "cells", "design_summaries")}},
        {"step": "6", "title": STEP_TITLES["6"], **{k: v for k, v in sens.items()}},
        {"step": "7", "title": STEP_TITLES["7"], "comparison": cmp_["comparison"],
         "includes_rct": cmp_["includes_rct"], "notes": cmp_["notes"]},
    ]
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": PROG, "version": __version__},
        "master_seed": {"estimation": est["estimator_config"]["super_learner"]["seed"],
                        "simulation": sim["master_seed"]},
        "config_hashes": {
            "graph": ident["step_1b"]["graph_sha256"],
            "study": ident["study_sha256"],
            "data": est["data_sha256"],
            "sensitivity_block": est["sensitivity_block_sha256"],
            **{f"simulation_{k}": v for k, v in sim["input_sha256"].items()},
        },
        "sections": sections,
        "metadata": {
            **_metadata(),
            "artifact_created": {cmd: doc["metadata"]["created"] for cmd, doc in docs.items()},
            "sensitivity_config_mtime": docs["sensitivity"]["metadata"]["sensitivity_config_mtime"],
            "estimate_created_unix": docs["estimate"]["metadata"]["created_unix"],
        },
    }
    validate_report(report)
    return report


def validate_report(report):
    """Check the ordering and pre-specification invariants of a study report."""
    steps = tuple(s["step"] for s in report["sections"])
    if steps != REPORT_ORDER:
        raise WorkflowError(f"report sections out of Roadmap order: {steps}", step="report")
    by_step = {s["step"]: s for s in report["sections"]}
    if by_step["5"].get("estimate") is not None and not by_step["4"].get("statistical_estimand"):
        raise WorkflowError("estimate present without a chosen adjustment set", step="report")
    meta = report["metadata"]
    if meta["sensitivity_config_mtime"] > meta["estimate_created_unix"]:
        raise WorkflowError("sensitivity configuration postdates the estimate", step="report")


def _md_row(cells):
    return "| " + " | ".join(str(c).replace("|", "\\|") for c in cells) + " |"


def report_markdown(report):
    """One table row per Roadmap step, mirroring the study-design checklist."""
    s = {x["step"]: x for x in report["sections"]}
    q, g, est = s["1"]["1a"], s["1"]["1b"]["graph"], s["5"]["estimate"]
    rows = [
        ("1a", f"{q['contrast']} for {q['outcome']}; population: {q['population']}", q["causal_formula"]),
        ("1b", f"causal graph {g['name']}", f"{len(g['nodes'])} nodes, {len(g['edges'])} edges"),
        ("2", f"observed data, n = {s['2']['n']}",
         f"outcome missing fraction {s['2']['missingness']['missing_fraction'][s['2']['columns']['outcome']]:.3f}"),
        ("3", "exchangeability, positivity",
         f"{s['3']['identification']['status']}; propensity range "
         f"[{s['3']['positivity']['propensity_min']:.3f}, {s['3']['positivity']['propensity_max']:.3f}]"),
        ("4", "statistical estimand", s["4"]["statistical_estimand"]["formula"]),
        ("5", f"{est['estimator']} with super learner",
         f"{est['point']:.4f} (95% CI {est['ci95'][0]:.4f}, {est['ci95'][1]:.4f})"),
        ("6", "causal gap, E-value, negative controls", s["6"]["verdict"]),
        ("7", "outcome-blind design comparison",
         "; ".join(f"{r['design']}/{r['estimator']}: power {_fmt(r['power'])}, "
                   f"worst-case type I {_fmt(r['worst_case_type1'])}" for r in s["7"]["comparison"])),
    ]
    lines = ["| Roadmap step | Specification | Result |", "|---|---|---|"]
    lines += [_md_row(r) for r in rows]
    return "\n".join(lines) + "\n"


def cmd_report(args):
    out = _require_out(args)
    report = build_report(out)
    (out / "report.json").write_text(dumps(report), encoding="utf-8")
    md = report_markdown(report)
    (out / "report.md").write_text(md, encoding="utf-8")
    print(md, end="")
    return 0


# -- entry point -----------------------------------------------------------------

COMMANDS = {
    "validate-dag": cmd_validate_dag,
    "identify": cmd_identify,
    "diagnose": cmd_diagnose,
    "estimate": cmd_estimate,
    "sensitivity": cmd_sensitivity,
    "simulate": cmd_simulate,
    "compare-designs": cmd_compare_designs,
    "report": cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(prog=PROG, description="Causal Roadmap study workflow")
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--graph")
        p.add_argument("--config")
        p.add_argument("--data")
        p.add_argument("--dgp-null", dest="dgp_null")
        p.add_argument("--dgp-alt", dest="dgp_alt")
        p.add_argument("--designs")
        p.add_argument("--out", help="artifact directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--reps", type=int)
        p.add_argument("--jobs", type=int, default=1, help="parallel replications (simulation)")
    return parser


PARSE_ERRORS = (GraphError, DGPError, ConfigError, UsageError)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except PARSE_ERRORS as exc:
        print(f"{PROG} {args.command}: {exc}", file=sys.stderr)
        return 2
    except RoadmapError as exc:
        print(f"{PROG} {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
