"""
The whole study from the command line
=====================================

Runs every ``roadmap-engine`` subcommand on the files in ``demos/study`` and
writes the artifacts to a temporary directory.  Equivalent shell session::

    roadmap-engine identify    --config study/study.toml --out out
    roadmap-engine diagnose    --config study/study.toml --data study/data.csv --out out
    roadmap-engine estimate    --config study/study.toml --data study/data.csv --out out
    roadmap-engine sensitivity --config study/study.toml --data study/data.csv --out out
    roadmap-engine simulate    --dgp-null study/null.dgp --dgp-alt study/alt.dgp \\
                               --designs study/designs.toml --reps 100 --out out
    roadmap-engine compare-designs  (same flags as simulate)
    roadmap-engine report --out out
"""

import tempfile
from pathlib import Path

from roadmap_engine.cli import main

study = Path(__file__).parent / "study"
out = Path(tempfile.mkdtemp(prefix="roadmap-"))
cfg, data = str(study / "study.toml"), str(study / "data.csv")
sim = ["--dgp-null", str(study / "null.dgp"), "--dgp-alt", str(study / "alt.dgp"),
       "--designs", str(study / "designs.toml"), "--reps", "100", "--out", str(out)]

steps = [
    ["identify", "--config", cfg, "--out", str(out)],
    ["diagnose", "--config", cfg, "--data", data, "--out", str(out)],
    ["estimate", "--config", cfg, "--data", data, "--out", str(out)],
    ["sensitivity", "--config", cfg, "--data", data, "--out", str(out)],
    ["simulate", *sim],
    ["compare-designs", *sim],
    ["report", "--out", str(out)],
]
for argv in steps:
    print(f"\n$ roadmap-engine {argv[0]}")
    code = main(argv)
    if code:
        raise SystemExit(code)

print("\nartifacts:", sorted(p.name for p in out.iterdir()))
