"""Generate the demo registry extract ``data.csv`` (2000 rows).

NC is a negative-control outcome: it depends on W but not on treatment.
"""

from pathlib import Path

from roadmap_engine.data import write_dataset
from roadmap_engine.simulation import DesignSpec, parse_dgp, simulate_dataset

HERE = Path(__file__).parent

DGP = """
W ~ Bernoulli(0.5);
NC ~ Bernoulli(expit(-1 + 0.7*W));
A ~ Bernoulli(expit(-0.4 + 0.8*W));
C ~ Bernoulli(expit(-2.5 + 0.5*A + 0.4*W));
Y ~ Bernoulli(expit(-1 + 1.0*A + 1.0*W));
"""


def main(path=HERE / "data.csv", n=2000, seed=11):
    dgp = parse_dgp(DGP)
    design = DesignSpec("registry", "observational", n=n)
    d = simulate_dataset(dgp, design, 0, seed)
    write_dataset(d, path)
    return path


if __name__ == "__main__":
    print(main())
