"""
Estimating the adjusted risk difference
=======================================

Four estimators of the same statistical estimand, first on a tiny dataset
where the answer can be read off by hand, then on a simulated registry with
loss to follow-up.
"""

from roadmap_engine import (Dataset, LearnerSpec, StatisticalEstimand, SuperLearnerSpec, estimate,
                            positivity_diagnostics)
from roadmap_engine.simulation import DesignSpec, parse_dgp, simulate_dataset, true_estimand

# Eight rows.  Within W=0 the treated risk is 1/2 vs 0; within W=1 it is 1 vs 1/2.
# Averaging the two stratum differences over P(W) gives 0.5.
d = Dataset({"W": [0, 0, 0, 0, 1, 1, 1, 1],
             "A": [0, 0, 1, 1, 0, 0, 1, 1],
             "Y": [0, 0, 1, 0, 1, 0, 1, 1]}, "A", "Y", covariates=("W",))
se = StatisticalEstimand(("W",), "A", "Y")
saturated = SuperLearnerSpec((LearnerSpec("stratified_histogram"),), folds=2)
for method in ("unadjusted", "gcomp", "ipw", "tmle"):
    er = estimate(d, se, method, saturated, outcome_bounds=(0.0, 1.0))
    print(f"{method:>10}: {er.point:.3f}")

# %%
# A larger, confounded, censored dataset.  The outcome is missing for
# censored rows; the estimators reweight (ipw, tmle) or model (gcomp) that away.
dgp = parse_dgp("""
W ~ Bernoulli(0.4);
A ~ Bernoulli(expit(-0.5 + 1.2*W));
C ~ Bernoulli(expit(-2 + 0.5*A + 0.5*W));
Y ~ Bernoulli(expit(-1 + 0.7*A + 1.4*W));
""")
print("truth:", round(true_estimand(dgp, "risk_difference"), 4))
d = simulate_dataset(dgp, DesignSpec("registry", "observational", n=4000), 0, 2024)
print("uncensored rows:", int(d.observed().sum()), "of", d.n)

rep = positivity_diagnostics(d, ["W"])
for s in rep.strata:
    print("stratum", s["stratum"], "treated proportion", round(s["treated_proportion"], 3))

se = StatisticalEstimand(("W",), "A", "Y", "risk_difference", "C")
for method in ("unadjusted", "gcomp", "ipw", "tmle"):
    er = estimate(d, se, method, SuperLearnerSpec(seed=1))
    lo, hi = er.ci95
    print(f"{method:>10}: {er.point:.4f}  ({lo:.4f}, {hi:.4f})")

# the super learner's choice for the outcome regression
er = estimate(d, se, "tmle", SuperLearnerSpec(seed=1))
sel = er.diagnostics["nuisance"]["outcome"]
for label, risk in sel["cv_risk"].items():
    print(f"  {label:<40} CV risk {risk:.4f}")
print("selected:", sel["selected"])
