"""
How fragile is the estimate?
============================

Three views: shift the interval by a plausible causal gap, compute the
E-value, and re-run the estimator on a negative-control outcome.
"""

from roadmap_engine import GapBounds, StatisticalEstimand, SuperLearnerSpec, estimate
from roadmap_engine.sensitivity import negative_control_check, sensitivity_report
from roadmap_engine.simulation import DesignSpec, parse_dgp, simulate_dataset

dgp = parse_dgp("""
W ~ Bernoulli(0.5);
NC ~ Bernoulli(expit(-1 + 0.7*W));
A ~ Bernoulli(expit(-0.4 + 0.8*W));
Y ~ Bernoulli(expit(-1 + 1.0*A + 1.0*W));
""")
d = simulate_dataset(dgp, DesignSpec("registry", "observational", n=2000, adjust=("W",)), 0, 5)
se = StatisticalEstimand(("W",), "A", "Y")
er = estimate(d, se, "tmle", SuperLearnerSpec(seed=3))
print("estimate", round(er.point, 4), "CI", [round(x, 4) for x in er.ci95])

# The gap is what unmeasured confounding could add to the statistical estimand.
gap = GapBounds(-0.02, 0.05, "size of the access-to-care bias seen in a prior validation study")
nc = negative_control_check(d, se, ["NC"], "tmle", SuperLearnerSpec(seed=3))
rep = sensitivity_report(er, gap, nc)
print("gap-shifted CI", [round(x, 4) for x in rep.shifted_ci])
print("E-value", round(rep.e_value, 3), "for the CI limit", round(rep.e_value_ci, 3))
print(rep.verdict)
