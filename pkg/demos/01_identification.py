"""
Causal graphs and identification
================================

Write a causal graph, ask whether the treatment effect is identified, and
see which covariates need adjusting for.
"""

from roadmap_engine import CausalEstimand, check_identification, compile_statistical_estimand, parse_graph
from roadmap_engine.graph import d_separated

# A baseline covariate W drives treatment, censoring and outcome.
g = parse_graph("""
graph study {
  node W role=covariate;
  node A role=treatment;
  node C role=censoring;
  node Y role=outcome;
  edge W -> A; edge W -> Y; edge W -> C; edge A -> C; edge A -> Y;
}
""")
print(g.render())

# d-separation answers "is this path blocked?" questions directly
print("C _||_ Y | {A, W}?", d_separated(g, "C", "Y", {"A", "W"}).separated)
res = d_separated(g, "A", "Y", {"W"})
print("A _||_ Y | {W}?", res.separated, "open path:", res.witnesses[0])

# The question: risk difference for Y under treat vs. don't treat, no censoring
question = CausalEstimand("adults eligible for drug D", "Y", "risk_difference")
print(question.formula("A", "C"))

ir = check_identification(g, question)
print(ir.status, [sorted(s) for s in ir.adjustment_sets])
print(compile_statistical_estimand(question, ir).formula)

# %%
# Add an unmeasured common cause of treatment and outcome.  No measured
# set blocks the backdoor path any more, and the result says which path.
confounded = parse_graph("""
graph confounded {
  node W role=covariate; node U latent;
  node A role=treatment; node Y role=outcome;
  edge W -> A; edge W -> Y; edge U -> A; edge U -> Y; edge A -> Y;
}
""")
ir = check_identification(confounded, question)
print(ir.status, "- open path:", ", ".join(str(w) for w in ir.witnesses))
