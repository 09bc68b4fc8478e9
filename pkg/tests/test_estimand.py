import pytest

from roadmap_engine.errors import IdentificationError, NotIdentifiedError
from roadmap_engine.estimand import (CausalEstimand, StatisticalEstimand, check_identification,
                                     compile_statistical_estimand)
from roadmap_engine.graph import parse_graph

from test_graph import LATENT_GRAPH

CENSORED = """graph g { node W role=covariate; node A role=treatment; node C role=censoring;
node Y role=outcome; edge W -> A; edge W -> Y; edge A -> Y; edge A -> C; edge W -> C; }"""


def ce(contrast="risk_difference"):
    return CausalEstimand("adults", "Y", contrast)


def test_randomized_identified_with_empty_set():
    g = parse_graph("graph g { node A role=treatment; node Y role=outcome; edge A -> Y; }")
    ir = check_identification(g, ce())
    assert ir.identified and list(ir.adjustment_sets) == [frozenset()]


def test_latent_confounding_not_identified():
    ir = check_identification(parse_graph(LATENT_GRAPH), ce())
    assert ir.status == "not_identified"
    assert [str(w) for w in ir.witnesses] == ["A <- U -> Y"]
    assert ir.assumptions["positivity"]["verdict"] == "empirical - see diagnostics"


def test_censoring_condition():
    ir = check_identification(parse_graph(CENSORED), ce())
    assert ir.identified and list(ir.adjustment_sets) == [frozenset({"W"})]
    assert ir.assumptions["exchangeability_censoring"]["verdict"] == "satisfied"


def test_censoring_confounder_unmeasured():
    g = parse_graph("""graph g { node A role=treatment; node C role=censoring; node Y role=outcome;
      node U latent; edge A -> Y; edge A -> C; edge U -> C; edge U -> Y; }""")
    ir = check_identification(g, ce())
    assert not ir.identified
    assert ir.assumptions["exchangeability_censoring"]["verdict"] == "violated"


def test_compile_risk_difference_formula():
    ir = check_identification(parse_graph(CENSORED), ce())
    se = compile_statistical_estimand(ce(), ir)
    assert se.formula == "E_W(P[Y*|C=0,A=1,W] - P[Y*|C=0,A=0,W])"


def test_compile_risk_ratio_empty_set():
    g = parse_graph("graph g { node A role=treatment; node C role=censoring; node Y role=outcome;"
                    " edge A -> Y; edge A -> C; }")
    se = compile_statistical_estimand(ce("risk_ratio"), check_identification(g, ce("risk_ratio")))
    assert se.adjustment_set == ()
    assert se.formula == "P[Y*|C=0,A=1] / P[Y*|C=0,A=0]"


def test_compile_not_identified_carries_path():
    ir = check_identification(parse_graph(LATENT_GRAPH), ce())
    with pytest.raises(NotIdentifiedError) as err:
        compile_statistical_estimand(ce(), ir)
    assert "A <- U -> Y" in str(err.value)
    assert err.value.witnesses


def test_compile_bad_choice():
    ir = check_identification(parse_graph(CENSORED), ce())
    with pytest.raises(IdentificationError):
        compile_statistical_estimand(ce(), ir, choice=3)


def test_causal_formula_mentions_both_strategies():
    f = ce().formula("A", "C")
    assert "a=1" in f and "a=0" in f


def test_statistical_estimand_no_censoring():
    se = StatisticalEstimand(("W",), "A", "Y")
    assert se.formula == "E_W(P[Y|A=1,W] - P[Y|A=0,W])"
