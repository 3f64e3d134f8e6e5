from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest

from sharpbounds.graph import canonicalize, parse_graph
from sharpbounds.harness import load_scenario, population_evidence
from sharpbounds.oracles import simplex_bounds
from sharpbounds.program import (
    EvidenceError,
    build_program,
    classify,
    load_evidence,
    program_degree,
    simplify,
)
from sharpbounds.query import CounterfactualEvent, QueryError, polynomialize
from sharpbounds.solver import solve
from sharpbounds.strata import build_functional_model

from .conftest import SIX_NODE_TEXT


def test_counts_become_exact_probabilities():
    ev = load_evidence('{"X=0": 3, "X=1": 1}')
    t = ev.tables[0]
    assert t.counts == (3, 1) and t.n == 4
    assert t.probs == (Fraction(3, 4), Fraction(1, 4))


def test_probabilities_are_exact_decimals():
    ev = load_evidence('{"X=0, Y=NA": 0.1, "X=1, Y=NA": 0.9}')
    t = ev.tables[0]
    assert t.probs == (Fraction(1, 10), Fraction(9, 10))
    assert t.cells[0] == (("X", 0), ("Y", "NA"))
    assert t.counts is None


def test_given_and_statements():
    ev = load_evidence('[{"X=0": 0.25, "X=1": 0.75, "given": "S=1"}, {"statements": ["P(S=0) = 0.4"]}]')
    assert ev.tables[0].given == (("S", 1),)
    assert ev.statements == ("P(S=0) = 0.4",)


@pytest.mark.parametrize(
    "text, fragment",
    [
        ('{"X=0": 0.5, "X=1": 0.6}', "sum to"),
        ('{"X=0": -1, "X=1": 3}', "negative"),
        ('{"X=0": 2, "X=1": 3, "n": 6}', "n = 6"),
        ('{"X=0": 1.5, "X=1": -0.5}', "outside"),
        ('{"X0": 0.5}', "bad cell"),
        ("[1, 2]", "JSON object"),
        ("{not json", "invalid JSON"),
    ],
)
def test_evidence_errors(text, fragment):
    with pytest.raises(EvidenceError, match=fragment):
        load_evidence(text)


@pytest.fixture(scope="module")
def iv_exclusion():
    sc = load_scenario("iv_exclusion")
    return sc, population_evidence(sc.dgp)


def test_iv_factorized_program_is_linear(iv_exclusion):
    sc, ev = iv_exclusion
    p = build_program(sc.graph, ev, sc.assumptions, "ATE(X,Y)")
    assert p.meta["factorized_tables"] == (0,)
    assert classify(p) == "linear"
    naive = build_program(sc.graph, ev, sc.assumptions, "ATE(X,Y)", factorize=False)
    assert classify(naive) == "polynomial"
    assert program_degree(naive) == 2
    # the two formulations are equivalent on the model
    a = solve(simplify(p)).bounds
    b = solve(simplify(naive)).bounds
    assert a == pytest.approx(b, abs=1e-6)


def test_simplify_keeps_bounds_and_drops_parameters(iv_exclusion):
    sc, ev = iv_exclusion
    p = build_program(sc.graph, ev, sc.assumptions, "ATE(X,Y)")
    s = simplify(p)
    assert s.n_vars < p.n_vars
    lo_p, hi_p = simplex_bounds(p)
    lo_s, hi_s = simplex_bounds(s)
    assert (lo_p, hi_p) == (lo_s, hi_s)


def test_conditional_target_gets_auxiliary_variable(iv_exclusion):
    sc, ev = iv_exclusion
    p = build_program(sc.graph, ev, [], "P(Y=1|X=1)")
    assert len(p.aux_vars) == 1
    assert p.var_boxes[p.aux_vars[0]] == (0, 1)
    with pytest.raises(QueryError, match="range"):
        build_program(sc.graph, ev, [], "P(Y=1)/P(X(Z=1)=1) - P(Y=0)")
    p = build_program(sc.graph, ev, [], "P(Y=1)/P(X(Z=1)=1) - P(Y=0)", estimand_range=(-1.0, 5.0))
    assert p.var_boxes[p.aux_vars[0]] == (-1, 5)


def test_identified_conditional_is_a_point(iv_exclusion):
    sc, ev = iv_exclusion
    r = solve(simplify(build_program(sc.graph, ev, [], "P(Y=1|X=1)")))
    t = ev.tables[0]
    num = sum(float(p) for c, p in zip(t.cells, t.probs) if dict(c)["X"] == 1 and dict(c)["Y"] == 1)
    den = sum(float(p) for c, p in zip(t.cells, t.probs) if dict(c)["X"] == 1)
    assert r.status == "point-identified"
    assert r.bounds[0] == pytest.approx(num / den, abs=1e-6)
    assert r.bounds[1] == pytest.approx(num / den, abs=1e-6)


def test_evidence_on_unknown_variable_is_rejected(iv_exclusion):
    sc, _ = iv_exclusion
    with pytest.raises((EvidenceError, QueryError)):
        build_program(sc.graph, load_evidence('{"W=0": 0.5, "W=1": 0.5}'), [], "ATE(X,Y)")


def _six_node_evidence(seed=0):
    g = parse_graph(SIX_NODE_TEXT)
    m = build_functional_model(canonicalize(g))
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.dirichlet(np.ones(m.domain_size(u))) for u in m.disturbances])
    names = list(g.main_names)
    cells = {}
    for k in range(64):
        vals = [(k >> (5 - i)) & 1 for i in range(6)]
        ev = [CounterfactualEvent.make(v, {}, b) for v, b in zip(names, vals)]
        cells[",".join(f"{v}={b}" for v, b in zip(names, vals))] = polynomialize(ev, m).evaluate(x)
    tot = sum(cells.values())
    return g, load_evidence(json.dumps({k: v / tot for k, v in cells.items()}))


def test_six_node_naive_and_simplified():
    g, ev = _six_node_evidence()
    naive = build_program(g, ev, [], "ATE(E,C)", factorize=False)
    assert naive.n_vars == 1156
    assert len(naive.constraints) == 64
    assert program_degree(naive) == 3
    assert classify(naive) == "polynomial"
    s = simplify(build_program(g, ev, [], "ATE(E,C)"))
    assert s.n_vars == 128
    assert classify(s) == "linear"
    assert {n.split("[")[0] for n in s.var_names} == {"U2"}
