from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharpbounds.graph import canonicalize, parse_graph
from sharpbounds.strata import (
    build_functional_model,
    format_strata,
    reduce_deterministic,
    response_function_count,
)

from .conftest import NESTED_LATENT_TEXT, SIX_NODE_TEXT, PROXY_TEXT, IV_TEXT


def _model(text):
    g = canonicalize(parse_graph(text))
    return g, build_functional_model(g)


def test_iv_strata_names():
    g, m = _model(IV_TEXT)
    assert m.disturbances == ("U", "U_Z")
    assert m.domain_size("U") == 16
    assert m.domain_size("U_Z") == 2
    names = m.stratum_names("U")
    # first input slowest: x_01 means X(Z=0)=0, X(Z=1)=1 (complier)
    assert names[:3] == ["x_00,y_00", "x_00,y_01", "x_00,y_10"]
    i = m.stratum_index("U", "x_01,y_10")
    assert m.response("U", i, "X")(0) == 0
    assert m.response("U", i, "X")(1) == 1
    assert m.response("U", i, "Y")(0) == 1
    assert m.response("U", i, "Y")(1) == 0
    with pytest.raises(KeyError):
        m.stratum_index("U", "x_22")


def test_nested_latent_sizes():
    _, m = _model(NESTED_LATENT_TEXT)
    assert {u: m.domain_size(u) for u in m.disturbances} == {"U1": 2, "U23": 64}


def test_six_node_sizes():
    g, m = _model(SIX_NODE_TEXT)
    assert {u: m.domain_size(u) for u in m.disturbances} == {"U2": 128, "U3": 1024, "U1": 4}
    assert m.n_params == 128 + 1024 + 4


def test_single_node_gets_synthesised_disturbance():
    _, m = _model("card: A=2")
    assert m.disturbances == ("U_A",)
    assert m.stratum_names("U_A") == ["a_0", "a_1"]


def test_proxy_reduction():
    g, m = _model(PROXY_TEXT)
    assert m.domain_size("U_Astar") == 3**8
    r = reduce_deterministic(m, g)
    assert r.domain_size("U_Astar") == 2**4
    assert r.unreduced_sizes["U_Astar"] == 3**8
    assert r.reduced


def test_classic_missingness_proxy_has_one_response():
    g, m = _model("Y -> Ys; R -> Ys\ncard: Y=2, R=2, Ys=2\ndeterministic: Ys = Y if R=1 else NA")
    r = reduce_deterministic(m, g)
    assert r.domain_size("U_Ys") == 1
    # the single remaining table: NA when R=0, else Y (rows ordered Y slowest)
    forced = [2 if rr == 0 else y for y, rr in itertools.product(range(2), range(2))]
    assert list(r.domains["U_Ys"][0, r.columns["Ys"]]) == forced


def test_reduction_matches_brute_force_filter():
    g, m = _model(PROXY_TEXT)
    r = reduce_deterministic(m, g)
    na = g.na_value("Astar")
    kept = []
    for row in m.domains["U_Astar"][:, m.columns["Astar"]]:
        ok = True
        for (a, ra, b), out in zip(itertools.product(range(2), repeat=3), row):
            if ra == 0 and out != na or ra == 1 and out == na:
                ok = False
        if ok:
            kept.append(tuple(row))
    got = {tuple(row) for row in r.domains["U_Astar"][:, r.columns["Astar"]]}
    assert got == set(kept)


def test_no_relations_is_identity():
    g, m = _model(IV_TEXT)
    r = reduce_deterministic(m, g)
    assert {u: r.domain_size(u) for u in r.disturbances} == {u: m.domain_size(u) for u in m.disturbances}


def test_domains_are_lexicographic():
    _, m = _model(IV_TEXT)
    d = m.domains["U"]
    rows = [tuple(r) for r in d]
    assert rows == sorted(rows)
    assert len(set(rows)) == len(rows)


def test_format_strata_lists_every_parameter():
    _, m = _model(IV_TEXT)
    text = format_strata(m)
    for name in m.stratum_names("U"):
        assert name in text


@st.composite
def small_graphs(draw):
    n = draw(st.integers(1, 4))
    names = [f"V{i}" for i in range(n)]
    cards = {v: draw(st.integers(2, 3)) for v in names}
    edges = [(a, b) for j, b in enumerate(names) for a in names[:j] if draw(st.booleans())]
    lat = []
    for k in range(draw(st.integers(0, 2))):
        kids = draw(st.lists(st.sampled_from(names), min_size=1, max_size=n, unique=True))
        lat.append((f"L{k}", kids))
    lines = [f"{a} -> {b}" for a, b in edges]
    lines += [f"{u} -> {c}" for u, kids in lat for c in kids]
    if lat:
        lines.append("latent: " + ", ".join(u for u, _ in lat))
    lines.append("card: " + ", ".join(f"{v}={k}" for v, k in cards.items()))
    return parse_graph("\n".join(lines))


@settings(max_examples=40, deadline=None)
@given(small_graphs())
def test_domain_size_is_product_of_response_counts(g):
    c = canonicalize(g)
    try:
        m = build_functional_model(c)
    except ValueError as exc:
        if "too large" not in str(exc):
            raise
        return
    for u in m.disturbances:
        expected = int(np.prod([response_function_count(c, v, m) for v in m.assignments[u]], dtype=object))
        assert m.domain_size(u) == expected
    # every main variable is governed by exactly one disturbance
    gov = [v for u in m.disturbances for v in m.assignments[u]]
    assert sorted(gov) == sorted(c.main_names)
