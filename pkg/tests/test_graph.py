from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharpbounds.graph import GraphError, canonicalize, districts, format_graph, parse_graph

from .conftest import NESTED_LATENT_TEXT, SIX_NODE_TEXT, IV_TEXT


def test_parse_iv():
    g = parse_graph(IV_TEXT)
    assert g.main_names == ("Z", "X", "Y")
    assert g.disturbances == ("U",)
    assert g.parents("Y") == ["X", "U"]
    assert g.main_parents("X") == ["Z"]
    assert g.latent_parents("X") == ["U"]
    assert g.card("Z") == 2


def test_semicolons_comments_and_chains():
    g = parse_graph("A -> B -> C; U -> A  # confounder\nlatent U\ncard A=3, B=2, C=2")
    assert ("A", "B") in g.edges and ("B", "C") in g.edges
    assert g.card("A") == 3


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("A -> B\ncard: A=2", "undeclared"),
        ("A -> A\ncard: A=2", "self loop"),
        ("A -> B; B -> A\ncard: A=2, B=2", "cycle"),
        ("card: A=1", ">= 2"),
        ("A => B\ncard: A=2, B=2", "cannot parse"),
        ("latent: U\ncard: U=2", "both latent"),
        ("card: A=2, B=2\ndeterministic: B = A if C=1 else NA", "undeclared"),
        ("A -> B\ncard: A=2, B=2\ndeterministic: B = A if A=1 else NA", None),
    ],
)
def test_parse_errors(text, fragment):
    if fragment is None:
        parse_graph(text)
        return
    with pytest.raises(GraphError, match=fragment):
        parse_graph(text)


def test_deterministic_adds_na_level():
    g = parse_graph("Y -> Ys; R -> Ys\ncard: Y=2, R=2, Ys=2\ndeterministic: Ys = Y if R=1 else NA")
    assert g.card("Ys") == 3
    assert g.na_value("Ys") == 2
    assert g.na_value("Y") is None


def test_canonicalize_nested_latents():
    g = canonicalize(parse_graph(NESTED_LATENT_TEXT))
    assert g.disturbances == ("U1", "U23")
    assert g.children("U23") == ["V2", "V3"]
    # the path V1 -> W13 -> V3 through a hidden node becomes a direct edge
    assert ("V1", "V3") in g.edges
    assert g.canonical


def test_canonicalize_drops_childless_and_keeps_earlier_duplicate():
    g = canonicalize(parse_graph("U1 -> A; U2 -> A; U3 -> A; U3 -> B\ncard: A=2, B=2\nlatent: U1, U2, U3, U4"))
    assert g.disturbances == ("U3",)
    g = canonicalize(parse_graph("U1 -> A; U1 -> B; U2 -> A; U2 -> B\ncard: A=2, B=2\nlatent: U1, U2"))
    assert g.disturbances == ("U1",)


def test_districts():
    g = canonicalize(parse_graph(SIX_NODE_TEXT))
    ds = {d.members: d.latents for d in districts(g)}
    assert ds[frozenset("ACE")] == frozenset({"U2"})
    assert ds[frozenset("BDF")] == frozenset({"U1", "U3"})
    with pytest.raises(GraphError):
        districts(parse_graph(SIX_NODE_TEXT))


def test_format_round_trip():
    for text in (IV_TEXT, SIX_NODE_TEXT, "Y -> Ys; R -> Ys\ncard: Y=2, R=2, Ys=2\ndeterministic: Ys = Y if R=1 else NA"):
        g = parse_graph(text)
        assert parse_graph(format_graph(g)) == g


@st.composite
def random_graphs(draw):
    n_main = draw(st.integers(2, 5))
    n_hidden = draw(st.integers(0, 4))
    mains = [f"V{i}" for i in range(n_main)]
    hidden = [f"H{i}" for i in range(n_hidden)]
    nodes = hidden + mains  # topological order: hidden first, then mains in order
    edges = set()
    for j, b in enumerate(nodes):
        for a in nodes[:j]:
            if draw(st.booleans()):
                edges.add((a, b))
    lines = [f"{a} -> {b}" for a, b in sorted(edges)]
    if hidden:
        lines.append("latent: " + ", ".join(hidden))
    lines.append("card: " + ", ".join(f"{v}=2" for v in mains))
    return parse_graph("\n".join(lines))


def _main_reach(g, a):
    """Main nodes reachable from ``a`` through hidden interiors only."""
    out, stack, seen = set(), [a], {a}
    while stack:
        for c in g.children(stack.pop()):
            if g.is_main(c):
                out.add(c)
            elif c not in seen:
                seen.add(c)
                stack.append(c)
    return out


@settings(max_examples=60, deadline=None)
@given(random_graphs())
def test_canonicalize_properties(g):
    c = canonicalize(g)
    # idempotent
    assert canonicalize(c) == c
    # disturbances are exogenous with incomparable child sets
    kids = {u: frozenset(c.children(u)) for u in c.disturbances}
    for u in c.disturbances:
        assert not c.parents(u)
        assert kids[u]
        for w in c.disturbances:
            if w != u:
                assert not kids[u] <= kids[w]
    # main-to-main dependence through hidden paths is preserved as direct edges
    for a in g.main_names:
        assert _main_reach(g, a) <= set(c.children(a))
    # every hidden confounding pair survives
    for h in g.hidden:
        ch = _main_reach(g, h)
        assert any(ch <= kids[u] for u in c.disturbances) or len(ch) <= 1
