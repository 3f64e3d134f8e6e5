"""Causal graphs: parsing, canonicalization and districts."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterator

__all__ = [
    "GraphError",
    "DeterministicRelation",
    "CausalGraph",
    "District",
    "parse_graph",
    "canonicalize",
    "districts",
]

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_*]*")
_DET_RE = re.compile(
    r"^(?P<child>\S+)\s*=\s*(?P<src>\S+)\s+if\s+(?P<cond>[^\s=]+)\s*=\s*(?P<val>\d+)\s+else\s+NA$"
)


class GraphError(ValueError):
    """Raised for malformed graph descriptions."""


@dataclass(frozen=True)
class DeterministicRelation:
    """``child = source if condition=value else NA``.

    ``source`` is either the name of a parent whose value is copied, or ``"*"``
    meaning any non-NA value is allowed when the condition holds.
    """

    child: str
    source: str
    condition: str
    condition_value: int

    def __str__(self) -> str:
        return f"{self.child} = {self.source} if {self.condition}={self.condition_value} else NA"


@dataclass(frozen=True)
class CausalGraph:
    """A hidden-variable DAG over main variables and latent nodes.

    ``main_vars`` holds ``(name, cardinality)`` pairs.  For proxies declared in a
    deterministic relation the cardinality includes the appended ``NA`` level,
    which is always the last index.
    """

    main_vars: tuple[tuple[str, int], ...]
    disturbances: tuple[str, ...]
    ancillary_vars: tuple[str, ...] = ()
    edges: frozenset[tuple[str, str]] = frozenset()
    deterministic_relations: tuple[DeterministicRelation, ...] = ()
    canonical: bool = False
    _card: dict = field(default=None, init=False, repr=False, compare=False)  # type: ignore[assignment]
    _parents: dict = field(default=None, init=False, repr=False, compare=False)  # type: ignore[assignment]
    _children: dict = field(default=None, init=False, repr=False, compare=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        object.__setattr__(self, "_card", dict(self.main_vars))
        order = {n: i for i, n in enumerate(self.nodes)}
        pars: dict[str, list[str]] = {n: [] for n in order}
        kids: dict[str, list[str]] = {n: [] for n in order}
        for a, b in self.edges:
            if a in order and b in order:
                pars[b].append(a)
                kids[a].append(b)
        for d in (pars, kids):
            for v in d.values():
                v.sort(key=order.__getitem__)
        object.__setattr__(self, "_parents", pars)
        object.__setattr__(self, "_children", kids)

    # -- lookups -------------------------------------------------------
    @property
    def main_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.main_vars)

    @property
    def hidden(self) -> tuple[str, ...]:
        return self.disturbances + self.ancillary_vars

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.main_names + self.hidden

    def is_main(self, name: str) -> bool:
        return name in self._card

    def card(self, name: str) -> int:
        try:
            return self._card[name]
        except KeyError:
            raise GraphError(f"{name!r} is not a main variable") from None

    def na_value(self, name: str) -> int | None:
        """Index of the NA level for proxy variables, else None."""
        for rel in self.deterministic_relations:
            if rel.child == name:
                return self._card[name] - 1
        return None

    def parents(self, name: str) -> list[str]:
        return list(self._parents[name])

    def children(self, name: str) -> list[str]:
        return list(self._children[name])

    def main_parents(self, name: str) -> list[str]:
        return [p for p in self.parents(name) if self.is_main(p)]

    def latent_parents(self, name: str) -> list[str]:
        return [p for p in self.parents(name) if not self.is_main(p)]

    def ancestors(self, name: str) -> set[str]:
        """Proper ancestors of ``name``."""
        out: set[str] = set()
        stack = [name]
        while stack:
            for p in self.parents(stack.pop()):
                if p not in out:
                    out.add(p)
                    stack.append(p)
        return out

    def topological_order(self) -> list[str]:
        """All nodes in a topological order, ties broken by declaration order."""
        nodes = list(self.nodes)
        indeg = {n: 0 for n in nodes}
        for _, b in self.edges:
            indeg[b] += 1
        ready = [n for n in nodes if indeg[n] == 0]
        order: list[str] = []
        rank = {n: i for i, n in enumerate(nodes)}
        while ready:
            ready.sort(key=rank.__getitem__)
            n = ready.pop(0)
            order.append(n)
            for c in self.children(n):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(nodes):
            raise GraphError("cycle detected")
        return order

    def main_topological_order(self) -> list[str]:
        return [n for n in self.topological_order() if self.is_main(n)]


@dataclass(frozen=True)
class District:
    members: frozenset[str]
    latents: frozenset[str]


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _statements(text: str) -> Iterator[tuple[int, str]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        for piece in line.split(";"):
            piece = piece.strip()
            if piece:
                yield lineno, piece


def _names(text: str, lineno: int) -> list[str]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if not NAME_RE.fullmatch(item):
            raise GraphError(f"line {lineno}: invalid node name {item!r}")
        out.append(item)
    return out


def parse_graph(text: str) -> CausalGraph:
    """Parse the line-oriented graph format.

    Statements are separated by newlines or ``;``.  Each is an edge chain
    ``A -> B -> C`` (optionally after ``edges:``), or a declaration introduced
    by ``latent``, ``card`` or ``deterministic`` with an optional colon.
    """
    edge_list: list[tuple[str, str, int]] = []
    latent: list[str] = []
    cards: dict[str, int] = {}
    rules: list[tuple[int, str]] = []

    for lineno, stmt in _statements(text):
        key = None
        body = stmt
        m = re.match(r"^(edges|latent|card|deterministic)\b\s*:?\s*(.*)$", stmt)
        if m:
            key, body = m.group(1), m.group(2)
        if key == "latent":
            for n in _names(body, lineno):
                if n not in latent:
                    latent.append(n)
        elif key == "card":
            for item in body.split(","):
                item = item.strip()
                if not item:
                    continue
                mm = re.fullmatch(r"(\S+)\s*=\s*(-?\d+)", item)
                if not mm or not NAME_RE.fullmatch(mm.group(1)):
                    raise GraphError(f"line {lineno}: bad cardinality entry {item!r}")
                k = int(mm.group(2))
                if k < 2:
                    raise GraphError(f"line {lineno}: cardinality of {mm.group(1)} must be >= 2")
                cards[mm.group(1)] = k
        elif key == "deterministic":
            rules.append((lineno, body.strip()))
        else:
            if not body:
                continue
            parts = [p.strip() for p in body.split("->")]
            if len(parts) < 2 or any(not NAME_RE.fullmatch(p) for p in parts):
                raise GraphError(f"line {lineno}: cannot parse statement {stmt!r}")
            for a, b in zip(parts, parts[1:]):
                edge_list.append((a, b, lineno))

    for n in latent:
        if n in cards:
            raise GraphError(f"{n!r} declared both latent and with a cardinality")

    relations: list[DeterministicRelation] = []
    for lineno, body in rules:
        m = _DET_RE.match(body)
        if not m:
            raise GraphError(f"line {lineno}: cannot parse deterministic relation {body!r}")
        rel = DeterministicRelation(m["child"], m["src"], m["cond"], int(m["val"]))
        for n in (rel.child, rel.condition) + (() if rel.source == "*" else (rel.source,)):
            if n not in cards:
                raise GraphError(f"line {lineno}: deterministic relation references undeclared variable {n!r}")
        relations.append(rel)

    declared = set(cards) | set(latent)
    edges: set[tuple[str, str]] = set()
    for a, b, lineno in edge_list:
        for n in (a, b):
            if n not in declared:
                raise GraphError(f"line {lineno}: undeclared node {n!r}")
        if a == b:
            raise GraphError(f"line {lineno}: self loop on {a!r}")
        edges.add((a, b))

    main_vars = []
    for name, k in cards.items():
        if any(r.child == name for r in relations):
            k += 1
        main_vars.append((name, k))

    has_parent = {b for _, b in edges}
    g = CausalGraph(
        main_vars=tuple(main_vars),
        disturbances=tuple(n for n in latent if n not in has_parent),
        ancillary_vars=tuple(n for n in latent if n in has_parent),
        edges=frozenset(edges),
        deterministic_relations=tuple(relations),
    )
    g.topological_order()  # raises on cycles
    _check_relations(g)
    return g


def _check_relations(g: CausalGraph) -> None:
    seen = set()
    for rel in g.deterministic_relations:
        if rel.child in seen:
            raise GraphError(f"two deterministic relations for {rel.child!r}")
        seen.add(rel.child)
        pars = set(g.parents(rel.child))
        if rel.condition not in pars:
            raise GraphError(f"{rel.condition!r} must be a parent of {rel.child!r}")
        if rel.condition_value >= g.card(rel.condition):
            raise GraphError(f"value {rel.condition_value} out of range for {rel.condition!r}")
        if rel.source != "*":
            if rel.source not in pars:
                raise GraphError(f"{rel.source!r} must be a parent of {rel.child!r}")
            src_card = g.card(rel.source) - (1 if g.na_value(rel.source) is not None else 0)
            if src_card > g.card(rel.child) - 1:
                raise GraphError(f"{rel.child!r} cannot hold every value of {rel.source!r}")


def format_graph(g: CausalGraph) -> str:
    """Serialise a graph back to the text format."""
    lines = []
    if g.edges:
        order = {n: i for i, n in enumerate(g.nodes)}
        es = sorted(g.edges, key=lambda e: (order[e[0]], order[e[1]]))
        lines.append("edges: " + "; ".join(f"{a} -> {b}" for a, b in es))
    if g.hidden:
        lines.append("latent: " + ", ".join(g.hidden))
    cards = []
    for n, k in g.main_vars:
        cards.append(f"{n}={k - 1 if g.na_value(n) is not None else k}")
    lines.append("card: " + ", ".join(cards))
    for rel in g.deterministic_relations:
        lines.append(f"deterministic: {rel}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# canonicalization
# ---------------------------------------------------------------------------


def canonicalize(g: CausalGraph) -> CausalGraph:
    """Return the canonical form of ``g``.

    1. add ``a -> b`` whenever a directed path from ``a`` to ``b`` has only
       hidden interior nodes;
    2. drop edges into hidden nodes;
    3. drop hidden nodes whose children are a subset of another hidden node's
       children (for equal sets the earlier declared node is kept).
    """
    hidden = list(g.hidden)
    hidden_set = set(hidden)
    edges = set(g.edges)

    # step 1: reachability through hidden interiors
    children: dict[str, set[str]] = {n: set() for n in g.nodes}
    for a, b in edges:
        children[a].add(b)
    added: set[tuple[str, str]] = set()
    for a in g.nodes:
        stack = [c for c in children[a] if c in hidden_set]
        seen = set(stack)
        while stack:
            h = stack.pop()
            for c in children[h]:
                if c != a:
                    added.add((a, c))
                if c in hidden_set and c not in seen:
                    seen.add(c)
                    stack.append(c)
    edges |= added

    # step 2
    edges = {(a, b) for a, b in edges if b not in hidden_set}

    # step 3
    kids = {h: frozenset(b for a, b in edges if a == h) for h in hidden}
    removed: set[str] = set()
    for i, h in enumerate(hidden):
        if not kids[h]:
            removed.add(h)
            continue
        for j, other in enumerate(hidden):
            if other == h or other in removed:
                continue
            if kids[h] < kids[other] or (kids[h] == kids[other] and j < i):
                removed.add(h)
                break
    keep = [h for h in hidden if h not in removed]
    edges = {(a, b) for a, b in edges if a not in removed and b not in removed}

    return replace(
        g,
        disturbances=tuple(keep),
        ancillary_vars=(),
        edges=frozenset(edges),
        canonical=True,
    )


def districts(g: CausalGraph) -> list[District]:
    """Partition the main variables of a canonical graph into districts."""
    if not g.canonical:
        raise GraphError("districts() requires a canonical graph")
    parent = {n: n for n in g.main_names}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u in g.disturbances:
        ch = [c for c in g.children(u) if g.is_main(c)]
        for c in ch[1:]:
            ra, rb = find(ch[0]), find(c)
            if ra != rb:
                parent[rb] = ra
    groups: dict[str, list[str]] = {}
    for n in g.main_names:
        groups.setdefault(find(n), []).append(n)
    out = []
    for members in groups.values():
        ms = frozenset(members)
        lats = frozenset(u for u in g.disturbances if set(g.children(u)) & ms)
        out.append(District(ms, lats))
    return out
