"""Functional models: response functions, disturbance domains, determinism."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import CausalGraph, GraphError

__all__ = [
    "Input",
    "ResponseFunction",
    "FunctionalModel",
    "response_function_count",
    "build_functional_model",
    "reduce_deterministic",
    "format_strata",
]

MAX_DOMAIN = 1 << 22


@dataclass(frozen=True)
class Input:
    """One argument of a response function.

    Main-variable parents come first (declaration order).  When a variable has
    several latent parents, the non-governing ones enter as inputs ranging over
    their own domain indices.
    """

    name: str
    card: int
    latent: bool = False


@dataclass(frozen=True)
class ResponseFunction:
    variable: str
    inputs: tuple[Input, ...]
    table: tuple[int, ...]

    def __call__(self, *args: int) -> int:
        return self.table[_cell_index(args, [i.card for i in self.inputs])]


def _cell_index(values: Sequence[int], cards: Sequence[int]) -> int:
    idx = 0
    for v, k in zip(values, cards):
        idx = idx * k + v
    return idx


@dataclass
class FunctionalModel:
    """Finite-domain functional model of a canonical graph.

    ``domains[u]`` is an integer array with one row per domain element and the
    response tables of the governed variables laid side by side; ``columns[v]``
    gives the slice holding ``v``'s table.
    """

    graph: CausalGraph
    disturbances: tuple[str, ...]
    assignments: dict[str, tuple[str, ...]]
    governing: dict[str, str]
    inputs: dict[str, tuple[Input, ...]]
    domains: dict[str, np.ndarray]
    columns: dict[str, slice]
    parameters: dict[str, range]
    unreduced_sizes: dict[str, int]
    reduced: bool = False
    _names: dict = field(default_factory=dict, repr=False)

    @property
    def n_params(self) -> int:
        return sum(len(r) for r in self.parameters.values())

    def domain_size(self, u: str) -> int:
        return int(self.domains[u].shape[0])

    def input_cards(self, v: str) -> list[int]:
        return [i.card for i in self.inputs[v]]

    def response(self, u: str, index: int, v: str) -> ResponseFunction:
        table = tuple(int(x) for x in self.domains[u][index, self.columns[v]])
        return ResponseFunction(v, self.inputs[v], table)

    def stratum_name(self, u: str, index: int) -> str:
        return ",".join(
            _table_name(self.graph, v, self.domains[u][index, self.columns[v]])
            for v in self.assignments[u]
        )

    def stratum_names(self, u: str) -> list[str]:
        if u not in self._names:
            self._names[u] = [self.stratum_name(u, i) for i in range(self.domain_size(u))]
        return self._names[u]

    def stratum_index(self, u: str, name: str) -> int:
        lookup = {n: i for i, n in enumerate(self.stratum_names(u))}
        try:
            return lookup[name]
        except KeyError:
            raise KeyError(f"{name!r} is not a stratum of {u!r}") from None

    def param_names(self) -> list[str]:
        out = [""] * self.n_params
        for u in self.disturbances:
            for j, name in zip(self.parameters[u], self.stratum_names(u)):
                out[j] = f"{u}[{name}]"
        return out

    def group_of(self) -> np.ndarray:
        """Disturbance position for every parameter index."""
        out = np.empty(self.n_params, dtype=np.int64)
        for k, u in enumerate(self.disturbances):
            r = self.parameters[u]
            out[r.start:r.stop] = k
        return out


def _value_label(g: CausalGraph, v: str, x: int) -> str:
    if g.na_value(v) == x:
        return "N"
    return str(int(x))


def _table_name(g: CausalGraph, v: str, table: np.ndarray) -> str:
    labels = [_value_label(g, v, x) for x in table]
    sep = "." if any(len(s) > 1 for s in labels) else ""
    return f"{v.lower()}_{sep.join(labels)}"


def response_function_count(g: CausalGraph, v: str, model: FunctionalModel | None = None) -> int:
    """Number of response functions for ``v``.

    Without a model this is ``|S(v)|`` raised to the product of the main-parent
    cardinalities.  With a model the non-governing latent inputs are included.
    """
    if not g.is_main(v):
        raise GraphError(f"{v!r} is not a main variable")
    if model is not None:
        cards = model.input_cards(v)
    else:
        cards = [g.card(p) for p in g.main_parents(v)]
    return g.card(v) ** int(np.prod(cards, dtype=object))


def _governing(g: CausalGraph) -> tuple[tuple[str, ...], dict[str, str]]:
    disturbances = list(g.disturbances)
    governing: dict[str, str] = {}
    taken = set(g.nodes)
    for v in g.main_names:
        lat = g.latent_parents(v)
        if lat:
            governing[v] = lat[0]
        else:
            name = f"U_{v}"
            while name in taken:
                name = "_" + name
            taken.add(name)
            disturbances.append(name)
            governing[v] = name
    return tuple(disturbances), governing


def _allowed_outputs(
    g: CausalGraph, v: str, inputs: Sequence[Input], reduce: bool
) -> list[list[int]]:
    cells = list(itertools.product(*[range(i.card) for i in inputs]))
    full = list(range(g.card(v)))
    rel = next((r for r in g.deterministic_relations if r.child == v), None)
    if not reduce or rel is None:
        return [full] * len(cells)
    na = g.card(v) - 1
    names = [i.name for i in inputs]
    ci = names.index(rel.condition)
    si = None if rel.source == "*" else names.index(rel.source)
    out = []
    for cell in cells:
        if cell[ci] != rel.condition_value:
            out.append([na])
        elif si is None:
            out.append(full[:-1])
        else:
            src = cell[si]
            src_na = g.na_value(rel.source)
            out.append([na] if src_na is not None and src == src_na else [src])
    return out


def _product_rows(options: Sequence[Sequence[int]]) -> np.ndarray:
    size = 1
    for o in options:
        size *= len(o)
    if size > MAX_DOMAIN:
        raise ValueError(f"domain of size {size} is too large to enumerate")
    if not options:
        return np.zeros((1, 0), dtype=np.int16)
    grids = np.meshgrid(*[np.asarray(o, dtype=np.int16) for o in options], indexing="ij")
    return np.stack([gr.reshape(-1) for gr in grids], axis=1)


def _build(g: CausalGraph, reduce: bool) -> FunctionalModel:
    if not g.canonical:
        raise GraphError("build_functional_model requires a canonical graph")
    disturbances, governing = _governing(g)
    assignments = {u: tuple(v for v in g.main_names if governing[v] == u) for u in disturbances}

    # order disturbances so latent inputs are sized before they are used
    deps = {
        u: {p for v in assignments[u] for p in g.latent_parents(v) if p != u} for u in disturbances
    }
    order: list[str] = []
    pending = list(disturbances)
    while pending:
        ready = [u for u in pending if deps[u] <= set(order)]
        if not ready:
            raise GraphError("cyclic dependence between disturbances through latent inputs")
        order.append(ready[0])
        pending.remove(ready[0])

    inputs: dict[str, tuple[Input, ...]] = {}
    domains: dict[str, np.ndarray] = {}
    columns: dict[str, slice] = {}
    unreduced: dict[str, int] = {}
    for u in order:
        blocks = []
        col = 0
        n_full = 1
        for v in assignments[u]:
            ins = [Input(p, g.card(p)) for p in g.main_parents(v)]
            ins += [
                Input(p, domains[p].shape[0], latent=True)
                for p in g.latent_parents(v)
                if p != u
            ]
            inputs[v] = tuple(ins)
            n_cells = int(np.prod([i.card for i in ins], dtype=np.int64)) if ins else 1
            n_full *= g.card(v) ** n_cells
            tables = _product_rows(_allowed_outputs(g, v, ins, reduce))
            blocks.append(tables)
            columns[v] = slice(col, col + n_cells)
            col += n_cells
        unreduced[u] = n_full
        # Cartesian product of per-variable table sets, first variable slowest
        dom = np.zeros((1, 0), dtype=np.int16)
        for tables in blocks:
            if dom.shape[0] * tables.shape[0] > MAX_DOMAIN:
                raise ValueError(f"domain of {u!r} is too large to enumerate")
            left = np.repeat(dom, tables.shape[0], axis=0)
            right = np.tile(tables, (dom.shape[0], 1))
            dom = np.concatenate([left, right], axis=1)
        domains[u] = dom

    parameters: dict[str, range] = {}
    start = 0
    for u in disturbances:
        n = domains[u].shape[0]
        parameters[u] = range(start, start + n)
        start += n
    return FunctionalModel(
        graph=g,
        disturbances=disturbances,
        assignments=assignments,
        governing=governing,
        inputs=inputs,
        domains=domains,
        columns=columns,
        parameters=parameters,
        unreduced_sizes=unreduced,
        reduced=reduce,
    )


def build_functional_model(g: CausalGraph) -> FunctionalModel:
    """Enumerate the functional model of canonical ``g`` (no determinism reduction)."""
    return _build(g, reduce=False)


def reduce_deterministic(m: FunctionalModel, g: CausalGraph | None = None) -> FunctionalModel:
    """Drop response functions that contradict declared deterministic relations."""
    g = g or m.graph
    for rel in g.deterministic_relations:
        for n in (rel.child, rel.condition) + (() if rel.source == "*" else (rel.source,)):
            if not g.is_main(n):
                raise GraphError(f"deterministic relation references undeclared variable {n!r}")
    if not g.deterministic_relations:
        return m
    return _build(g, reduce=True)


def format_strata(m: FunctionalModel, probs: dict[str, Sequence[float]] | None = None) -> str:
    """Text dump of every disturbance domain, one stratum per line."""
    lines = []
    for u in m.disturbances:
        gov = ", ".join(m.assignments[u])
        lines.append(f"[{u}] governs {gov}; {m.domain_size(u)} strata")
        for v in m.assignments[u]:
            args = ", ".join(i.name for i in m.inputs[v]) or "-"
            lines.append(f"  # {v.lower()} table over ({args}), first input slowest")
        names = m.stratum_names(u)
        for i, name in enumerate(names):
            if probs is not None:
                lines.append(f"  {name:<24} {float(probs[u][i]):.6f}")
            else:
                lines.append(f"  {name}")
    return "\n".join(lines) + "\n"
