"""Polynomial programs: assembly from graph/evidence/assumptions, simplification."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Iterable, Literal, Mapping, Sequence

import numpy as np

from .graph import CausalGraph, canonicalize, districts
from .polynomial import Polynomial
from .query import (
    Compare,
    CounterfactualEvent,
    Expr,
    QueryError,
    fractionalize,
    parse_event,
    parse_query,
    polynomialize,
    statement_relation,
)
from .strata import FunctionalModel, build_functional_model, reduce_deterministic

__all__ = [
    "EvidenceError",
    "EvidenceTable",
    "Constraint",
    "PolynomialProgram",
    "load_evidence",
    "parse_evidence",
    "build_program",
    "simplify",
    "classify",
    "district_statements",
    "substitute_identified",
    "program_degree",
]

PROB_TOL = Fraction(1, 10**9)


class EvidenceError(ValueError):
    pass


@dataclass(frozen=True)
class EvidenceTable:
    """One multinomial table of observed cells.

    ``cells`` are conjunctions of factual events (``(variable, value)`` pairs);
    ``probs`` are exact cell proportions.  ``counts`` and ``n`` are kept when the
    table was given as counts.  ``given`` conditions every cell on a factual
    event (for instance a selection indicator).
    """

    cells: tuple[tuple[tuple[str, int | str], ...], ...]
    probs: tuple[Fraction, ...]
    counts: tuple[int, ...] | None = None
    n: int | None = None
    given: tuple[tuple[str, int | str], ...] = ()

    @property
    def k(self) -> int:
        return len(self.cells)

    def with_probs(self, probs: Sequence[Fraction], counts: Sequence[int] | None = None) -> "EvidenceTable":
        return replace(
            self,
            probs=tuple(Fraction(p) for p in probs),
            counts=None if counts is None else tuple(int(c) for c in counts),
            n=None if counts is None else int(sum(counts)),
        )

    def cell_label(self, k: int) -> str:
        return ",".join(f"{v}={x}" for v, x in self.cells[k])

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        vals = self.counts if self.counts is not None else [float(p) for p in self.probs]
        for k in range(self.k):
            out[self.cell_label(k)] = vals[k]
        if self.n is not None:
            out["n"] = self.n
        if self.given:
            out["given"] = ",".join(f"{v}={x}" for v, x in self.given)
        return out


@dataclass(frozen=True)
class Evidence:
    tables: tuple[EvidenceTable, ...] = ()
    statements: tuple[str, ...] = ()


def _parse_assignment(text: str) -> tuple[tuple[str, int | str], ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise EvidenceError(f"bad cell assignment {text!r}")
        v, x = (s.strip() for s in part.split("=", 1))
        out.append((v, x if x == "NA" else int(x)))
    return tuple(out)


def _table_from_obj(obj: Mapping[str, Any]) -> tuple[EvidenceTable | None, list[str]]:
    extra = [str(s) for s in obj.get("statements", [])]
    n = obj.get("n")
    given = _parse_assignment(obj["given"]) if "given" in obj else ()
    cells = []
    values = []
    for key, val in obj.items():
        if key in ("n", "given", "statements"):
            continue
        cells.append(_parse_assignment(key))
        values.append(val)
    if not cells:
        return None, extra
    is_count = all(isinstance(v, int) and not isinstance(v, bool) for v in values) and (
        n is not None or any(v > 1 for v in values)
    )
    if is_count:
        total = sum(values)
        if any(v < 0 for v in values):
            raise EvidenceError("negative count")
        if total <= 0:
            raise EvidenceError("counts sum to zero")
        if n is not None and int(n) != total:
            raise EvidenceError(f"counts sum to {total} but n = {n}")
        probs = tuple(Fraction(v, total) for v in values)
        return EvidenceTable(tuple(cells), probs, tuple(values), total, given), extra
    probs = tuple(Fraction(v) if not isinstance(v, float) else Fraction(repr(v)) for v in values)
    for p in probs:
        if p < 0 or p > 1:
            raise EvidenceError(f"probability {float(p)} outside [0, 1]")
    if abs(sum(probs) - 1) > PROB_TOL:
        raise EvidenceError(f"cell probabilities sum to {float(sum(probs))}, not 1")
    return EvidenceTable(tuple(cells), probs, None, int(n) if n is not None else None, given), extra


def parse_evidence(obj: Any) -> Evidence:
    """Evidence from a decoded JSON value (object or list of objects)."""
    objs = obj if isinstance(obj, list) else [obj]
    tables = []
    stmts: list[str] = []
    for o in objs:
        if not isinstance(o, dict):
            raise EvidenceError("evidence must be a JSON object or a list of objects")
        t, extra = _table_from_obj(o)
        if t is not None:
            tables.append(t)
        stmts.extend(extra)
    return Evidence(tuple(tables), tuple(stmts))


def load_evidence(text: str) -> Evidence:
    try:
        obj = json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise EvidenceError(f"invalid JSON: {exc}") from None
    return parse_evidence(obj)


# ---------------------------------------------------------------------------
# programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constraint:
    """``poly rel rhs``.  Evidence constraints carry ``tag = (table, cell)`` and
    the cell ratio ``numerator / denominator`` used by confidence loosening."""

    poly: Polynomial
    relation: Literal["=", "<=", ">="]
    rhs: Fraction
    tag: tuple[int, int] | None = None
    numerator: Polynomial | None = None
    denominator: Polynomial | None = None
    label: str = ""


@dataclass(frozen=True)
class PolynomialProgram:
    objective: Polynomial
    constraints: tuple[Constraint, ...]
    var_boxes: tuple[tuple[Fraction, Fraction], ...]
    simplex_groups: tuple[tuple[int, ...], ...]
    var_names: tuple[str, ...]
    group_names: tuple[str, ...] = ()
    aux_vars: tuple[int, ...] = ()
    evidence: tuple[EvidenceTable, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_vars(self) -> int:
        return len(self.var_boxes)

    def check(self) -> None:
        n = self.n_vars
        used = set(self.objective.variables())
        for c in self.constraints:
            used |= c.poly.variables()
        if used and max(used) >= n:
            raise ValueError("polynomial references an unknown variable")
        seen: set[int] = set()
        for grp in self.simplex_groups:
            if seen & set(grp):
                raise ValueError("simplex groups overlap")
            seen |= set(grp)

    def evidence_constraints(self) -> list[Constraint]:
        return [c for c in self.constraints if c.tag is not None]


def _events_of(cell: Sequence[tuple[str, int | str]], g: CausalGraph) -> list[CounterfactualEvent]:
    out = []
    for v, x in cell:
        if not g.is_main(v):
            raise QueryError(f"unknown variable {v!r} in evidence")
        if x == "NA":
            if g.na_value(v) is None:
                raise QueryError(f"{v!r} has no NA level")
        elif not 0 <= int(x) < g.card(v) or int(x) == g.na_value(v):
            raise QueryError(f"value {x} out of range for {v!r}")
        out.append(CounterfactualEvent.make(v, {}, x))
    return out


def _as_statements(items: Iterable[str | Compare], g: CausalGraph) -> list[Compare]:
    out = []
    for s in items:
        node = parse_query(s, g) if isinstance(s, str) else s
        if not isinstance(node, Compare):
            raise QueryError(f"statement has no comparison: {s!r}")
        out.append(node)
    return out


def _ancestral_subsets(members: Sequence[str], g: CausalGraph) -> list[tuple[str, ...]]:
    """Nonempty subsets of a district closed under parents inside the district."""
    inside = set(members)
    out = []
    for r in range(1, len(members) + 1):
        for sub in itertools.combinations(members, r):
            s = set(sub)
            if all(p in s for v in sub for p in g.main_parents(v) if p in inside):
                out.append(sub)
    return out


def district_statements(
    table: EvidenceTable, g: CausalGraph, marginals: bool = True
) -> list[tuple[list[CounterfactualEvent], Fraction]] | None:
    """District factorization of a full joint table over every main variable.

    Returns ``(events, value)`` pairs stating ``P(S(pa_S) = s) = Q_S`` where
    ``S`` runs over each district and, with ``marginals``, over every subset of
    a district that is closed under parents inside it (such ``Q_S`` are sums of
    ``Q_D``).  Returns None when the table is not a strictly positive complete
    joint.
    """
    names = list(g.main_names)
    if table.given or any(p <= 0 for p in table.probs):
        return None
    cells: dict[tuple[int, ...], Fraction] = {}
    for cell, p in zip(table.cells, table.probs):
        d = dict(cell)
        if set(d) != set(names) or any(x == "NA" for x in d.values()):
            return None
        cells[tuple(int(d[v]) for v in names)] = p
    if len(cells) != int(np.prod([g.card(v) for v in names])):
        return None

    order = g.main_topological_order()
    pos = {v: names.index(v) for v in names}
    prefix_marg: dict[tuple[int, tuple[int, ...]], Fraction] = {}
    for i in range(len(order) + 1):
        for key, p in cells.items():
            k = (i, tuple(key[pos[v]] for v in order[:i]))
            prefix_marg[k] = prefix_marg.get(k, Fraction(0)) + p

    def q_district(members: Sequence[str], vals: Mapping[str, int]) -> Fraction:
        q = Fraction(1)
        for v in members:
            i = order.index(v)
            num = prefix_marg[(i + 1, tuple(vals[w] for w in order[: i + 1]))]
            den = prefix_marg[(i, tuple(vals[w] for w in order[:i]))]
            q *= num / den
        return q

    out = []
    for dist in districts(g):
        members = [v for v in order if v in dist.members]
        outside = sorted(
            {p for v in members for p in g.main_parents(v) if p not in dist.members},
            key=names.index,
        )
        qd: dict[tuple[tuple[int, ...], tuple[int, ...]], Fraction] = {}
        for key in cells:
            vals = {v: key[pos[v]] for v in names}
            sig = (tuple(vals[v] for v in members), tuple(vals[v] for v in outside))
            if sig not in qd:
                qd[sig] = q_district(members, vals)
        subsets = _ancestral_subsets(members, g) if marginals else [tuple(members)]
        for sub in subsets:
            sub_out = sorted(
                {p for v in sub for p in g.main_parents(v) if p not in sub}, key=names.index
            )
            acc: dict[tuple[tuple[int, ...], tuple[int, ...]], Fraction] = {}
            ref: dict[tuple[int, ...], tuple[int, ...]] = {}
            for (mv, ov), q in qd.items():
                vals = dict(zip(members, mv)) | dict(zip(outside, ov))
                s_out = tuple(vals[w] for w in sub_out)
                # Q_S does not depend on parents of D outside S; sum at one setting
                if ref.setdefault(s_out, ov) != ov:
                    continue
                k = (tuple(vals[v] for v in sub), s_out)
                acc[k] = acc.get(k, Fraction(0)) + q
            for (sv, ov), q in acc.items():
                interv = dict(zip(sub_out, ov))
                events = [CounterfactualEvent.make(v, interv, x) for v, x in zip(sub, sv)]
                out.append((events, q))
    return out


def build_program(
    g: CausalGraph,
    evidence: Evidence | Sequence[EvidenceTable] | None,
    assumptions: Sequence[str | Compare],
    target: str | Expr,
    *,
    factorize: bool | Literal["auto"] = "auto",
    estimand_range: tuple[float, float] | None = None,
    reduce: bool = True,
) -> PolynomialProgram:
    """Assemble the polynomial program for ``target`` under ``g``.

    Evidence tables become one equality per cell (``P(cell, given) = p * P(given)``).
    With ``factorize`` a strictly positive full joint table is replaced by its
    district factorization, which is equivalent on the model and keeps each
    constraint inside a single district.
    """
    g = canonicalize(g)
    m: FunctionalModel = build_functional_model(g)
    if reduce and g.deterministic_relations:
        m = reduce_deterministic(m, g)

    if evidence is None:
        evidence = Evidence()
    elif not isinstance(evidence, Evidence):
        evidence = Evidence(tuple(evidence))

    tnode = parse_query(target, g) if isinstance(target, str) else target
    if isinstance(tnode, Compare):
        raise QueryError("the target must be an expression, not a statement")
    frac = fractionalize(tnode, m, g, aux_index=m.n_params, estimand_range=estimand_range)

    names = m.param_names()
    boxes: list[tuple[Fraction, Fraction]] = [(Fraction(0), Fraction(1))] * m.n_params
    aux: list[int] = []
    constraints: list[Constraint] = []
    if frac.aux_index is not None:
        aux.append(frac.aux_index)
        names.append("s")
        boxes.append(frac.aux_box)  # type: ignore[arg-type]
        for poly, rel, rhs in frac.side_constraints:
            constraints.append(Constraint(poly, rel, rhs, label="estimand"))  # type: ignore[arg-type]

    factorized = []
    for t_idx, table in enumerate(evidence.tables):
        stmts = None
        if factorize:
            stmts = district_statements(table, g)
            if stmts is None and factorize is True:
                raise EvidenceError("district factorization needs a strictly positive full joint table")
        if stmts is not None:
            factorized.append(t_idx)
            for events, q in stmts:
                poly = polynomialize(events, m, g)
                label = "Q:" + ",".join(str(e) for e in events)
                constraints.append(Constraint(poly, "=", q, label=label))
            continue
        given_events = _events_of(table.given, g)
        den = polynomialize(given_events, m, g) if given_events else Polynomial.constant(1)
        for k, (cell, p) in enumerate(zip(table.cells, table.probs)):
            num = polynomialize(_events_of(cell, g) + given_events, m, g)
            if given_events:
                poly, rhs = num - den * p, Fraction(0)
            else:
                poly, rhs = num, p
            constraints.append(
                Constraint(poly, "=", rhs, tag=(t_idx, k), numerator=num, denominator=den, label=table.cell_label(k))
            )

    for node in _as_statements(list(evidence.statements), g):
        rel = statement_relation(node, m, g)
        if rel is not None:
            constraints.append(Constraint(rel[0], rel[1], rel[2], label="evidence"))  # type: ignore[arg-type]
    for node in _as_statements(assumptions, g):
        rel = statement_relation(node, m, g)
        if rel is not None:
            constraints.append(Constraint(rel[0], rel[1], rel[2], label="assumption"))  # type: ignore[arg-type]

    groups = tuple(tuple(m.parameters[u]) for u in m.disturbances)
    prog = PolynomialProgram(
        objective=frac.objective,
        constraints=tuple(constraints),
        var_boxes=tuple(boxes),
        simplex_groups=groups,
        var_names=tuple(names),
        group_names=tuple(m.disturbances),
        aux_vars=tuple(aux),
        evidence=tuple(evidence.tables),
        meta={"model": m, "graph": g, "factorized_tables": tuple(factorized)},
    )
    prog.check()
    return prog


# ---------------------------------------------------------------------------
# simplification and classification
# ---------------------------------------------------------------------------


def simplify(p: PolynomialProgram) -> PolynomialProgram:
    """Drop constraints and parameters that cannot interact with the objective.

    Two variables interact when they share the objective, a constraint or a
    simplex group; interaction is closed transitively.  Constraints without
    variables are kept so that constant contradictions still surface.
    """
    p = substitute_identified(p)
    n = p.n_vars
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def link(vs: Iterable[int]) -> None:
        vs = list(vs)
        for v in vs[1:]:
            a, b = find(vs[0]), find(v)
            if a != b:
                parent[b] = a

    link(p.objective.variables())
    for c in p.constraints:
        link(c.poly.variables())
    for grp in p.simplex_groups:
        link(grp)

    obj_vars = p.objective.variables()
    roots = {find(v) for v in obj_vars}
    keep_var = [find(i) in roots for i in range(n)]
    new_index: dict[int, int] = {}
    for i in range(n):
        if keep_var[i]:
            new_index[i] = len(new_index)

    def keep_constraint(c: Constraint) -> bool:
        vs = c.poly.variables()
        return not vs or any(keep_var[v] for v in vs)

    constraints = []
    for c in p.constraints:
        if not keep_constraint(c):
            continue
        constraints.append(
            replace(
                c,
                poly=c.poly.remap(new_index),
                numerator=None if c.numerator is None else _remap_partial(c.numerator, new_index),
                denominator=None if c.denominator is None else _remap_partial(c.denominator, new_index),
            )
        )
    groups = []
    gnames = []
    for grp, name in zip(p.simplex_groups, p.group_names or [""] * len(p.simplex_groups)):
        if keep_var[grp[0]]:
            groups.append(tuple(new_index[i] for i in grp))
            gnames.append(name)
    meta = dict(p.meta)
    meta["simplified_from"] = n
    meta["kept_vars"] = tuple(sorted(new_index))
    return PolynomialProgram(
        objective=p.objective.remap(new_index),
        constraints=tuple(constraints),
        var_boxes=tuple(p.var_boxes[i] for i in sorted(new_index)),
        simplex_groups=tuple(groups),
        var_names=tuple(p.var_names[i] for i in sorted(new_index)),
        group_names=tuple(gnames),
        aux_vars=tuple(new_index[i] for i in p.aux_vars if i in new_index),
        evidence=p.evidence,
        meta=meta,
    )


def _pinned_forms(p: PolynomialProgram) -> dict[tuple[int, ...], Fraction]:
    """Linear forms fixed by single-form equality constraints, with complements."""
    group_of = {i: k for k, grp in enumerate(p.simplex_groups) for i in grp}
    out: dict[tuple[int, ...], Fraction] = {}
    for c in p.constraints:
        if c.relation != "=":
            continue
        items = list(c.poly.items())
        if len(items) != 1:
            continue
        key, coef = items[0]
        if len(key) != 1:
            continue
        (f,) = key
        val = c.rhs / coef
        out[f] = val
        groups = {group_of.get(i) for i in f}
        if len(groups) == 1 and None not in groups:
            grp = p.simplex_groups[groups.pop()]
            comp = tuple(i for i in grp if i not in set(f))
            out.setdefault(comp, 1 - val)
    return out


def substitute_identified(p: PolynomialProgram) -> PolynomialProgram:
    """Replace objective factors pinned by an equality constraint with constants.

    Every feasible point satisfies the pinning constraint, so the objective is
    unchanged on the feasible set; the payoff is that parameters which entered
    the objective only through identified quantities stop interacting with it.
    """
    pinned = _pinned_forms(p)
    if not pinned or p.objective.degree < 2:
        return p
    out: dict = {}
    changed = False
    for key, coef in p.objective.items():
        rest = []
        for f in key:
            if f in pinned:
                coef = coef * pinned[f]
                changed = True
            else:
                rest.append(f)
        k = tuple(rest)
        out[k] = out.get(k, Fraction(0)) + coef
    if not changed:
        return p
    return replace(p, objective=Polynomial(out))


def _remap_partial(poly: Polynomial, mapping: Mapping[int, int]) -> Polynomial | None:
    if not poly.variables() <= set(mapping):
        return None
    return poly.remap(mapping)


def classify(p: PolynomialProgram) -> Literal["linear", "polynomial"]:
    deg = p.objective.degree
    for c in p.constraints:
        deg = max(deg, c.poly.degree)
    return "linear" if deg <= 1 else "polynomial"


def program_degree(p: PolynomialProgram) -> int:
    return max([p.objective.degree] + [c.poly.degree for c in p.constraints])
