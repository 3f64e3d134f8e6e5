"""Counterfactual queries: parsing, event evaluation, polynomialization.

Grammar (whitespace insensitive)::

    stmt   := expr [op expr]          op in  <  <=  =  >=  >  !=
    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := NUMBER | prob | '(' expr ')' | 'ATE' '(' ID ',' ID ')' | '-' factor
    prob   := 'P(' event (',' event)* ['|' event (',' event)*] ')'
    event  := ID ['(' assign (',' assign)* ')'] '=' VALUE
    assign := ID '=' VALUE

``P(A | B)`` is sugar for ``P(A, B) / P(B)``.  ``VALUE`` is an integer or ``NA``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence, Union

import numpy as np

from .graph import CausalGraph
from .polynomial import Factor, Polynomial
from .strata import FunctionalModel

__all__ = [
    "QueryError",
    "QuerySyntaxError",
    "CounterfactualEvent",
    "Prob",
    "Const",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Compare",
    "parse_query",
    "parse_event",
    "evaluate_event",
    "polynomialize",
    "polynomialize_bruteforce",
    "relevant_disturbances",
    "fractionalize",
    "Fractionalized",
    "statement_relation",
    "format_expr",
]

NA = "NA"


class QueryError(ValueError):
    """Semantic problem with a query (unknown variable, bad value, ...)."""


class QuerySyntaxError(QueryError):
    def __init__(self, message: str, text: str, pos: int) -> None:
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.column = col


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CounterfactualEvent:
    """``variable(intervention) = value``; values may be the string ``"NA"`` before binding."""

    variable: str
    intervention: tuple[tuple[str, Union[int, str]], ...]
    value: Union[int, str]

    @staticmethod
    def make(variable: str, intervention: Mapping[str, int | str] | Sequence, value: int | str) -> "CounterfactualEvent":
        items = dict(intervention)
        items.pop(variable, None)  # intervening on the variable itself is ignored
        return CounterfactualEvent(variable, tuple(sorted(items.items())), value)

    def __str__(self) -> str:
        if self.intervention:
            inner = ",".join(f"{k}={v}" for k, v in self.intervention)
            return f"{self.variable}({inner})={self.value}"
        return f"{self.variable}={self.value}"


@dataclass(frozen=True)
class Prob:
    events: tuple[CounterfactualEvent, ...]


@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Prob, Const, Add, Sub, Mul, Div]
_BIN = {"+": Add, "-": Sub, "*": Mul, "/": Div}
_SYM = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def format_expr(e: Expr | Compare) -> str:
    if isinstance(e, Prob):
        return "P(" + ", ".join(str(ev) for ev in e.events) + ")"
    if isinstance(e, Const):
        return _const_text(e.value)
    if isinstance(e, Compare):
        return f"{format_expr(e.left)} {e.op} {format_expr(e.right)}"
    return f"({format_expr(e.left)} {_SYM[type(e)]} {format_expr(e.right)})"


def _const_text(q: Fraction) -> str:
    """Exact decimal when the fraction terminates, else ``n/d``."""
    d = q.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return str(q)
    places = max(twos, fives)
    if places == 0:
        return str(q.numerator)
    scaled = abs(q.numerator) * 10**places // q.denominator
    digits = str(scaled).rjust(places + 1, "0")
    sign = "-" if q < 0 else ""
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_*]*)"
    r"|(?P<op><=|>=|!=|<|>|=|\+|-|\*|/|\(|\)|,|\|))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup or "op"
        start = m.start(kind)
        out.append(_Tok(kind, m.group(kind), start))
        pos = m.end()
    out.append(_Tok("end", "", n))
    return out


class _Parser:
    def __init__(self, text: str, graph: CausalGraph | None) -> None:
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.graph = graph

    # helpers
    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.take()
        if t.text != text:
            raise QuerySyntaxError(f"expected {text!r}, found {t.text or 'end of input'!r}", self.text, t.pos)
        return t

    def error(self, msg: str, tok: _Tok | None = None) -> QuerySyntaxError:
        tok = tok or self.peek()
        return QuerySyntaxError(msg, self.text, tok.pos)

    # grammar
    def statement(self) -> Expr | Compare:
        left = self.expr()
        t = self.peek()
        if t.kind == "op" and t.text in ("<", "<=", "=", ">=", ">", "!="):
            self.take()
            right = self.expr()
            node: Expr | Compare = Compare(t.text, left, right)
        else:
            node = left
        if self.peek().kind != "end":
            raise self.error(f"unexpected {self.peek().text!r}")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.take().text
            node = _BIN[op](node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op = self.take().text
            right = self.factor()
            if op == "/" and isinstance(node, Const) and isinstance(right, Const) and right.value != 0:
                node = Const(node.value / right.value)  # keeps n/d literals exact constants
            else:
                node = _BIN[op](node, right)
        return node

    def factor(self) -> Expr:
        t = self.peek()
        if t.kind == "num":
            self.take()
            return Const(Fraction(t.text))
        if t.kind == "op" and t.text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "op" and t.text == "-":
            self.take()
            inner = self.factor()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Sub(Const(Fraction(0)), inner)
        if t.kind == "id" and t.text == "P" and self.toks[self.i + 1].text == "(":
            return self.prob()
        if t.kind == "id" and t.text == "ATE":
            return self.ate()
        raise self.error(f"unexpected {t.text or 'end of input'!r}")

    def ate(self) -> Expr:
        self.take()
        self.expect("(")
        xt = self.take()
        self.expect(",")
        yt = self.take()
        self.expect(")")
        if xt.kind != "id" or yt.kind != "id":
            raise self.error("ATE expects two variable names", xt)
        x, y = xt.text, yt.text
        if self.graph is not None:
            for tok in (xt, yt):
                if not self.graph.is_main(tok.text):
                    raise self.error(f"unknown variable {tok.text!r}", tok)
            if self.graph.card(y) != 2:
                raise self.error(f"ATE sugar needs a binary outcome; {y!r} has {self.graph.card(y)} levels", yt)
            if self.graph.card(x) < 2:
                raise self.error(f"{x!r} must have at least two levels", xt)
        return Sub(
            Prob((CounterfactualEvent.make(y, {x: 1}, 1),)),
            Prob((CounterfactualEvent.make(y, {x: 0}, 1),)),
        )

    def prob(self) -> Expr:
        self.take()
        self.expect("(")
        events = [self.event()]
        while self.peek().text == ",":
            self.take()
            events.append(self.event())
        given: list[CounterfactualEvent] = []
        if self.peek().text == "|":
            self.take()
            given.append(self.event())
            while self.peek().text == ",":
                self.take()
                given.append(self.event())
        self.expect(")")
        if given:
            return Div(Prob(tuple(events + given)), Prob(tuple(given)))
        return Prob(tuple(events))

    def value(self, var: str, tok_var: _Tok) -> int | str:
        t = self.take()
        if t.kind == "id" and t.text == NA:
            val: int | str = NA
        elif t.kind == "num" and t.text.isdigit():
            val = int(t.text)
        else:
            raise self.error(f"expected a value, found {t.text!r}", t)
        if self.graph is not None:
            g = self.graph
            if not g.is_main(var):
                raise self.error(f"unknown variable {var!r}", tok_var)
            if val == NA:
                if g.na_value(var) is None:
                    raise self.error(f"{var!r} has no NA level", t)
                val = g.na_value(var)
            elif not 0 <= int(val) < g.card(var) or val == g.na_value(var):
                raise self.error(f"value {val} out of range for {var!r}", t)
        return val

    def event(self) -> CounterfactualEvent:
        vt = self.take()
        if vt.kind != "id":
            raise self.error(f"expected a variable, found {vt.text!r}", vt)
        interv: dict[str, int | str] = {}
        if self.peek().text == "(":
            self.take()
            while True:
                at = self.take()
                if at.kind != "id":
                    raise self.error(f"expected a variable, found {at.text!r}", at)
                self.expect("=")
                interv[at.text] = self.value(at.text, at)
                if self.peek().text == ",":
                    self.take()
                    continue
                self.expect(")")
                break
        self.expect("=")
        val = self.value(vt.text, vt)
        return CounterfactualEvent.make(vt.text, interv, val)


def parse_query(text: str, graph: CausalGraph | None = None) -> Expr | Compare:
    """Parse an estimand or a statement; with ``graph`` names and values are validated."""
    return _Parser(text, graph).statement()


def parse_event(text: str, graph: CausalGraph | None = None) -> CounterfactualEvent:
    p = _Parser(text, graph)
    ev = p.event()
    if p.peek().kind != "end":
        raise p.error(f"unexpected {p.peek().text!r}")
    return ev


# ---------------------------------------------------------------------------
# evaluation by recursive substitution
# ---------------------------------------------------------------------------


def evaluate_event(
    u: Mapping[str, int],
    e: CounterfactualEvent,
    m: FunctionalModel,
    g: CausalGraph | None = None,
) -> bool:
    """Whether ``e`` holds when every disturbance takes the given domain index."""
    a = dict(e.intervention)
    memo: dict[str, int] = {}

    def value(v: str) -> int:
        if v in memo:
            return memo[v]
        args = []
        for inp in m.inputs[v]:
            if inp.latent:
                args.append(u[inp.name])
            elif inp.name in a:
                args.append(int(a[inp.name]))
            else:
                args.append(value(inp.name))
        cell = 0
        for x, inp in zip(args, m.inputs[v]):
            cell = cell * inp.card + x
        gov = m.governing[v]
        out = int(m.domains[gov][u[gov], m.columns[v].start + cell])
        memo[v] = out
        return out

    return value(e.variable) == int(e.value)


# ---------------------------------------------------------------------------
# polynomialization
# ---------------------------------------------------------------------------


def relevant_disturbances(events: Sequence[CounterfactualEvent], m: FunctionalModel) -> set[str]:
    """Disturbances with an unblocked path into some event variable.

    A path is blocked when it enters a variable in the event's intervention set.
    """
    out: set[str] = set()
    for e in events:
        a = {k for k, _ in e.intervention}
        stack = [e.variable]
        seen = set(stack)
        while stack:
            v = stack.pop()
            out.add(m.governing[v])
            for inp in m.inputs[v]:
                if inp.latent:
                    out.add(inp.name)
                elif inp.name not in a and inp.name not in seen:
                    seen.add(inp.name)
                    stack.append(inp.name)
    return out


def _bind(e: CounterfactualEvent, g: CausalGraph) -> CounterfactualEvent:
    def conv(var: str, v: int | str) -> int:
        if v == NA:
            na = g.na_value(var)
            if na is None:
                raise QueryError(f"{var!r} has no NA level")
            return na
        return int(v)

    if not g.is_main(e.variable):
        raise QueryError(f"unknown variable {e.variable!r}")
    for k, _ in e.intervention:
        if not g.is_main(k):
            raise QueryError(f"unknown variable {k!r}")
    return CounterfactualEvent(
        e.variable, tuple((k, conv(k, v)) for k, v in e.intervention), conv(e.variable, e.value)
    )


class _NodeEnumerator:
    """Enumerate joint values of the counterfactual nodes an event set needs.

    A node is a variable together with the part of the intervention that
    touches its ancestors.  Each complete assignment contributes the product
    over disturbances of the total probability of the strata consistent with
    every response it must produce (a subset-sum linear form per disturbance).
    """

    def __init__(self, events: Sequence[CounterfactualEvent], m: FunctionalModel) -> None:
        self.m = m
        g = m.graph
        self.anc = {v: g.ancestors(v) for v in g.main_names}
        self.fixed: dict[tuple, int] = {}
        self.nodes: list[tuple] = []
        self.contradiction = False
        index: dict[tuple, int] = {}

        def node_key(v: str, a: Mapping[str, int]) -> tuple:
            return (v, tuple(sorted((k, x) for k, x in a.items() if k in self.anc[v])))

        def visit(key: tuple) -> None:
            if key in index:
                return
            v, a = key[0], dict(key[1])
            for inp in m.inputs[v]:
                if not inp.latent and inp.name not in a:
                    visit(node_key(inp.name, a))
            index[key] = len(self.nodes)
            self.nodes.append(key)

        for e in events:
            key = node_key(e.variable, dict(e.intervention))
            if key in self.fixed and self.fixed[key] != e.value:
                self.contradiction = True
            self.fixed[key] = int(e.value)
            visit(key)

        # per node: governing disturbance, input resolution plan
        self.plan = []
        for key in self.nodes:
            v, a = key[0], dict(key[1])
            srcs = []
            for inp in m.inputs[v]:
                if inp.latent:
                    srcs.append(("u", inp.name))
                elif inp.name in a:
                    srcs.append(("c", int(a[inp.name])))
                else:
                    srcs.append(("n", index[node_key(inp.name, a)]))
            self.plan.append((v, m.governing[v], srcs, [i.card for i in m.inputs[v]]))

    def run(self) -> dict[tuple[Factor, ...], int]:
        m = self.m
        out: dict[tuple[Factor, ...], int] = {}
        if self.contradiction:
            return out
        masks = {u: np.ones(m.domain_size(u), dtype=bool) for u in m.disturbances}
        touched: dict[str, int] = {u: 0 for u in m.disturbances}
        latent_val: dict[str, int] = {}
        values = [0] * len(self.nodes)
        fixed = [self.fixed.get(k) for k in self.nodes]

        def emit() -> None:
            key = []
            for u, cnt in touched.items():
                if cnt == 0:
                    continue
                mask = masks[u]
                if mask.all():
                    continue
                base = m.parameters[u].start
                key.append(tuple(int(base + j) for j in np.flatnonzero(mask)))
            k = tuple(sorted(key))
            out[k] = out.get(k, 0) + 1

        def with_latent(srcs, pos: int, cont) -> None:
            # make sure every latent input used by this node has a chosen value
            for kind, ref in srcs[pos:]:
                pos += 1
                if kind == "u" and ref not in latent_val:
                    mask = masks[ref]
                    for j in np.flatnonzero(mask):
                        saved = mask.copy()
                        mask[:] = False
                        mask[j] = True
                        latent_val[ref] = int(j)
                        touched[ref] += 1
                        with_latent(srcs, pos, cont)
                        touched[ref] -= 1
                        del latent_val[ref]
                        masks[ref] = saved
                        mask = masks[ref]
                    return
            cont()

        def step(i: int) -> None:
            if i == len(self.nodes):
                emit()
                return
            v, gov, srcs, cards = self.plan[i]

            def body() -> None:
                cell = 0
                for (kind, ref), card in zip(srcs, cards):
                    x = ref if kind == "c" else values[ref] if kind == "n" else latent_val[ref]
                    cell = cell * card + x
                col = m.domains[gov][:, m.columns[v].start + cell]
                mask = masks[gov]
                if fixed[i] is not None:
                    options = [fixed[i]]
                else:
                    options = [int(x) for x in np.unique(col[mask])]
                for val in options:
                    new = mask & (col == val)
                    if not new.any():
                        continue
                    masks[gov] = new
                    touched[gov] += 1
                    values[i] = val
                    step(i + 1)
                    touched[gov] -= 1
                    masks[gov] = mask

            with_latent(srcs, 0, body)

        step(0)
        return out


def polynomialize(events: Sequence[CounterfactualEvent], m: FunctionalModel, g: CausalGraph | None = None) -> Polynomial:
    """Probability of a conjunction of counterfactual events as a polynomial in the parameters.

    Disturbances that never need to be consulted (in particular those blocked
    from every event variable by the intervention set) do not appear.
    """
    g = g or m.graph
    bound = [_bind(e, g) for e in events]
    counts = _NodeEnumerator(bound, m).run()
    return Polynomial({k: c for k, c in counts.items()})


def polynomialize_bruteforce(
    events: Sequence[CounterfactualEvent],
    m: FunctionalModel,
    g: CausalGraph | None = None,
    prune: bool = False,
) -> Polynomial:
    """Literal sum over joint disturbance assignments (reference implementation).

    With ``prune`` the sum runs over the relevant disturbances only.
    """
    g = g or m.graph
    bound = [_bind(e, g) for e in events]
    dist = list(m.disturbances)
    if prune:
        rel = relevant_disturbances(bound, m)
        dist = [u for u in dist if u in rel]
    sizes = [m.domain_size(u) for u in dist]
    total = int(np.prod(sizes, dtype=np.int64)) if sizes else 1
    if total > 5_000_000:
        raise ValueError("too many joint assignments for brute force")
    terms: dict[tuple[int, ...], int] = {}
    others = {u: 0 for u in m.disturbances if u not in dist}
    for flat in range(total):
        u = dict(others)
        rem = flat
        for name, size in zip(reversed(dist), reversed(sizes)):
            u[name] = rem % size
            rem //= size
        if all(evaluate_event(u, e, m, g) for e in bound):
            mono = tuple(sorted(m.parameters[name].start + u[name] for name in dist))
            terms[mono] = terms.get(mono, 0) + 1
    return Polynomial.from_terms(terms)


# ---------------------------------------------------------------------------
# fractionalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Frac:
    num: Polynomial
    den: Polynomial
    den_nonneg: bool  # denominator is a product of probabilities / positive constants

    @property
    def is_poly(self) -> bool:
        return self.den == Polynomial.constant(1)


_ONE = Polynomial.constant(1)


def _to_frac(e: Expr, m: FunctionalModel, g: CausalGraph, cache: dict) -> _Frac:
    if isinstance(e, Prob):
        if e not in cache:
            cache[e] = polynomialize(e.events, m, g)
        return _Frac(cache[e], _ONE, True)
    if isinstance(e, Const):
        return _Frac(Polynomial.constant(e.value), _ONE, True)
    a = _to_frac(e.left, m, g, cache)
    b = _to_frac(e.right, m, g, cache)
    if isinstance(e, (Add, Sub)):
        sign = 1 if isinstance(e, Add) else -1
        if a.den == b.den:
            return _Frac(a.num + b.num * sign, a.den, a.den_nonneg)
        return _Frac(a.num * b.den + b.num * a.den * sign, a.den * b.den, a.den_nonneg and b.den_nonneg)
    if isinstance(e, Mul):
        return _Frac(a.num * b.num, a.den * b.den, a.den_nonneg and b.den_nonneg)
    if isinstance(e, Div):
        divisor_nonneg = isinstance(e.right, Prob) or (isinstance(e.right, Const) and e.right.value > 0)
        if b.num.is_constant() and b.num.constant_term() == 0:
            raise QueryError("division by zero constant")
        nonneg = a.den_nonneg and divisor_nonneg and b.is_poly
        return _Frac(a.num * b.den, a.den * b.num, nonneg)
    raise QueryError(f"unexpected node {type(e).__name__}")


def _natural_range(e: Expr) -> tuple[Fraction, Fraction] | None:
    """Interval containing the estimand value, or None when not inferable."""
    if isinstance(e, Prob):
        return Fraction(0), Fraction(1)
    if isinstance(e, Const):
        return e.value, e.value
    if isinstance(e, Div):
        if isinstance(e.left, Prob) and isinstance(e.right, Prob):
            if set(e.right.events) <= set(e.left.events):
                return Fraction(0), Fraction(1)
            return None
        if isinstance(e.right, Prob) and _is_prob_combination(e.left):
            return Fraction(-1), Fraction(1)
        return None
    a, b = _natural_range(e.left), _natural_range(e.right)
    if a is None or b is None:
        return None
    if isinstance(e, Add):
        return a[0] + b[0], a[1] + b[1]
    if isinstance(e, Sub):
        return a[0] - b[1], a[1] - b[0]
    if isinstance(e, Mul):
        c = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
        return min(c), max(c)
    return None


def _is_prob_combination(e: Expr) -> bool:
    if isinstance(e, Prob):
        return True
    if isinstance(e, (Add, Sub)):
        return _is_prob_combination(e.left) and _is_prob_combination(e.right)
    return False


def _has_div(e: Expr) -> bool:
    if isinstance(e, Div):
        return True
    if isinstance(e, (Add, Sub, Mul)):
        return _has_div(e.left) or _has_div(e.right)
    return False


@dataclass(frozen=True)
class Fractionalized:
    """Result of :func:`fractionalize`.

    When ``aux_box`` is None the estimand is the polynomial ``objective``.
    Otherwise the estimand is an auxiliary variable ``s`` (index ``aux_index``)
    tied to the model by ``denominator * s - numerator = 0``.
    """

    objective: Polynomial
    aux_index: int | None = None
    aux_box: tuple[Fraction, Fraction] | None = None
    numerator: Polynomial | None = None
    denominator: Polynomial | None = None

    @property
    def side_constraints(self) -> list[tuple[Polynomial, str, Fraction]]:
        if self.aux_index is None:
            return []
        s = Polynomial.variable(self.aux_index)
        return [(self.denominator * s - self.numerator, "=", Fraction(0))]


def fractionalize(
    q: Expr,
    m: FunctionalModel,
    g: CausalGraph | None = None,
    aux_index: int | None = None,
    estimand_range: tuple[float, float] | None = None,
) -> Fractionalized:
    """Turn an estimand into a polynomial objective, adding ``s`` for ratios."""
    g = g or m.graph
    if isinstance(q, Compare):
        raise QueryError("an estimand cannot contain a comparison")
    frac = _to_frac(q, m, g, {})
    if not _has_div(q) or frac.is_poly:
        return Fractionalized(frac.num)
    if aux_index is None:
        aux_index = m.n_params
    if estimand_range is not None:
        box = (Fraction(str(estimand_range[0])), Fraction(str(estimand_range[1])))
    else:
        box = _natural_range(q)
        if box is None:
            raise QueryError("cannot infer a range for this ratio estimand; supply an estimand range")
    if box[0] > box[1]:
        raise QueryError("empty estimand range")
    return Fractionalized(
        objective=Polynomial.variable(aux_index),
        aux_index=aux_index,
        aux_box=box,
        numerator=frac.num,
        denominator=frac.den,
    )


_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "=", "!=": "!="}


def statement_relation(
    stmt: Compare, m: FunctionalModel, g: CausalGraph | None = None
) -> tuple[Polynomial, str, Fraction] | None:
    """Polynomial form ``poly rel rhs`` of a comparison statement.

    Ratios are cleared by multiplying through by the denominator, which must be
    a product of probabilities for inequalities.  Strict inequalities are
    replaced by their closures; ``!=`` carries no information about the closure
    of the feasible set and yields None.
    """
    g = g or m.graph
    if stmt.op == "!=":
        return None
    frac = _to_frac(Sub(stmt.left, stmt.right), m, g, {})
    rel = {"<": "<=", ">": ">="}.get(stmt.op, stmt.op)
    if not frac.is_poly and rel != "=" and not frac.den_nonneg:
        raise QueryError("inequality with a denominator of unknown sign")
    poly = frac.num
    rhs = -poly.constant_term()
    poly = poly + rhs
    return poly, rel, rhs


def iter_events(e: Expr | Compare) -> Iterator[CounterfactualEvent]:
    if isinstance(e, Prob):
        yield from e.events
    elif isinstance(e, Const):
        return
    else:
        yield from iter_events(e.left)
        yield from iter_events(e.right)
