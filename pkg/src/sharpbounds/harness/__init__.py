"""Strata-table data-generating processes and the packaged simulation scenarios."""

from __future__ import annotations

import itertools
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from ..graph import CausalGraph, canonicalize, parse_graph
from ..inference import InferenceError, confidence_regions, loosen
from ..program import Evidence, EvidenceTable, PolynomialProgram, build_program, simplify
from ..query import CounterfactualEvent, polynomialize
from ..solver import BoundsResult, SolveOptions, solve
from ..strata import FunctionalModel, build_functional_model, reduce_deterministic

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = [
    "DgpError",
    "StrataDgp",
    "load_dgp",
    "dump_dgp",
    "param_vector",
    "population_evidence",
    "sample",
    "SCENARIOS",
    "scenario_names",
    "Scenario",
    "load_scenario",
    "run_scenario",
    "ScenarioRun",
    "StudyDraw",
    "StudyResult",
    "STUDY_OPTIONS",
    "bias_study",
    "coverage_study",
    "manski_nonresponse",
    "manski_joint_missingness",
]

SCENARIOS = (
    "iv_overcautious",
    "iv_exclusion",
    "iv_monotonic",
    "selection",
    "measurement",
    "nonresponse",
    "joint_missingness",
)

# printed tables are rounded to six decimals
NORMALIZE_TOL = 1e-5


class DgpError(ValueError):
    pass


def _exact(v: float | int | str | Fraction) -> Fraction:
    if isinstance(v, float):
        return Fraction(repr(v))
    return Fraction(v)


@dataclass
class StrataDgp:
    """Distributions over the named strata of each disturbance of ``graph``.

    ``observe`` lists the observed variables; ``given`` conditions the observed
    table on a factual event (selection); ``known`` lists scalar probabilities
    of factual events reported exactly alongside the table.
    """

    graph_text: str
    strata: dict[str, dict[str, float]]
    observe: tuple[str, ...]
    given: tuple[tuple[str, int], ...] = ()
    known: tuple[str, ...] = ()
    name: str = ""
    description: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def graph(self) -> CausalGraph:
        if "graph" not in self._cache:
            self._cache["graph"] = canonicalize(parse_graph(self.graph_text))
        return self._cache["graph"]

    @property
    def model(self) -> FunctionalModel:
        if "model" not in self._cache:
            g = self.graph
            m = build_functional_model(g)
            if g.deterministic_relations:
                m = reduce_deterministic(m, g)
            self._cache["model"] = m
        return self._cache["model"]


# ---------------------------------------------------------------------------
# TOML round trip
# ---------------------------------------------------------------------------


def _parse_given(text: str) -> tuple[tuple[str, int], ...]:
    out = []
    for part in text.split(","):
        if part.strip():
            v, x = part.split("=")
            out.append((v.strip(), int(x)))
    return tuple(out)


def load_dgp(text: str) -> StrataDgp:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise DgpError(f"invalid TOML: {exc}") from None
    if "graph" not in doc or "strata" not in doc or "observe" not in doc:
        raise DgpError("a DGP needs 'graph', [strata.*] and [observe]")
    obs = doc["observe"]
    strata = {u: {str(k): float(v) for k, v in tab.items()} for u, tab in doc["strata"].items()}
    return StrataDgp(
        graph_text=doc["graph"],
        strata=strata,
        observe=tuple(obs["vars"]),
        given=_parse_given(obs.get("given", "")),
        known=tuple(obs.get("known", ())),
        name=doc.get("name", ""),
        description=doc.get("description", ""),
    )


def _toml_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def dump_dgp(d: StrataDgp) -> str:
    lines = []
    if d.name:
        lines.append(f"name = {_toml_str(d.name)}")
    if d.description:
        lines.append(f"description = {_toml_str(d.description)}")
    lines.append('graph = """')
    lines.append(d.graph_text.strip("\n"))
    lines.append('"""')
    lines.append("")
    lines.append("[observe]")
    lines.append("vars = [" + ", ".join(_toml_str(v) for v in d.observe) + "]")
    if d.given:
        lines.append("given = " + _toml_str(",".join(f"{v}={x}" for v, x in d.given)))
    if d.known:
        lines.append("known = [" + ", ".join(_toml_str(k) for k in d.known) + "]")
    for u, tab in d.strata.items():
        lines.append("")
        lines.append(f"[strata.{_toml_str(u)}]")
        for k, v in tab.items():
            lines.append(f"{_toml_str(k)} = {float(v)!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# population evidence and sampling
# ---------------------------------------------------------------------------


def param_vector(d: StrataDgp, exact: bool = False) -> np.ndarray | list[Fraction]:
    """The DGP as a point of the functional model's parameter space.

    Each distribution is renormalised exactly when it sums to 1 within the
    rounding of the printed tables.  A disturbance with a single stratum may
    be omitted.
    """
    m = d.model
    x = [Fraction(0)] * m.n_params
    for u in m.disturbances:
        tab = d.strata.get(u)
        if tab is None:
            if m.domain_size(u) == 1:
                x[m.parameters[u].start] = Fraction(1)
                continue
            raise DgpError(f"no strata table for disturbance {u!r}")
        vals = {}
        for name, v in tab.items():
            try:
                j = m.stratum_index(u, name)
            except KeyError:
                raise DgpError(f"{name!r} is not a stratum of {u!r}; expected names like {m.stratum_names(u)[0]!r}") from None
            p = _exact(v)
            if p < 0:
                raise DgpError(f"negative probability for {u}[{name}]")
            vals[j] = p
        total = sum(vals.values())
        if abs(total - 1) > NORMALIZE_TOL:
            raise DgpError(f"strata of {u!r} sum to {float(total)}")
        for j, p in vals.items():
            x[m.parameters[u].start + j] = p / total
    for u in d.strata:
        if u not in m.disturbances:
            raise DgpError(f"{u!r} is not a disturbance of the DGP graph {m.disturbances}")
    return x if exact else np.array([float(v) for v in x])


def _factual(u: Mapping[str, int], m: FunctionalModel, order: Sequence[str]) -> dict[str, int]:
    vals: dict[str, int] = {}
    for v in order:
        cell = 0
        for inp in m.inputs[v]:
            x = u[inp.name] if inp.latent else vals[inp.name]
            cell = cell * inp.card + x
        gov = m.governing[v]
        vals[v] = int(m.domains[gov][u[gov], m.columns[v].start + cell])
    return vals


def _joint(d: StrataDgp) -> dict[tuple[int, ...], Fraction]:
    """Exact joint law of all main variables, by enumeration over strata."""
    if "joint" in d._cache:
        return d._cache["joint"]
    m, g = d.model, d.graph
    x = param_vector(d, exact=True)
    order = g.main_topological_order()
    mains = list(g.main_names)
    supports = []
    for u in m.disturbances:
        r = m.parameters[u]
        supports.append([(i, x[r.start + i]) for i in range(len(r)) if x[r.start + i] > 0])
    out: dict[tuple[int, ...], Fraction] = {}
    for combo in itertools.product(*supports):
        p = Fraction(1)
        for _, q in combo:
            p *= q
        vals = _factual({u: i for u, (i, _) in zip(m.disturbances, combo)}, m, order)
        key = tuple(vals[v] for v in mains)
        out[key] = out.get(key, Fraction(0)) + p
    d._cache["joint"] = out
    return out


def _label(g: CausalGraph, v: str, x: int) -> int | str:
    return "NA" if g.na_value(v) == x else x


def _marginal(d: StrataDgp, event: Sequence[tuple[str, int]]) -> Fraction:
    mains = list(d.graph.main_names)
    idx = [(mains.index(v), x) for v, x in event]
    return sum((p for k, p in _joint(d).items() if all(k[i] == x for i, x in idx)), Fraction(0))


def population_evidence(d: StrataDgp, keep_zero: bool = False) -> Evidence:
    """Exact observed table (conditioned on ``given``) plus the ``known`` scalars.

    Cells with probability zero are dropped unless ``keep_zero``; their
    constraints are implied by the remaining cells summing to one.
    """
    g = d.graph
    mains = list(g.main_names)
    for v in d.observe + tuple(v for v, _ in d.given):
        if v not in mains:
            raise DgpError(f"observable {v!r} is not a main variable of the DGP graph")
    joint = _joint(d)
    pos = [mains.index(v) for v in d.observe]
    gpos = [(mains.index(v), x) for v, x in d.given]
    table: dict[tuple[int, ...], Fraction] = {}
    for key in itertools.product(*(range(g.card(v)) for v in d.observe)):
        table[key] = Fraction(0)
    den = Fraction(0)
    for k, p in joint.items():
        if all(k[i] == x for i, x in gpos):
            table[tuple(k[i] for i in pos)] += p
            den += p
    if den == 0:
        raise DgpError("the conditioning event has probability zero")
    cells, probs = [], []
    for key, p in table.items():
        if p == 0 and not keep_zero:
            continue
        cells.append(tuple((v, _label(g, v, x)) for v, x in zip(d.observe, key)))
        probs.append(p / den)
    statements = []
    for text in d.known:
        ev = _parse_given(text.strip()[2:-1]) if text.strip().startswith("P(") else None
        if ev is None:
            raise DgpError(f"known quantities must be factual probabilities like 'P(S=0)', got {text!r}")
        statements.append(f"{text} = {_fraction_literal(_marginal(d, ev))}")
    t = EvidenceTable(tuple(cells), tuple(probs), given=tuple(d.given))
    return Evidence((t,), tuple(statements))


def _fraction_literal(q: Fraction) -> str:
    den = q.denominator
    k = 0
    while den % 2 == 0 or den % 5 == 0:
        den //= 2 if den % 2 == 0 else 5
        k += 1
    if den == 1:
        digits = max(k, 1)
        scaled = q.numerator * (10**digits // q.denominator)
        s = str(abs(scaled)).rjust(digits + 1, "0")
        return ("-" if q < 0 else "") + s[:-digits] + "." + s[-digits:]
    return f"{q.numerator}/{q.denominator}"


def sample(d: StrataDgp, n: int, seed: int | np.random.SeedSequence) -> Evidence:
    """Multinomial counts from the population table with numpy's PCG64."""
    if n <= 0:
        raise DgpError("sample size must be positive")
    pop = population_evidence(d)
    t = pop.tables[0]
    rng = np.random.Generator(np.random.PCG64(seed))
    p = np.array([float(q) for q in t.probs])
    counts = rng.multinomial(n, p / p.sum())
    probs = [Fraction(int(c), n) for c in counts]
    return Evidence((t.with_probs(probs, [int(c) for c in counts]),), pop.statements)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


def scenario_names() -> tuple[str, ...]:
    return SCENARIOS


def _fixture_dir() -> Path:
    return Path(str(resources.files("sharpbounds.harness") / "fixtures"))


def _lines(text: str) -> list[str]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


@dataclass
class Scenario:
    name: str
    graph_text: str
    dgp: StrataDgp
    assumptions: tuple[str, ...]
    queries: dict[str, str]

    @property
    def graph(self) -> CausalGraph:
        return parse_graph(self.graph_text)


def load_scenario(name: str, root: str | Path | None = None) -> Scenario:
    base = Path(root) if root is not None else _fixture_dir()
    path = base / name
    if not path.is_dir():
        raise DgpError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
    queries: dict[str, str] = {}
    for line in _lines((path / "query.txt").read_text()):
        label, _, expr = line.partition(":")
        if not expr:
            label, expr = f"q{len(queries)}", label
        queries[label.strip()] = expr.strip()
    return Scenario(
        name=name,
        graph_text=(path / "graph.txt").read_text(),
        dgp=load_dgp((path / "dgp.toml").read_text()),
        assumptions=tuple(_lines((path / "assumptions.txt").read_text())),
        queries=queries,
    )


@dataclass
class ScenarioRun:
    scenario: str
    query: str
    result: BoundsResult
    program: PolynomialProgram


def _program(sc: Scenario, evidence: Evidence, query: str, factorize: bool | str = "auto") -> PolynomialProgram:
    return simplify(build_program(sc.graph, evidence, sc.assumptions, query, factorize=factorize))


def run_scenario(
    name: str | Scenario,
    opts: SolveOptions | None = None,
    *,
    query: str | None = None,
    evidence: Evidence | None = None,
    **kw,
) -> ScenarioRun:
    """Population bounds for a packaged scenario (first query unless named).

    ``query`` is a label from ``query.txt`` or a literal expression.
    """
    sc = name if isinstance(name, Scenario) else load_scenario(name)
    label = query or next(iter(sc.queries))
    expr = sc.queries.get(label, label)
    ev = evidence if evidence is not None else population_evidence(sc.dgp)
    p = _program(sc, ev, expr)
    return ScenarioRun(sc.name, expr, solve(p, opts, **kw), p)


# ---------------------------------------------------------------------------
# repeated-sampling studies
# ---------------------------------------------------------------------------


@dataclass
class StudyDraw:
    index: int
    counts: tuple[int, ...]
    estimated: tuple[float, float] | None
    status: str
    kl: tuple[float, float] | None = None
    gaussian: tuple[float, float] | None = None
    note: str = ""


@dataclass
class StudyResult:
    scenario: str
    n: int
    reps: int
    seed: int
    population: tuple[float, float]
    draws: list[StudyDraw]
    alpha: float | None = None

    def _feasible(self) -> list[StudyDraw]:
        return [d for d in self.draws if d.estimated is not None]

    @property
    def mean_estimated(self) -> tuple[float, float]:
        f = self._feasible()
        if not f:
            return (math.nan, math.nan)
        return (float(np.mean([d.estimated[0] for d in f])), float(np.mean([d.estimated[1] for d in f])))

    @property
    def n_infeasible(self) -> int:
        return sum(d.status == "infeasible" for d in self.draws)

    def coverage(self, method: str, tol: float = 1e-7) -> float:
        lo, hi = self.population
        vals = [getattr(d, method) for d in self.draws]
        hit = [v is not None and v[0] <= lo + tol and v[1] >= hi - tol for v in vals]
        return float(np.mean(hit))

    @property
    def kl_wider(self) -> float:
        wider = [
            d.kl is not None and d.gaussian is not None and d.kl[1] - d.kl[0] > d.gaussian[1] - d.gaussian[0]
            for d in self.draws
        ]
        return float(np.mean(wider))

    def csv(self) -> str:
        rows = ["draw,status,est_lo,est_hi,kl_lo,kl_hi,gauss_lo,gauss_hi"]
        fmt = lambda v: ("", "") if v is None else (f"{v[0]:.10g}", f"{v[1]:.10g}")  # noqa: E731
        for d in self.draws:
            rows.append(",".join([str(d.index), d.status, *fmt(d.estimated), *fmt(d.kl), *fmt(d.gaussian)]))
        return "\n".join(rows) + "\n"


def _draw_seeds(seed: int, reps: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(reps)


def _run_draws(fn: Callable[[int], StudyDraw], reps: int, threads: int) -> list[StudyDraw]:
    if threads <= 1:
        return [fn(i) for i in range(reps)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(reps)))


def _interval(r: BoundsResult, outer: bool = False) -> tuple[float, float] | None:
    if r.status == "infeasible":
        return None
    return (r.dual_lo, r.dual_hi) if outer else r.bounds


STUDY_OPTIONS = SolveOptions(eps_thresh=1e-2, time_limit=60.0)


def bias_study(
    scenario: str = "iv_exclusion",
    n: int = 10_000,
    reps: int = 200,
    seed: int = 0,
    *,
    opts: SolveOptions | None = None,
    threads: int = 1,
    query: str | None = None,
) -> StudyResult:
    """Plug-in (estimated) bounds over repeated multinomial samples."""
    sc = load_scenario(scenario)
    label = query or next(iter(sc.queries))
    expr = sc.queries.get(label, label)
    opts = opts or STUDY_OPTIONS
    pop = run_scenario(sc, opts, query=expr).result.bounds
    seeds = _draw_seeds(seed, reps)

    def one(i: int) -> StudyDraw:
        ev = sample(sc.dgp, n, seeds[i])
        r = solve(_program(sc, ev, expr), opts)
        return StudyDraw(i, ev.tables[0].counts, _interval(r), r.status)

    return StudyResult(sc.name, n, reps, seed, pop, _run_draws(one, reps, threads))


def coverage_study(
    scenario: str = "iv_exclusion",
    n: int = 1_000,
    reps: int = 200,
    seed: int = 0,
    alpha: float = 0.95,
    *,
    methods: Iterable[str] = ("kl", "gaussian"),
    opts: SolveOptions | None = None,
    threads: int = 1,
    query: str | None = None,
) -> StudyResult:
    """Estimated and confidence bounds over repeated samples.

    Confidence bounds are the solver's dual (outer) bounds, valid whether or
    not the run reached its looseness threshold.
    """
    sc = load_scenario(scenario)
    label = query or next(iter(sc.queries))
    expr = sc.queries.get(label, label)
    opts = opts or STUDY_OPTIONS
    pop = run_scenario(sc, opts, query=expr).result.bounds
    seeds = _draw_seeds(seed, reps)
    methods = tuple(methods)

    def one(i: int) -> StudyDraw:
        ev = sample(sc.dgp, n, seeds[i])
        r = solve(_program(sc, ev, expr), opts)
        draw = StudyDraw(i, ev.tables[0].counts, _interval(r), r.status)
        base = build_program(sc.graph, ev, sc.assumptions, expr, factorize=False)
        for method in methods:
            try:
                regions = confidence_regions(base, alpha, method)  # type: ignore[arg-type]
            except InferenceError as exc:
                draw.note += f"{method}: {exc}; "
                continue
            rc = solve(simplify(loosen(base, regions)), opts)
            setattr(draw, method, _interval(rc, outer=True))
        return draw

    return StudyResult(sc.name, n, reps, seed, pop, _run_draws(one, reps, threads), alpha)


# ---------------------------------------------------------------------------
# closed-form worst-case oracles
# ---------------------------------------------------------------------------


def _cells(ev: Evidence) -> dict[tuple, float]:
    t = ev.tables[0]
    return {tuple(c): float(p) for c, p in zip(t.cells, t.probs)}


def manski_nonresponse(ev: Evidence, x: str = "X", r: str = "R", y: str = "Ystar") -> tuple[float, float]:
    """Worst-case imputation of missing outcomes with a fully observed treatment.

    For each arm, ``P(Y=1 | X=x)`` lies between ``P(Y=1, R=1 | x)`` and that
    plus ``P(R=0 | x)``.
    """
    cells = _cells(ev)

    def q(xv: int, rv: int | None = None, yv: int | str | None = None) -> float:
        tot = 0.0
        for c, p in cells.items():
            d = dict(c)
            if d[x] == xv and (rv is None or d[r] == rv) and (yv is None or d[y] == yv):
                tot += p
        return tot

    lo_arm, hi_arm = {}, {}
    for xv in (0, 1):
        px = q(xv)
        lo_arm[xv] = q(xv, 1, 1) / px
        hi_arm[xv] = (q(xv, 1, 1) + q(xv, 0)) / px
    return lo_arm[1] - hi_arm[0], hi_arm[1] - lo_arm[0]


def manski_joint_missingness(
    ev: Evidence, x: str = "Xstar", y: str = "Ystar"
) -> tuple[float, float]:
    """Worst case of ``P(Y=1|X=1) - P(Y=1|X=0)`` over all imputations of NA values.

    Mass with only ``Y`` missing is imputed adversarially within its arm.  Mass
    with ``X`` missing and ``Y`` observed is moved wholly to one arm, since the
    contrast is monotone in it.  Mass with both missing is split between the
    arms by a fraction ``c`` (with the adversarial outcome in each arm); the
    contrast is a ratio of affine functions of ``c``, so ``c`` is found on a
    dense grid refined by golden-section search.
    """
    cells = _cells(ev)
    m = {}
    for c, p in cells.items():
        d = dict(c)
        key = (d[x], d[y])
        m[key] = m.get(key, 0.0) + p
    get = lambda a, b: m.get((a, b), 0.0)  # noqa: E731
    obs = {(a, b): get(a, b) for a in (0, 1) for b in (0, 1)}
    ymiss = {a: get(a, "NA") for a in (0, 1)}
    xmiss = {b: get("NA", b) for b in (0, 1)}
    both = get("NA", "NA")

    def contrast(sign: int, a1: float, a0: float, c: float) -> float:
        # a1, a0: fractions of X-missing mass with Y=1 / Y=0 assigned to arm 1
        y1_arm1 = obs[(1, 1)] + a1 * xmiss[1]
        n_arm1 = obs[(1, 0)] + obs[(1, 1)] + a1 * xmiss[1] + a0 * xmiss[0] + ymiss[1] + c * both
        y1_arm0 = obs[(0, 1)] + (1 - a1) * xmiss[1]
        n_arm0 = obs[(0, 0)] + obs[(0, 1)] + (1 - a1) * xmiss[1] + (1 - a0) * xmiss[0] + ymiss[0] + (1 - c) * both
        if sign < 0:  # lower bound: arm 1 missing outcomes are 0, arm 0 are 1
            num1, num0 = y1_arm1, y1_arm0 + ymiss[0] + (1 - c) * both
        else:
            num1, num0 = y1_arm1 + ymiss[1] + c * both, y1_arm0
        if n_arm1 <= 0 or n_arm0 <= 0:
            return math.nan
        return num1 / n_arm1 - num0 / n_arm0

    def best(sign: int) -> float:
        vals = []
        grid = np.linspace(0.0, 1.0, 10_001)
        for a1 in (0.0, 1.0):
            for a0 in (0.0, 1.0):
                f = np.array([sign * contrast(sign, a1, a0, c) for c in grid])
                if np.all(np.isnan(f)):
                    continue
                k = int(np.nanargmax(f))
                lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
                g = (math.sqrt(5) - 1) / 2
                for _ in range(100):
                    c1, c2 = hi - g * (hi - lo), lo + g * (hi - lo)
                    if sign * contrast(sign, a1, a0, c1) >= sign * contrast(sign, a1, a0, c2):
                        hi = c2
                    else:
                        lo = c1
                vals.append(max(f[k], sign * contrast(sign, a1, a0, 0.5 * (lo + hi))))
        return sign * max(vals)

    return best(-1), best(+1)
