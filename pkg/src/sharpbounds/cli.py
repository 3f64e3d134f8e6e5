"""Command-line interface: ``sharpbounds {bound,simulate,ci-study,dump-strata}``."""

from __future__ import annotations

import argparse
import json
import platform
import sys
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np
import scipy

from . import __version__
from ._accel import backend
from .graph import GraphError, canonicalize, parse_graph
from .harness import (
    SCENARIOS,
    STUDY_OPTIONS,
    DgpError,
    bias_study,
    coverage_study,
    load_dgp,
    load_scenario,
    param_vector,
    run_scenario,
)
from .inference import InferenceError, confidence_regions, loosen
from .program import EvidenceError, build_program, load_evidence, simplify
from .query import QueryError
from .solver import PROGRESS_HEADER, BoundsResult, SolveOptions, solve
from .strata import build_functional_model, format_strata, reduce_deterministic

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2


class InputError(Exception):
    pass


def _read(path: str | None, what: str) -> str:
    if path is None:
        raise InputError(f"missing --{what}")
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {what} file {path!r}: {exc.strerror}") from None


def _lines(text: str) -> list[str]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def _query_text(text: str) -> str:
    lines = _lines(text)
    if not lines:
        raise InputError("query file is empty")
    first = lines[0]
    label, sep, expr = first.partition(":")
    return expr.strip() if sep and label.strip().isidentifier() else first


def _versions() -> dict:
    return {
        "sharpbounds": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "backend": backend(),
    }


def _options(args: argparse.Namespace) -> SolveOptions:
    return SolveOptions(
        eps_thresh=args.eps_thresh,
        theta_thresh=args.theta_thresh,
        time_limit=args.time_limit,
        seed=args.seed,
        threads=args.threads,
    )


def _progress_sink(path: str | None) -> tuple[TextIO | None, object]:
    if path is None:
        return None, None
    fh = sys.stdout if path == "-" else open(path, "w")
    fh.write(PROGRESS_HEADER + "\n")

    def emit(rec) -> None:
        fh.write(rec.csv() + "\n")

    return fh, emit


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _estimand_range(text: str | None) -> tuple[float, float] | None:
    if text is None:
        return None
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise InputError("--estimand-range expects 'lo,hi'") from None
    return lo, hi


# ---------------------------------------------------------------------------
# bound
# ---------------------------------------------------------------------------


def cmd_bound(args: argparse.Namespace) -> int:
    g = parse_graph(_read(args.graph, "graph"))
    evidence = load_evidence(_read(args.evidence, "evidence")) if args.evidence else None
    assumptions = _lines(_read(args.assumptions, "assumptions")) if args.assumptions else []
    query = _query_text(_read(args.query, "query"))
    factorize = {"auto": "auto", "on": True, "off": False}[args.factorize]
    rng = _estimand_range(args.estimand_range)
    opts = _options(args)
    fh, emit = _progress_sink(args.progress)
    notes: list[str] = []
    try:
        estimated = None
        if args.ci_method != "none":
            est_prog = simplify(build_program(g, evidence, assumptions, query, factorize=factorize, estimand_range=rng))
            estimated = solve(est_prog, opts)
            base = build_program(g, evidence, assumptions, query, factorize=False, estimand_range=rng)
            regions = confidence_regions(base, args.alpha, args.ci_method)
            if len(regions) > 1:
                notes.append(f"Bonferroni split of 1 - alpha across {len(regions)} evidence tables")
            prog = simplify(loosen(base, regions))
        else:
            prog = simplify(build_program(g, evidence, assumptions, query, factorize=factorize, estimand_range=rng))
        res = solve(prog, SolveOptions(**{**opts.__dict__, "progress": emit}))
    finally:
        if fh is not None and fh is not sys.stdout:
            fh.close()
    doc = _result_doc(res, args, reproducible=args.reproducible)
    if estimated is not None:
        doc["estimated"] = _result_doc(estimated, None, reproducible=args.reproducible)
        if res.status != "infeasible" and estimated.status != "infeasible":
            tol = 1e-7
            if res.dual_lo > estimated.primal_lo + tol or res.dual_hi < estimated.primal_hi - tol:
                notes.append("confidence bounds do not contain the estimated bounds")
    if notes:
        doc["notes"] = notes
    _write(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    if res.status == "infeasible":
        print("infeasible: no model satisfies the graph, evidence and assumptions", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _result_doc(res: BoundsResult, args: argparse.Namespace | None, reproducible: bool) -> dict:
    doc = res.to_dict(timing=not reproducible)
    if res.status == "infeasible":
        doc["certificate"] = res.certificate
    if args is not None:
        echo = {
            k: v
            for k, v in sorted(vars(args).items())
            if k not in ("func", "out", "progress", "reproducible") and not callable(v)
        }
        doc["config_echo"] = {"args": echo, "versions": _versions()}
    return doc


# ---------------------------------------------------------------------------
# simulate / ci-study / dump-strata
# ---------------------------------------------------------------------------


def _scenario_rows(names: Sequence[str], opts: SolveOptions, all_queries: bool) -> str:
    rows = ["scenario,query,status,dual_lo,dual_hi,primal_lo,primal_hi,iterations"]
    for name in names:
        sc = load_scenario(name)
        labels = list(sc.queries) if all_queries else [next(iter(sc.queries))]
        for label in labels:
            r = run_scenario(sc, opts, query=label).result
            rows.append(
                f"{name},{label},{r.status},{r.dual_lo:.10g},{r.dual_hi:.10g},"
                f"{r.primal_lo:.10g},{r.primal_hi:.10g},{r.iterations}"
            )
    return "\n".join(rows) + "\n"


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.list:
        _write("\n".join(SCENARIOS) + "\n", args.out)
        return EXIT_OK
    if args.coverage or args.bias:
        return _study(args, "coverage" if args.coverage else "bias")
    if args.scenario is None:
        raise InputError("simulate needs --scenario, --list, --coverage or --bias")
    names = SCENARIOS if args.scenario == "all" else [args.scenario]
    for n in names:
        if n not in SCENARIOS:
            raise InputError(f"unknown scenario {n!r}; known: {', '.join(SCENARIOS)}")
    _write(_scenario_rows(names, _options(args), args.all_queries), args.out)
    return EXIT_OK


def _study(args: argparse.Namespace, kind: str) -> int:
    scenario = args.scenario or "iv_exclusion"
    opts = SolveOptions(
        eps_thresh=args.study_eps, theta_thresh=STUDY_OPTIONS.theta_thresh, time_limit=args.time_limit, seed=args.seed
    )
    if kind == "bias":
        res = bias_study(scenario, n=args.n, reps=args.reps, seed=args.seed, opts=opts)
        summary = {"mean_estimated": res.mean_estimated, "infeasible_draws": res.n_infeasible}
    else:
        methods = ("kl", "gaussian") if args.ci_method in (None, "both") else (args.ci_method,)
        res = coverage_study(
            scenario, n=args.n, reps=args.reps, seed=args.seed, alpha=args.alpha, methods=methods, opts=opts
        )
        summary = {
            "mean_estimated": res.mean_estimated,
            "coverage": {m: res.coverage(m) for m in methods},
            "kl_wider": res.kl_wider if len(methods) == 2 else None,
        }
    summary.update({"scenario": scenario, "population": res.population, "n": args.n, "reps": args.reps, "seed": args.seed})
    _write(res.csv(), args.out)
    print(json.dumps(summary, sort_keys=True), file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK


def cmd_ci_study(args: argparse.Namespace) -> int:
    args.coverage, args.bias = True, False
    return _study(args, "coverage")


def cmd_dump_strata(args: argparse.Namespace) -> int:
    probs = None
    if args.dgp:
        d = load_dgp(_read(args.dgp, "dgp"))
        g = d.graph
        m = d.model
        x = param_vector(d)
        probs = {u: x[m.parameters[u]] for u in m.disturbances}
    else:
        g = canonicalize(parse_graph(_read(args.graph, "graph")))
        m = build_functional_model(g)
        if g.deterministic_relations and not args.no_reduce:
            m = reduce_deterministic(m, g)
    _write(format_strata(m, probs), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _solver_flags(p: argparse.ArgumentParser, eps: float = 1e-4) -> None:
    p.add_argument("--eps-thresh", type=float, default=eps, help="stop when the looseness factor is below this")
    p.add_argument("--theta-thresh", type=float, default=1e-6, help="dual width regarded as a point")
    p.add_argument("--time-limit", type=float, default=300.0, help="seconds per solve")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None, help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sharpbounds", description=__doc__)
    ap.add_argument("--version", action="version", version=f"sharpbounds {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="bound a causal query")
    b.add_argument("--graph", required=False)
    b.add_argument("--evidence")
    b.add_argument("--assumptions")
    b.add_argument("--query")
    b.add_argument("--alpha", type=float, default=0.95, help="confidence level")
    b.add_argument("--ci-method", choices=("kl", "gaussian", "none"), default="none")
    b.add_argument("--factorize", choices=("auto", "on", "off"), default="auto")
    b.add_argument("--estimand-range", help="box for a ratio estimand, 'lo,hi'")
    b.add_argument("--progress", help="CSV path for the progress stream ('-' for stdout)")
    b.add_argument("--reproducible", action="store_true", help="omit wall-clock fields")
    _solver_flags(b)
    b.set_defaults(func=cmd_bound)

    s = sub.add_parser("simulate", help="run packaged scenarios or repeated-sampling studies")
    s.add_argument("--scenario", help="scenario name or 'all'")
    s.add_argument("--list", action="store_true")
    s.add_argument("--all-queries", action="store_true", help="also bound secondary queries (LATE)")
    s.add_argument("--coverage", action="store_true")
    s.add_argument("--bias", action="store_true")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--reps", type=int, default=200)
    s.add_argument("--alpha", type=float, default=0.95)
    s.add_argument("--ci-method", choices=("kl", "gaussian", "both"), default="both")
    s.add_argument("--study-eps", type=float, default=STUDY_OPTIONS.eps_thresh)
    _solver_flags(s)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("ci-study", help="coverage study of confidence bounds")
    c.add_argument("--scenario", default="iv_exclusion")
    c.add_argument("--n", type=int, default=1000)
    c.add_argument("--reps", type=int, default=200)
    c.add_argument("--alpha", type=float, default=0.95)
    c.add_argument("--ci-method", choices=("kl", "gaussian", "both"), default="both")
    c.add_argument("--study-eps", type=float, default=STUDY_OPTIONS.eps_thresh)
    _solver_flags(c)
    c.set_defaults(func=cmd_ci_study)

    d = sub.add_parser("dump-strata", help="print the functional model's strata")
    d.add_argument("--graph")
    d.add_argument("--dgp", help="DGP TOML; prints its probabilities")
    d.add_argument("--no-reduce", action="store_true", help="keep strata ruled out by deterministic relations")
    d.add_argument("--out")
    d.set_defaults(func=cmd_dump_strata)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, GraphError, QueryError, EvidenceError, DgpError, InferenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
