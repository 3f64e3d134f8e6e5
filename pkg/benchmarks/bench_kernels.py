"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on the same inputs through both paths; the outputs are
compared before timing so a speedup never hides a disagreement.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sharpbounds import kernels
from sharpbounds._accel import HAVE_NUMBA
from sharpbounds.graph import parse_graph
from sharpbounds.harness import load_scenario, population_evidence
from sharpbounds.polynomial import PolySystem
from sharpbounds.program import build_program
from sharpbounds.solver import Feasibility


def _six_node_system() -> tuple[PolySystem, int]:
    g = parse_graph(
        "A->B; B->C; C->D; A->E; E->C; D->F; U1->B; U1->D; U2->A; U2->C; U2->E; U3->D; U3->F\n"
        "latent: U2, U3, U1\ncard: A=2, B=2, C=2, D=2, E=2, F=2"
    )
    p = build_program(g, None, [], "P(F=1)", factorize=False)
    polys = [p.objective]
    # the 64 naive evidence cells
    from sharpbounds.query import CounterfactualEvent, polynomialize

    m = p.meta["model"]
    names = list(g.main_names)
    for k in range(64):
        vals = [(k >> (5 - i)) & 1 for i in range(6)]
        polys.append(polynomialize([CounterfactualEvent.make(v, {}, x) for v, x in zip(names, vals)], m, g))
    return PolySystem(polys, p.n_vars), p.n_vars


def _timeit(fn, repeat: int) -> float:
    fn()  # warm-up (and numba compilation)
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def _both(fn, repeat: int) -> tuple[float, float | None, object, object]:
    kernels.USE_NUMBA = False
    out_np = fn()
    t_np = _timeit(fn, repeat)
    t_nb, out_nb = None, None
    if HAVE_NUMBA:
        kernels.USE_NUMBA = True
        out_nb = fn()
        t_nb = _timeit(fn, repeat)
    return t_np, t_nb, out_np, out_nb


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--batch", type=int, default=2000)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    rows = []

    sysm, n = _six_node_system()
    X = rng.random((args.batch, n))
    t_np, t_nb, a, b = _both(lambda: kernels.eval_system_batch(sysm, X), args.repeat)
    if b is not None:
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12)
    rows.append((f"eval_system_batch (64 cells, {n} vars, {args.batch} points)", t_np, t_nb))

    x = X[0]
    t_np, t_nb, a, b = _both(lambda: kernels.jac_system(sysm, x), args.repeat)
    if b is not None:
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12)
    rows.append(("jac_system (same system)", t_np, t_nb))

    phat = rng.dirichlet(np.ones(64))
    t_np, t_nb, a, b = _both(lambda: kernels.kl_bounds(phat, 0.01), args.repeat)
    if b is not None:
        assert np.allclose(a[0], b[0], atol=1e-12) and np.allclose(a[1], b[1], atol=1e-12)
    rows.append(("kl_bounds (K=64)", t_np, t_nb))

    sc = load_scenario("nonresponse")
    prog = build_program(sc.graph, population_evidence(sc.dgp), sc.assumptions, "ATE(X,Y)", factorize=False)
    feas = Feasibility(prog)
    x0 = feas.random_point(np.random.default_rng(1))
    t_np, t_nb, a, b = _both(lambda: feas.penalty_descent(x0, sign=1.0, restarts=2), args.repeat)
    rows.append((f"penalty coordinate search (nonresponse, {prog.n_vars} vars)", t_np, t_nb))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy ms':>10}  {'numba ms':>10}  {'speedup':>8}")
    for name, t_np, t_nb in rows:
        nb = f"{1e3 * t_nb:10.3f}" if t_nb is not None else f"{'n/a':>10}"
        sp = f"{t_np / t_nb:8.1f}" if t_nb else f"{'':>8}"
        print(f"{name:<{width}}  {1e3 * t_np:10.3f}  {nb}  {sp}")


if __name__ == "__main__":
    main()
