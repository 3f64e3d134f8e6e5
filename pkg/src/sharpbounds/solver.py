"""Anytime primal-dual spatial branch-and-bound over McCormick relaxations.

Two search trees run side by side, one minimising and one maximising the
objective.  Each tree keeps its open branches in a heap ordered by relaxation
value, so the branch attaining the outermost dual bound is refined first.  A
branch leaves the tree when its relaxation is infeasible (a certificate leaf)
or when its dual value cannot move the bound past the best primal point; the
dual values of the latter are kept in ``floor`` so the reported dual bound
stays valid after pruning.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .lp import LPResult, lp_solve
from .polynomial import PolySystem
from .program import PolynomialProgram
from .relax import BoxInfeasible, Relaxation

__all__ = [
    "FEAS_TOL",
    "SolveOptions",
    "Branch",
    "ProgressRecord",
    "BoundsResult",
    "Feasibility",
    "primal_search",
    "prune",
    "solve",
]

FEAS_TOL = 1e-8
SEARCH_BACKOFF_MAX = 64

Status = Literal["sharp", "interrupted", "infeasible", "point-identified"]


@dataclass(frozen=True)
class SolveOptions:
    eps_thresh: float = 1e-4
    theta_thresh: float = 1e-6
    time_limit: float = 300.0
    seed: int = 0
    threads: int = 1
    max_iterations: int | None = None
    obbt: bool = True
    primal_starts: int = 6
    progress: Callable[["ProgressRecord"], None] | None = field(default=None, compare=False)


@dataclass
class Branch:
    """A box of the relaxation's branchable columns with its relaxation value.

    ``dual_value`` is stated in the direction of the tree that owns the branch:
    a lower bound for the minimising tree, an upper bound for the maximising one.
    """

    box: np.ndarray
    dual_value: float
    id: int
    point: np.ndarray | None = None
    depth: int = 0


class ProgressRecord(NamedTuple):
    iter: int
    wall_ms: float
    dual_lo: float
    dual_hi: float
    primal_lo: float
    primal_hi: float
    theta: float
    epsilon: float | None
    open_branches: int

    def csv(self) -> str:
        eps = "" if self.epsilon is None else f"{self.epsilon:.10g}"
        return (
            f"{self.iter},{self.wall_ms:.3f},{self.dual_lo:.12g},{self.dual_hi:.12g},"
            f"{self.primal_lo:.12g},{self.primal_hi:.12g},{self.theta:.12g},{eps},{self.open_branches}"
        )


PROGRESS_HEADER = "iter,wall_ms,dual_lo,dual_hi,primal_lo,primal_hi,theta,epsilon,open_branches"


@dataclass
class BoundsResult:
    dual_lo: float
    dual_hi: float
    primal_lo: float
    primal_hi: float
    theta: float
    epsilon: float | None
    status: Status
    iterations: int
    wall_time: float
    witness_lo: np.ndarray | None = None
    witness_hi: np.ndarray | None = None
    trajectory: list[ProgressRecord] = field(default_factory=list)
    certificate: dict = field(default_factory=dict)

    @property
    def bounds(self) -> tuple[float, float]:
        """Best available bounds: primal when sharp or identified, else dual."""
        if self.status in ("sharp", "point-identified"):
            return self.primal_lo, self.primal_hi
        return self.dual_lo, self.dual_hi

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "status": self.status,
            "bounds": {
                "dual_lo": _num(self.dual_lo),
                "dual_hi": _num(self.dual_hi),
                "primal_lo": _num(self.primal_lo),
                "primal_hi": _num(self.primal_hi),
            },
            "theta": _num(self.theta),
            "iterations": self.iterations,
        }
        if self.epsilon is not None:
            out["epsilon"] = _num(self.epsilon)
        if timing:
            out["wall_ms"] = round(self.wall_time * 1000.0, 3)
        return out


def _num(v: float) -> float | None:
    return None if v is None or not math.isfinite(v) else float(v)


# ---------------------------------------------------------------------------
# feasibility and primal search
# ---------------------------------------------------------------------------


class Feasibility:
    """Numeric view of a program: objective, constraint values and violations."""

    def __init__(self, p: PolynomialProgram) -> None:
        self.program = p
        self.n = p.n_vars
        self.system = PolySystem([p.objective] + [c.poly for c in p.constraints], p.n_vars)
        kind = [0] + [{"=": 1, "<=": 2, ">=": 3}[c.relation] for c in p.constraints]
        self.kind = np.asarray(kind, dtype=np.int64)
        self.rhs = np.asarray([0.0] + [float(c.rhs) for c in p.constraints])
        self.lo = np.array([float(a) for a, _ in p.var_boxes])
        self.hi = np.array([float(b) for _, b in p.var_boxes])
        self.group_id = np.full(self.n, -1, dtype=np.int64)
        ptr = [0]
        idx: list[int] = []
        for k, grp in enumerate(p.simplex_groups):
            self.group_id[list(grp)] = k
            idx.extend(grp)
            ptr.append(len(idx))
        self.g_ptr = np.asarray(ptr, dtype=np.int64)
        self.g_idx = np.asarray(idx, dtype=np.int64)
        self.groups = [np.asarray(g, dtype=np.int64) for g in p.simplex_groups]
        self.free = np.nonzero(self.group_id < 0)[0]
        self._blocks = self._affine_blocks()

    def _affine_blocks(self) -> list[np.ndarray]:
        """Blocks (simplex groups, free variables) in which every polynomial is affine."""
        block_of = self.group_id.copy()
        nb = len(self.groups)
        for j, i in enumerate(self.free):
            block_of[i] = nb + j
        blocks = [g for g in self.groups] + [np.array([i]) for i in self.free]
        bad: set[int] = set()
        polys = [self.program.objective] + [c.poly for c in self.program.constraints]
        for poly in polys:
            for key, _ in poly.items():
                seen: set[int] = set()
                for f in key:
                    bs = {int(block_of[i]) for i in f}
                    for b in bs:
                        if b in seen:
                            bad.add(b)
                    seen |= bs
        return [blk for b, blk in enumerate(blocks) if b not in bad]

    def values(self, x: np.ndarray) -> np.ndarray:
        return self.system.evaluate(x)

    def objective(self, x: np.ndarray) -> float:
        return float(self.values(x)[0])

    def violation(self, x: np.ndarray, vals: np.ndarray | None = None) -> float:
        if vals is None:
            vals = self.values(x)
        r = vals[1:] - self.rhs[1:]
        k = self.kind[1:]
        v = np.where(k == 1, np.abs(r), np.where(k == 2, np.maximum(r, 0.0), np.maximum(-r, 0.0)))
        worst = float(v.max()) if v.size else 0.0
        for g in self.groups:
            worst = max(worst, abs(float(x[g].sum()) - 1.0))
        worst = max(worst, float(np.max(self.lo - x, initial=0.0)), float(np.max(x - self.hi, initial=0.0)))
        return worst

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        for g in self.groups:
            s = x[g].sum()
            x[g] = x[g] / s if s > 0 else 1.0 / len(g)
        return x

    def random_point(self, rng: np.random.Generator, box: np.ndarray | None = None) -> np.ndarray:
        x = np.empty(self.n)
        for g in self.groups:
            x[g] = rng.dirichlet(np.ones(len(g)))
        lo, hi = (self.lo, self.hi) if box is None else (box[: self.n, 0], box[: self.n, 1])
        x[self.free] = rng.uniform(lo[self.free], hi[self.free])
        return x

    # -- local methods ---------------------------------------------------
    def penalty_descent(self, x: np.ndarray, sign: float, restarts: int = 5, rho0: float = 10.0) -> np.ndarray:
        rho = rho0
        for _ in range(restarts):
            x, _ = kernels.penalty_search(
                self.system,
                x,
                self.kind,
                self.rhs,
                self.group_id,
                self.g_ptr,
                self.g_idx,
                self.lo,
                self.hi,
                rho=rho,
                sign=sign,
            )
            rho *= 10.0
        return x

    def polish(self, x: np.ndarray, sign: float, maxiter: int = 200) -> np.ndarray:
        """Local SQP solve of the full program from ``x``."""
        sys = self.system
        k = self.kind

        def fun(z):
            return sign * float(sys.evaluate(z)[0])

        def grad(z):
            return sign * sys.jacobian(z)[0]

        eq_rows = np.nonzero(k == 1)[0]
        le_rows = np.nonzero(k == 2)[0]
        ge_rows = np.nonzero(k == 3)[0]
        G = np.zeros((len(self.groups), self.n))
        for r, g in enumerate(self.groups):
            G[r, g] = 1.0

        def eq_fun(z):
            v = sys.evaluate(z)
            return np.concatenate([v[eq_rows] - self.rhs[eq_rows], G @ z - 1.0])

        def eq_jac(z):
            return np.vstack([sys.jacobian(z)[eq_rows], G])

        def in_fun(z):
            v = sys.evaluate(z)
            return np.concatenate([self.rhs[le_rows] - v[le_rows], v[ge_rows] - self.rhs[ge_rows]])

        def in_jac(z):
            J = sys.jacobian(z)
            return np.vstack([-J[le_rows], J[ge_rows]])

        cons = [{"type": "eq", "fun": eq_fun, "jac": eq_jac}]
        if le_rows.size or ge_rows.size:
            cons.append({"type": "ineq", "fun": in_fun, "jac": in_jac})
        try:
            res = minimize(
                fun,
                x,
                jac=grad,
                method="SLSQP",
                bounds=list(zip(self.lo, self.hi)),
                constraints=cons,
                options={"maxiter": maxiter, "ftol": 1e-13},
            )
            return self.project(res.x)
        except (ValueError, np.linalg.LinAlgError):  # pragma: no cover - defensive
            return x

    def block_lp(self, x: np.ndarray, sign: float, cycles: int = 8) -> np.ndarray:
        """Improve a feasible ``x`` by exact LPs over one affine block at a time."""
        best = self.objective(x) * sign
        for _ in range(cycles):
            improved = False
            for blk in self._blocks:
                vals = self.values(x)
                J = self.system.jacobian(x)[:, blk]
                base = vals - J @ x[blk]
                c = sign * J[0]
                k = self.kind[1:]
                Jc, bc = J[1:], self.rhs[1:] - base[1:]
                A_eq = Jc[k == 1]
                b_eq = bc[k == 1]
                if self.group_id[blk[0]] >= 0:
                    A_eq = np.vstack([A_eq, np.ones((1, len(blk)))])
                    b_eq = np.concatenate([b_eq, [1.0]])
                A_ub = np.vstack([Jc[k == 2], -Jc[k == 3]])
                b_ub = np.concatenate([bc[k == 2], -bc[k == 3]])
                # drop rows that do not involve the block
                keep_eq = np.any(A_eq != 0, axis=1)
                keep_ub = np.any(A_ub != 0, axis=1)
                bounds = np.column_stack([self.lo[blk], self.hi[blk]])
                res = lp_solve(c, A_ub[keep_ub], b_ub[keep_ub], A_eq[keep_eq], b_eq[keep_eq], bounds)
                if not res.ok:
                    continue
                y = x.copy()
                y[blk] = np.clip(res.x, self.lo[blk], self.hi[blk])
                vals_y = self.values(y)
                if self.violation(y, vals_y) <= FEAS_TOL and sign * vals_y[0] < best - 1e-13:
                    x, best, improved = y, sign * vals_y[0], True
            if not improved:
                break
        return x


def primal_search(
    p: PolynomialProgram | Feasibility,
    box: np.ndarray | None = None,
    seed: int | np.random.Generator = 0,
    *,
    sign: float = 1.0,
    starts: Sequence[np.ndarray] = (),
    n_random: int = 4,
    restarts: int = 5,
    deadline: float | None = None,
) -> tuple[np.ndarray, float] | None:
    """Search for a feasible point with small ``sign * objective``.

    Each start is tried directly, then through penalised coordinate descent
    (penalty weight x10 per restart), an SQP polish and block-wise LP
    improvement.  Returns the best point with violation <= 1e-8, or None.
    """
    feas = p if isinstance(p, Feasibility) else Feasibility(p)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cands = [feas.project(s[: feas.n]) for s in starts]
    cands += [feas.random_point(rng, box) for _ in range(n_random)]
    best: tuple[np.ndarray, float] | None = None

    def offer(x: np.ndarray) -> bool:
        nonlocal best
        vals = feas.values(x)
        if feas.violation(x, vals) > FEAS_TOL:
            return False
        v = float(vals[0])
        if best is None or sign * v < sign * best[1]:
            best = (x.copy(), v)
        return True

    for x in cands:
        if deadline is not None and time.perf_counter() > deadline:
            break
        if not offer(x):
            y = feas.penalty_descent(x, sign, restarts=restarts)
            if not offer(y):
                y = feas.polish(y, sign)
                if not offer(y):
                    y = feas.polish(x, sign)
                    if not offer(y):
                        continue
            x = y
        y = feas.polish(x, sign, maxiter=100)
        offer(y)
        if best is not None:
            y = feas.block_lp(best[0], sign)
            offer(y)
    return best


def prune(
    branches: Iterable[Branch], primal_bound: float | None, direction: Literal["min", "max"], slack: float = 0.0
) -> tuple[list[Branch], list[Branch]]:
    """Split branches into (kept, pruned) against the incumbent ``primal_bound``.

    A branch whose relaxation is infeasible carries ``dual_value`` NaN and is
    always pruned.  Without an incumbent nothing else is pruned.
    """
    kept, gone = [], []
    for b in branches:
        if math.isnan(b.dual_value):
            gone.append(b)
        elif primal_bound is None:
            kept.append(b)
        elif direction == "min" and b.dual_value >= primal_bound - slack:
            gone.append(b)
        elif direction == "max" and b.dual_value <= primal_bound + slack:
            gone.append(b)
        else:
            kept.append(b)
    return kept, gone


# ---------------------------------------------------------------------------
# branch and bound
# ---------------------------------------------------------------------------


class _Tree:
    """One direction of the search, working internally in minimisation form."""

    def __init__(self, relax: Relaxation, maximize: bool) -> None:
        self.relax = relax
        self.sign = -1.0 if maximize else 1.0
        self.direction: Literal["min", "max"] = "max" if maximize else "min"
        self.heap: list[tuple[float, int, Branch]] = []
        self.floor = math.inf  # smallest key among bound-pruned branches
        self.infeasible_leaves = 0
        self.pruned = 0
        # primal search back-off: the interval doubles after each fruitless search
        self.search_every = 1
        self.next_search = 1

    def key(self, b: Branch) -> float:
        return self.sign * b.dual_value

    def push(self, b: Branch) -> None:
        heapq.heappush(self.heap, (self.key(b), b.id, b))

    def bound_key(self) -> float:
        top = self.heap[0][0] if self.heap else math.inf
        return min(top, self.floor)

    def lp(self, box: np.ndarray) -> LPResult:
        return self.relax.solve(box, maximize=self.sign < 0)


def _epsilon(theta: float, width: float) -> float | None:
    if not (math.isfinite(theta) and math.isfinite(width)) or width <= 0.0:
        return None
    return theta / width - 1.0


def solve(p: PolynomialProgram, opts: SolveOptions | None = None, **kw) -> BoundsResult:
    """Bound the objective of ``p`` over its feasible set.

    Keyword arguments override fields of ``opts``.
    """
    opts = opts or SolveOptions()
    if kw:
        opts = SolveOptions(**{**opts.__dict__, **kw})
    t0 = time.perf_counter()
    deadline = t0 + opts.time_limit
    rng = np.random.default_rng(opts.seed)
    relax = Relaxation(p)
    feas = Feasibility(p)
    ids = itertools.count()
    trees = (_Tree(relax, False), _Tree(relax, True))
    trajectory: list[ProgressRecord] = []
    state = {
        "primal_lo": math.inf,
        "primal_hi": -math.inf,
        "wit_lo": None,
        "wit_hi": None,
        "dual_lo": -math.inf,
        "dual_hi": math.inf,
    }
    pool = ThreadPoolExecutor(max_workers=opts.threads) if opts.threads > 1 else None

    def offer(x: np.ndarray | None) -> None:
        if x is None:
            return
        x = x[: feas.n]
        vals = feas.values(x)
        if feas.violation(x, vals) > FEAS_TOL:
            return
        v = float(vals[0])
        if v < state["primal_lo"]:
            state["primal_lo"], state["wit_lo"] = v, x.copy()
        if v > state["primal_hi"]:
            state["primal_hi"], state["wit_hi"] = v, x.copy()

    def search(starts: Sequence[np.ndarray], sign: float, n_random: int, restarts: int, box=None) -> None:
        found = primal_search(
            feas, box, rng, sign=sign, starts=starts, n_random=n_random, restarts=restarts, deadline=deadline
        )
        if found is not None:
            offer(found[0])

    def primal_key(tree: _Tree) -> float | None:
        v = state["primal_lo"] if tree.sign > 0 else state["primal_hi"]
        return None if not math.isfinite(v) else tree.sign * v

    def slack() -> float:
        w = state["primal_hi"] - state["primal_lo"]
        w = w if math.isfinite(w) and w > 0 else 0.0
        return max(0.49 * opts.eps_thresh * w, 0.49 * opts.theta_thresh)

    def record(it: int) -> ProgressRecord:
        lo = trees[0].bound_key()
        hi = -trees[1].bound_key()
        # clamp so the dual interval contains every primal point found
        lo = min(lo, state["primal_lo"]) if math.isfinite(state["primal_lo"]) else lo
        hi = max(hi, state["primal_hi"]) if math.isfinite(state["primal_hi"]) else hi
        # anytime bounds never loosen
        lo = max(lo, state["dual_lo"])
        hi = min(hi, state["dual_hi"])
        state["dual_lo"], state["dual_hi"] = lo, hi
        theta = hi - lo
        width = state["primal_hi"] - state["primal_lo"]
        rec = ProgressRecord(
            it,
            (time.perf_counter() - t0) * 1000.0,
            lo,
            hi,
            state["primal_lo"],
            state["primal_hi"],
            theta,
            _epsilon(theta, width),
            sum(len(t.heap) for t in trees),
        )
        trajectory.append(rec)
        if opts.progress is not None:
            opts.progress(rec)
        return rec

    def finish(status: Status, it: int, cert: dict) -> BoundsResult:
        if pool is not None:
            pool.shutdown(wait=True)
        rec = trajectory[-1] if trajectory else record(it)
        if status == "infeasible":
            lo, hi, theta = math.inf, -math.inf, -math.inf
            eps = None
        else:
            lo, hi, theta, eps = rec.dual_lo, rec.dual_hi, rec.theta, rec.epsilon
        return BoundsResult(
            dual_lo=lo,
            dual_hi=hi,
            primal_lo=state["primal_lo"],
            primal_hi=state["primal_hi"],
            theta=theta,
            epsilon=eps,
            status=status,
            iterations=it,
            wall_time=time.perf_counter() - t0,
            witness_lo=state["wit_lo"],
            witness_hi=state["wit_hi"],
            trajectory=trajectory,
            certificate=cert,
        )

    # -- root ------------------------------------------------------------
    try:
        root_box = relax.initial_box()
        if opts.obbt and relax.nonlinear:
            root_box = relax.obbt(root_box)
    except BoxInfeasible:
        return finish("infeasible", 0, {"root": "bound propagation"})
    roots = [t.lp(root_box) for t in trees]
    if any(r.status == "infeasible" for r in roots):
        return finish("infeasible", 0, {"root": "relaxation infeasible", "infeasible_leaves": 1})
    for t, r in zip(trees, roots):
        val = r.value if r.ok else -t.sign * math.inf
        t.push(Branch(root_box, val, next(ids), r.x if r.ok else None))
    for t, r in zip(trees, roots):
        if r.ok:
            offer(r.x)
    it = 0
    rec = record(it)
    if not _done(rec, opts):
        for t, r in zip(trees, roots):
            search([r.x] if r.ok else [], t.sign, opts.primal_starts // 2, 5)
        rec = record(it)

    def lp_child(args):
        tree, box = args
        try:
            box = relax.propagate(box, rounds=2)
        except BoxInfeasible:
            return box, LPResult("infeasible", message="propagation")
        return box, tree.lp(box)

    # -- main loop ---------------------------------------------------------
    while True:
        if math.isfinite(rec.primal_lo) and rec.theta <= opts.theta_thresh:
            return finish("point-identified", it, _cert(trees))
        if rec.epsilon is not None and rec.epsilon <= opts.eps_thresh:
            return finish("sharp", it, _cert(trees))
        if all(not t.heap for t in trees):
            if not math.isfinite(state["primal_lo"]):
                if all(t.floor == math.inf for t in trees):
                    return finish("infeasible", it, _cert(trees))
                return finish("interrupted", it, _cert(trees))
            status: Status = "sharp"
            if rec.theta <= opts.theta_thresh:
                status = "point-identified"
            return finish(status, it, _cert(trees))
        if time.perf_counter() > deadline or (opts.max_iterations is not None and it >= opts.max_iterations):
            return finish("interrupted", it, _cert(trees))
        it += 1
        for tree in trees:
            # discard branches that can no longer widen the bound
            while tree.heap:
                key, _, b = tree.heap[0]
                pk = primal_key(tree)
                if pk is not None and key >= pk - slack():
                    heapq.heappop(tree.heap)
                    tree.floor = min(tree.floor, key)
                    tree.pruned += 1
                    continue
                break
            if not tree.heap:
                continue
            _, _, b = heapq.heappop(tree.heap)
            children = _split(relax, b, root_box)
            if children is None:
                # relaxation exact on this branch: its point is optimal there
                offer(b.point)
                pk = primal_key(tree)
                if pk is not None and tree.key(b) >= pk - slack() - 1e-9:
                    tree.floor = min(tree.floor, tree.key(b))
                    tree.pruned += 1
                else:
                    children = _split(relax, b, root_box, force=True)
                    if children is None:
                        tree.floor = min(tree.floor, tree.key(b))
                        continue
            if children is None:
                continue
            jobs = [(tree, box) for box in children]
            results = list(pool.map(lp_child, jobs)) if pool else [lp_child(j) for j in jobs]
            new_pts = []
            for box, res in results:
                if res.status == "infeasible":
                    tree.infeasible_leaves += 1
                    continue
                if res.ok:
                    val = res.value
                    # a child's relaxation is never looser than its parent's bound
                    val = max(val, b.dual_value) if tree.sign > 0 else min(val, b.dual_value)
                    child = Branch(box, val, next(ids), res.x, b.depth + 1)
                    new_pts.append(res.x)
                else:
                    child = Branch(box, b.dual_value, next(ids), None, b.depth + 1)
                tree.push(child)
            for x in new_pts:
                offer(x)
            pk = primal_key(tree)
            if new_pts and (pk is None or it >= tree.next_search):
                search(new_pts[:1], tree.sign, 0, 2)
                improved = primal_key(tree) != pk
                tree.search_every = 1 if improved else min(2 * tree.search_every, SEARCH_BACKOFF_MAX)
                tree.next_search = it + tree.search_every
        rec = record(it)


def _done(rec: ProgressRecord, opts: SolveOptions) -> bool:
    if rec.epsilon is not None and rec.epsilon <= opts.eps_thresh:
        return True
    return math.isfinite(rec.primal_lo) and rec.theta <= opts.theta_thresh


def _cert(trees: Sequence[_Tree]) -> dict:
    return {
        "infeasible_leaves": sum(t.infeasible_leaves for t in trees),
        "bound_pruned": sum(t.pruned for t in trees),
        "open": sum(len(t.heap) for t in trees),
    }


def _split(relax: Relaxation, b: Branch, root_box: np.ndarray, force: bool = False) -> list[np.ndarray] | None:
    """Child boxes of ``b``, or None when the relaxation is exact at its point."""
    box = b.box
    nb = relax.n_branch
    width = box[:nb, 1] - box[:nb, 0]
    j = -1
    if b.point is not None and relax.nonlinear and not force:
        scores = relax.branching_scores(b.point, box, root_box)
        scores[width <= 1e-12] = 0.0
        if scores.max(initial=0.0) > 1e-12:
            j = int(np.argmax(scores))
            lo, hi = box[j]
            t = min(max(b.point[j], lo + 0.2 * (hi - lo)), hi - 0.2 * (hi - lo))
        elif relax.gaps(b.point).max(initial=0.0) <= 1e-9:
            return None
    if j < 0:
        cand = np.where(relax.in_product, width, -1.0) if relax.nonlinear else width
        if cand.max(initial=-1.0) <= 1e-12:
            return None
        root_w = np.maximum(root_box[:nb, 1] - root_box[:nb, 0], 1e-300)
        j = int(np.argmax(np.where(cand > 0, cand / root_w, -1.0)))
        t = 0.5 * (box[j, 0] + box[j, 1])
    left, right = box.copy(), box.copy()
    left[j, 1] = t
    right[j, 0] = t
    return [left, right]
