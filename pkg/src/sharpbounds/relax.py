"""McCormick relaxations of polynomial programs and bound propagation.

Columns of the relaxation are laid out as ``[x | L | w]``: the program
variables, one auxiliary per linear form (sum of parameters) that occurs in a
nonlinear product, and one auxiliary per bilinear product node.  A product of
``d`` linear forms is decomposed into the chain ``w1 = F1*F2, w2 = w1*F3, ...``
with partial products shared between terms.  Branching happens on ``x`` and
``L`` columns; ``w`` bounds follow from interval arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lp import LPResult, lp_solve
from .program import PolynomialProgram
from .polynomial import Polynomial

__all__ = ["Relaxation", "BoxInfeasible"]

BOUND_SLACK = 1e-9
SQUARE_TANGENTS = 15


class BoxInfeasible(Exception):
    """Propagation proved the box contains no feasible point."""


@dataclass
class _Rows:
    rows: list[dict[int, float]]
    rhs: list[float]

    def matrix(self, n_cols: int) -> tuple[sp.csr_matrix, np.ndarray]:
        r, c, v = [], [], []
        for i, row in enumerate(self.rows):
            for j, a in row.items():
                if a != 0.0:
                    r.append(i)
                    c.append(j)
                    v.append(a)
        A = sp.csr_matrix((v, (r, c)), shape=(len(self.rows), n_cols))
        return A, np.asarray(self.rhs, dtype=float)


class Relaxation:
    """Box-parametrised linear relaxation of a :class:`PolynomialProgram`."""

    def __init__(self, program: PolynomialProgram) -> None:
        self.program = program
        n = program.n_vars
        self.n_x = n
        self._form_col: dict[tuple[int, ...], int] = {}
        self.forms: list[tuple[int, ...]] = []
        self._chain: dict[tuple[int, ...], int] = {}
        nodes: list[tuple[int, int, tuple[int, ...]]] = []

        def form_col(f: tuple[int, ...]) -> int:
            if len(f) == 1:
                return f[0]
            if f not in self._form_col:
                self._form_col[f] = -1 - len(self.forms)  # provisional, fixed below
                self.forms.append(f)
            return self._form_col[f]

        # first pass: register forms and chains with provisional ids
        def linearise(poly: Polynomial) -> tuple[dict, float]:
            row: dict = {}
            const = 0.0
            for key, coef in poly.items():
                c = float(coef)
                if len(key) == 0:
                    const += c
                elif len(key) == 1:
                    for i in key[0]:
                        row[("x", i)] = row.get(("x", i), 0.0) + c
                else:
                    cols = sorted((form_col(f) for f in key), key=_col_sort)
                    cur = ("c", cols[0])
                    for k in range(1, len(cols)):
                        chain = tuple(cols[: k + 1])
                        if chain not in self._chain:
                            self._chain[chain] = len(nodes)
                            nodes.append((cur, ("c", cols[k]), chain))
                        cur = ("w", self._chain[chain])
                    row[cur] = row.get(cur, 0.0) + c
            return row, const

        obj_row, self.obj_const = linearise(program.objective)
        con_rows = [linearise(c.poly) for c in program.constraints]

        self.n_forms = len(self.forms)
        self.n_branch = n + self.n_forms
        self.n_nodes = len(nodes)
        self.n_cols = self.n_branch + self.n_nodes

        def resolve(ref) -> int:
            kind, v = ref
            if kind == "x":
                return v
            if kind == "w":
                return self.n_branch + v
            return v if v >= 0 else n + (-1 - v)

        self.node_a = np.array([resolve(a) for a, _, _ in nodes], dtype=np.int64)
        self.node_b = np.array([resolve(b) for _, b, _ in nodes], dtype=np.int64)
        self.node_w = np.arange(self.n_branch, self.n_cols, dtype=np.int64)

        def to_cols(row: dict) -> dict[int, float]:
            out: dict[int, float] = {}
            for ref, a in row.items():
                j = resolve(ref)
                out[j] = out.get(j, 0.0) + a
            return out

        self.c = np.zeros(self.n_cols)
        for j, a in to_cols(obj_row).items():
            self.c[j] += a

        eq = _Rows([], [])
        ub = _Rows([], [])
        for grp in program.simplex_groups:
            eq.rows.append({i: 1.0 for i in grp})
            eq.rhs.append(1.0)
        for k, f in enumerate(self.forms):
            row = {i: -1.0 for i in f}
            row[n + k] = 1.0
            eq.rows.append(row)
            eq.rhs.append(0.0)
        self.constant_violation = False
        for c, (row, const) in zip(program.constraints, con_rows):
            cols = to_cols(row)
            rhs = float(c.rhs) - const
            if not cols:
                ok = (
                    abs(rhs) <= 1e-12
                    if c.relation == "="
                    else (rhs >= -1e-12 if c.relation == "<=" else rhs <= 1e-12)
                )
                if not ok:
                    self.constant_violation = True
                continue
            if c.relation == "=":
                eq.rows.append(cols)
                eq.rhs.append(rhs)
            elif c.relation == "<=":
                ub.rows.append(cols)
                ub.rhs.append(rhs)
            else:
                ub.rows.append({j: -a for j, a in cols.items()})
                ub.rhs.append(-rhs)
        self.A_eq, self.b_eq = eq.matrix(self.n_cols)
        self.A_ub, self.b_ub = ub.matrix(self.n_cols)

        # stacked rows for propagation: equalities first
        self._prop_A = sp.vstack([self.A_eq, self.A_ub]).tocoo()
        self._prop_b = np.concatenate([self.b_eq, self.b_ub])
        self._prop_is_eq = np.concatenate(
            [np.ones(self.A_eq.shape[0], bool), np.zeros(self.A_ub.shape[0], bool)]
        )

        self._group_of = np.full(n, -1, dtype=np.int64)
        for k, grp in enumerate(program.simplex_groups):
            self._group_of[list(grp)] = k
        self._form_group = np.array(
            [
                self._group_of[f[0]] if len({int(self._group_of[i]) for i in f}) == 1 else -1
                for f in self.forms
            ],
            dtype=np.int64,
        )
        self.nonlinear = self.n_nodes > 0
        self.in_product = np.zeros(self.n_branch, dtype=bool)
        for arr in (self.node_a, self.node_b):
            self.in_product[arr[arr < self.n_branch]] = True

    # ------------------------------------------------------------------
    def initial_box(self) -> np.ndarray:
        box = np.zeros((self.n_cols, 2))
        box[: self.n_x] = np.array([[float(lo), float(hi)] for lo, hi in self.program.var_boxes])
        box[self.n_x :, 0] = -np.inf
        box[self.n_x :, 1] = np.inf
        return self.propagate(box)

    def _form_bounds(self, box: np.ndarray) -> None:
        lo, hi = box[: self.n_x, 0], box[: self.n_x, 1]
        group_lo = np.zeros(len(self.program.simplex_groups))
        group_hi = np.zeros(len(self.program.simplex_groups))
        for k, grp in enumerate(self.program.simplex_groups):
            idx = list(grp)
            group_lo[k] = lo[idx].sum()
            group_hi[k] = hi[idx].sum()
        for k, f in enumerate(self.forms):
            idx = list(f)
            flo, fhi = lo[idx].sum(), hi[idx].sum()
            g = self._form_group[k]
            if g >= 0:
                comp_lo = group_lo[g] - lo[idx].sum()
                comp_hi = group_hi[g] - hi[idx].sum()
                flo = max(flo, 1.0 - comp_hi)
                fhi = min(fhi, 1.0 - comp_lo)
            col = self.n_x + k
            box[col, 0] = max(box[col, 0], flo - BOUND_SLACK)
            box[col, 1] = min(box[col, 1], fhi + BOUND_SLACK)

    def _node_bounds(self, box: np.ndarray) -> None:
        for k in range(self.n_nodes):
            a, b, w = self.node_a[k], self.node_b[k], self.node_w[k]
            if a == b:
                lo, hi = box[a]
                cands = [lo * lo, hi * hi]
                wl = 0.0 if lo <= 0.0 <= hi else min(cands)
                wh = max(cands)
            else:
                cands = [box[a, i] * box[b, j] for i in (0, 1) for j in (0, 1)]
                wl, wh = min(cands), max(cands)
            box[w, 0] = max(box[w, 0], wl - BOUND_SLACK)
            box[w, 1] = min(box[w, 1], wh + BOUND_SLACK)

    def _node_reverse(self, box: np.ndarray) -> None:
        for k in range(self.n_nodes):
            a, b, w = self.node_a[k], self.node_b[k], self.node_w[k]
            if a == b or box[a, 0] < 0 or box[b, 0] < 0 or box[w, 0] < 0:
                continue
            for u, v in ((a, b), (b, a)):
                if box[v, 1] > 0:
                    box[u, 0] = max(box[u, 0], box[w, 0] / box[v, 1] - BOUND_SLACK)
                if box[v, 0] > 0:
                    box[u, 1] = min(box[u, 1], box[w, 1] / box[v, 0] + BOUND_SLACK)

    def _row_pass(self, box: np.ndarray) -> None:
        A = self._prop_A
        if A.nnz == 0:
            return
        r, j, a = A.row, A.col, A.data
        lo, hi = box[j, 0], box[j, 1]
        cmin = np.where(a > 0, a * lo, a * hi)
        cmax = np.where(a > 0, a * hi, a * lo)
        m = A.shape[0]
        rmin = np.bincount(r, weights=cmin, minlength=m)
        rmax = np.bincount(r, weights=cmax, minlength=m)
        other_min = rmin[r] - cmin
        other_max = rmax[r] - cmax
        b = self._prop_b[r]
        # a*x_j <= b - other_min  (all rows); a*x_j >= b - other_max (equalities)
        up = b - other_min
        dn = np.where(self._prop_is_eq[r], b - other_max, -np.inf)
        with np.errstate(invalid="ignore"):
            new_hi = np.where(a > 0, up / a, dn / a)
            new_lo = np.where(a > 0, dn / a, up / a)
        new_hi = new_hi + BOUND_SLACK * (1.0 + np.abs(new_hi))
        new_lo = new_lo - BOUND_SLACK * (1.0 + np.abs(new_lo))
        new_hi = np.where(np.isnan(new_hi), np.inf, new_hi)
        new_lo = np.where(np.isnan(new_lo), -np.inf, new_lo)
        np.minimum.at(box[:, 1], j, new_hi)
        np.maximum.at(box[:, 0], j, new_lo)

    def propagate(self, box: np.ndarray, rounds: int = 4) -> np.ndarray:
        """Feasibility-based bound tightening; raises :class:`BoxInfeasible`."""
        box = np.array(box, dtype=float)
        for _ in range(rounds):
            before = box.copy()
            self._form_bounds(box)
            self._node_bounds(box)
            self._row_pass(box)
            self._node_reverse(box)
            if np.any(box[:, 0] > box[:, 1] + 1e-7):
                raise BoxInfeasible
            if np.allclose(before, box, rtol=0, atol=1e-10, equal_nan=False):
                break
        box[:, 1] = np.maximum(box[:, 1], box[:, 0])
        return box

    # ------------------------------------------------------------------
    def mccormick(self, box: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
        if self.n_nodes == 0:
            return sp.csr_matrix((0, self.n_cols)), np.zeros(0)
        a, b, w = self.node_a, self.node_b, self.node_w
        aL, aU = box[a, 0], box[a, 1]
        bL, bU = box[b, 0], box[b, 1]
        k = self.n_nodes
        rows, cols, vals, rhs = [], [], [], []
        base = np.arange(k)

        def add(offset, ca_b, ca_a, cw, r):
            ridx = offset + base
            rows.extend([ridx, ridx, ridx])
            cols.extend([b, a, w])
            vals.extend([ca_b, ca_a, np.full(k, cw)])
            rhs.append(r)

        # under-estimators: aL*b + bL*a - w <= aL*bL ; aU*b + bU*a - w <= aU*bU
        add(0, aL, bL, -1.0, aL * bL)
        add(k, aU, bU, -1.0, aU * bU)
        # over-estimators: w - aU*b - bL*a <= -aU*bL ; w - aL*b - bU*a <= -aL*bU
        add(2 * k, -aU, -bL, 1.0, -aU * bL)
        add(3 * k, -aL, -bU, 1.0, -aL * bU)
        n_rows = 4 * k
        sq = np.nonzero(a == b)[0]
        if sq.size:
            # tangents at interior points: the lower McCormick pieces of a uniform sub-partition
            for t in (np.arange(1, SQUARE_TANGENTS + 1) / (SQUARE_TANGENTS + 1)):
                pt = aL[sq] + t * (aU[sq] - aL[sq])
                ridx = n_rows + np.arange(sq.size)
                rows.extend([ridx, ridx])
                cols.extend([a[sq], w[sq]])
                vals.extend([2.0 * pt, -np.ones(sq.size)])
                rhs.append(pt * pt)
                n_rows += sq.size
        A = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_rows, self.n_cols),
        )
        return A, np.concatenate(rhs)

    def solve(self, box: np.ndarray, maximize: bool = False, c: np.ndarray | None = None) -> LPResult:
        """Optimise the relaxed objective (or ``c``) over ``box``."""
        if self.constant_violation:
            return LPResult("infeasible", message="constant constraint violated")
        Am, bm = self.mccormick(box)
        A_ub = sp.vstack([self.A_ub, Am]).tocsr() if Am.shape[0] else self.A_ub
        b_ub = np.concatenate([self.b_ub, bm])
        obj = self.c if c is None else c
        res = lp_solve(obj, A_ub, b_ub, self.A_eq, self.b_eq, box, maximize=maximize)
        if res.ok and c is None:
            return LPResult(res.status, res.value + self.obj_const, res.x, res.message)
        return res

    def obbt(self, box: np.ndarray, columns: np.ndarray | None = None) -> np.ndarray:
        """Optimisation-based tightening of ``columns`` (default: product operands)."""
        if columns is None:
            columns = np.nonzero(self.in_product)[0]
        box = box.copy()
        for j in columns:
            e = np.zeros(self.n_cols)
            e[j] = 1.0
            for side, maximize in ((0, False), (1, True)):
                res = self.solve(box, maximize=maximize, c=e)
                if res.status == "infeasible":
                    raise BoxInfeasible
                if res.ok:
                    v = res.value
                    if side == 0:
                        box[j, 0] = max(box[j, 0], v - BOUND_SLACK * (1 + abs(v)))
                    else:
                        box[j, 1] = min(box[j, 1], v + BOUND_SLACK * (1 + abs(v)))
            box = self.propagate(box, rounds=1)
        return box

    # ------------------------------------------------------------------
    def gaps(self, z: np.ndarray) -> np.ndarray:
        """``|w - a*b|`` for every product node at relaxation point ``z``."""
        return np.abs(z[self.node_w] - z[self.node_a] * z[self.node_b])

    def branching_scores(self, z: np.ndarray, box: np.ndarray, root_box: np.ndarray) -> np.ndarray:
        """Gap contribution per branchable column, weighted by relative width."""
        width = box[:, 1] - box[:, 0]
        root_w = np.maximum(root_box[:, 1] - root_box[:, 0], 1e-300)
        rel = np.clip(width / root_w, 0.0, 1.0)
        carried = np.zeros(self.n_cols)
        gaps = self.gaps(z)
        scores = np.zeros(self.n_cols)
        for k in range(self.n_nodes - 1, -1, -1):
            total = gaps[k] + carried[self.node_w[k]]
            if total <= 0.0:
                continue
            for u in (self.node_a[k], self.node_b[k]):
                if u >= self.n_branch:
                    carried[u] += total
                else:
                    scores[u] += total * rel[u]
        return scores[: self.n_branch]


def _col_sort(c: int) -> tuple[int, int]:
    # program variables before provisional form ids, each in creation order
    return (0, c) if c >= 0 else (1, -c)
