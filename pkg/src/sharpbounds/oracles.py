"""Independent reference solvers used to cross-check the branch-and-bound.

None of these share code with the relaxation or the LP interface: vertex
enumeration and the rational simplex work from the program's exact
coefficients, and the grid search evaluates the original polynomials.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .polynomial import PolySystem
from .program import PolynomialProgram, classify

__all__ = [
    "OracleError",
    "StandardForm",
    "standard_form",
    "vertex_bounds",
    "simplex_bounds",
    "grid_bounds",
]


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class StandardForm:
    """``min/max c.x + c0`` over ``A x = b, x >= 0`` with exact coefficients.

    Variables are shifted by their lower bounds; finite upper bounds that are
    not implied by a simplex group become rows with slack columns.
    """

    c: list[Fraction]
    c0: Fraction
    A: list[list[Fraction]]
    b: list[Fraction]
    n_orig: int
    shift: list[Fraction]


def _linear(poly, n: int) -> tuple[list[Fraction], Fraction]:
    coef = [Fraction(0)] * n
    const = Fraction(0)
    for mono, v in poly.terms().items():
        if len(mono) == 0:
            const += v
        elif len(mono) == 1:
            coef[mono[0]] += v
        else:
            raise OracleError("program is not linear")
    return coef, const


def standard_form(p: PolynomialProgram) -> StandardForm:
    if classify(p) != "linear":
        raise OracleError("vertex enumeration and simplex need a linear program")
    n = p.n_vars
    lo = [Fraction(b[0]) for b in p.var_boxes]
    hi = [Fraction(b[1]) for b in p.var_boxes]
    in_group = {j for g in p.simplex_groups for j in g}
    rows: list[tuple[list[Fraction], Fraction, str]] = []
    for g in p.simplex_groups:
        r = [Fraction(0)] * n
        for j in g:
            r[j] = Fraction(1)
        rows.append((r, Fraction(1), "="))
    for con in p.constraints:
        coef, const = _linear(con.poly, n)
        rows.append((coef, Fraction(con.rhs) - const, con.relation))
    for j in range(n):
        if j not in in_group or lo[j] != 0 or hi[j] != 1:
            if hi[j] != math.inf:
                r = [Fraction(0)] * n
                r[j] = Fraction(1)
                rows.append((r, hi[j], "<="))
    n_slack = sum(rel != "=" for _, _, rel in rows)
    A, b = [], []
    s = 0
    for coef, rhs, rel in rows:
        rhs = rhs - sum(cf * l for cf, l in zip(coef, lo))
        row = coef + [Fraction(0)] * n_slack
        if rel != "=":
            row[n + s] = Fraction(1) if rel == "<=" else Fraction(-1)
            s += 1
        if rhs < 0:
            row = [-v for v in row]
            rhs = -rhs
        A.append(row)
        b.append(rhs)
    c_obj, c0 = _linear(p.objective, n)
    c0 += sum(cf * l for cf, l in zip(c_obj, lo))
    return StandardForm(c_obj + [Fraction(0)] * n_slack, c0, A, b, n, lo)


# ---------------------------------------------------------------------------
# vertex enumeration (floating point, numpy only)
# ---------------------------------------------------------------------------


def vertex_bounds(p: PolynomialProgram, max_bases: int = 5_000_000, tol: float = 1e-9) -> tuple[float, float]:
    """Min and max of the objective over every basic feasible solution."""
    sf = standard_form(p)
    A = np.array([[float(v) for v in row] for row in sf.A])
    b = np.array([float(v) for v in sf.b])
    c = np.array([float(v) for v in sf.c])
    # drop linearly dependent rows
    q, r, piv = _qr_rows(A)
    keep = np.sort(piv[:r])
    A, b = A[keep], b[keep]
    m, n = A.shape
    if math.comb(n, m) > max_bases:
        raise OracleError(f"{math.comb(n, m)} candidate bases exceed the enumeration limit")
    lo, hi = math.inf, -math.inf
    for basis in itertools.combinations(range(n), m):
        B = A[:, basis]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xb = np.linalg.solve(B, b)
        if np.any(xb < -tol):
            continue
        x = np.zeros(n)
        x[list(basis)] = xb
        if np.max(np.abs(A @ x - b), initial=0.0) > 1e-7:
            continue
        v = float(c @ x) + float(sf.c0)
        lo, hi = min(lo, v), max(hi, v)
    if lo == math.inf:
        raise OracleError("no feasible vertex")
    return lo, hi


def _qr_rows(A: np.ndarray) -> tuple[np.ndarray, int, np.ndarray]:
    """Rank and a pivot order of independent rows of ``A`` (Gram-Schmidt)."""
    basis: list[np.ndarray] = []
    chosen: list[int] = []
    for i, row in enumerate(A):
        v = row.astype(float).copy()
        for u in basis:
            v -= (v @ u) * u
        nv = np.linalg.norm(v)
        if nv > 1e-9 * max(1.0, np.linalg.norm(row)):
            basis.append(v / nv)
            chosen.append(i)
    rest = [i for i in range(A.shape[0]) if i not in chosen]
    return np.array(basis), len(chosen), np.array(chosen + rest, dtype=int)


# ---------------------------------------------------------------------------
# exact two-phase simplex with Bland's rule
# ---------------------------------------------------------------------------


def _pivot(T: list[list[Fraction]], r: int, k: int) -> None:
    piv = T[r][k]
    T[r] = [v / piv for v in T[r]]
    for i, row in enumerate(T):
        if i != r and row[k] != 0:
            f = row[k]
            T[i] = [a - f * bb for a, bb in zip(row, T[r])]


def _simplex(T: list[list[Fraction]], basis: list[int], n_cols: int, allowed: Sequence[bool]) -> None:
    """Minimise the last row's objective in place (Bland's rule)."""
    m = len(basis)
    while True:
        obj = T[m]
        k = next((j for j in range(n_cols) if allowed[j] and obj[j] < 0), None)
        if k is None:
            return
        best, r = None, None
        for i in range(m):
            if T[i][k] > 0:
                ratio = T[i][-1] / T[i][k]
                if best is None or ratio < best or (ratio == best and basis[i] < basis[r]):
                    best, r = ratio, i
        if r is None:
            raise OracleError("unbounded linear program")
        _pivot(T, r, k)
        basis[r] = k


def _exact_min(sf: StandardForm, c: Sequence[Fraction]) -> Fraction:
    m, n = len(sf.A), len(sf.c)
    # phase 1 with one artificial column per row
    T = [row[:] + [Fraction(int(i == j)) for j in range(m)] + [sf.b[i]] for i, row in enumerate(sf.A)]
    phase1 = [Fraction(0)] * n + [Fraction(1)] * m + [Fraction(0)]
    for row in T:
        phase1 = [a - v for a, v in zip(phase1, row)]
    T.append(phase1)
    basis = list(range(n, n + m))
    _simplex(T, basis, n + m, [True] * (n + m))
    if T[m][-1] != 0:
        raise OracleError("infeasible linear program")
    # drive artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n:
            k = next((j for j in range(n) if T[i][j] != 0), None)
            if k is not None:
                _pivot(T, i, k)
                basis[i] = k
    # phase 2
    obj = list(c) + [Fraction(0)] * m + [Fraction(0)]
    for i, bi in enumerate(basis):
        if obj[bi] != 0:
            f = obj[bi]
            obj = [a - f * v for a, v in zip(obj, T[i])]
    T[m] = obj
    _simplex(T, basis, n + m, [j < n for j in range(n + m)])
    return -T[m][-1]


def simplex_bounds(p: PolynomialProgram) -> tuple[Fraction, Fraction]:
    """Exact min and max of a linear program by rational simplex."""
    sf = standard_form(p)
    lo = _exact_min(sf, sf.c) + sf.c0
    hi = -_exact_min(sf, [-v for v in sf.c]) + sf.c0
    return lo, hi


# ---------------------------------------------------------------------------
# dense grid search
# ---------------------------------------------------------------------------


def _compositions(k: int, steps: int) -> np.ndarray:
    """All points of the (k-1)-simplex with coordinates in multiples of 1/steps."""
    if k == 1:
        return np.ones((1, 1))
    out = []
    for cut in itertools.combinations(range(steps + k - 1), k - 1):
        prev, parts = -1, []
        for cpos in cut:
            parts.append(cpos - prev - 1)
            prev = cpos
        parts.append(steps + k - 2 - prev)
        out.append(parts)
    return np.array(out, dtype=float) / steps


def _blocks(p: PolynomialProgram) -> list[tuple[list[int], str]]:
    in_group = {j for g in p.simplex_groups for j in g}
    out = [(list(g), "simplex") for g in p.simplex_groups]
    out += [([j], "box") for j in range(p.n_vars) if j not in in_group]
    return out


def _block_count(p: PolynomialProgram, idx: list[int], kind: str, step: float) -> int:
    if kind == "simplex":
        return math.comb(int(round(1.0 / step)) + len(idx) - 1, len(idx) - 1)
    lo, hi = (float(v) for v in p.var_boxes[idx[0]])
    return int(math.floor((hi - lo) / step + 1e-9)) + 1


def _local_compositions(center: np.ndarray, steps: int, radius: float) -> np.ndarray:
    """Simplex grid points within ``radius`` (max norm) of ``center``."""
    k = len(center)
    if k == 1:
        return np.ones((1, 1))
    r = int(math.floor(radius * steps + 1e-9))
    ranges = []
    for c in center[:-1]:
        mid = int(round(c * steps))
        ranges.append(np.arange(max(0, mid - r), min(steps, mid + r) + 1))
    mesh = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, k - 1)
    last = steps - mesh.sum(axis=1)
    pts = np.column_stack([mesh, last]) / steps
    keep = (last >= 0) & np.all(np.abs(pts - center) <= radius + 1e-12, axis=1)
    return pts[keep]


def _block_points(p: PolynomialProgram, idx: list[int], kind: str, step: float, center=None, radius=None) -> np.ndarray:
    if kind == "simplex":
        steps = int(round(1.0 / step))
        if center is not None:
            return _local_compositions(np.asarray(center, dtype=float), steps, radius)
        return _compositions(len(idx), steps)
    lo, hi = (float(v) for v in p.var_boxes[idx[0]])
    if center is not None:
        lo, hi = max(lo, center[0] - radius), min(hi, center[0] + radius)
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return (lo + step * np.arange(n)).reshape(-1, 1)


def _evaluate(p: PolynomialProgram, sysm: PolySystem, blocks, pts_per_block, tol: float, chunk: int = 200_000):
    """Best feasible objective values over the product grid."""
    n = p.n_vars
    sizes = [len(bp) for bp in pts_per_block]
    total = int(np.prod(sizes, dtype=np.int64))
    rel = [c.relation for c in p.constraints]
    rhs = np.array([float(c.rhs) for c in p.constraints])
    best_lo, best_hi = (math.inf, None), (-math.inf, None)
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk))
        X = np.zeros((flat.size, n))
        rem = flat.copy()
        for (idx, _), bp, sz in zip(reversed(blocks), reversed(pts_per_block), reversed(sizes)):
            X[:, idx] = bp[rem % sz]
            rem //= sz
        V = kernels.eval_system_batch(sysm, X)
        obj = V[:, 0]
        ok = np.ones(flat.size, dtype=bool)
        for i, r in enumerate(rel):
            g = V[:, i + 1] - rhs[i]
            if r == "=":
                ok &= np.abs(g) <= tol
            elif r in ("<=", "<"):
                ok &= g <= tol
            elif r in (">=", ">"):
                ok &= g >= -tol
        if ok.any():
            o = np.where(ok, obj, np.inf)
            k = int(np.argmin(o))
            if o[k] < best_lo[0]:
                best_lo = (float(o[k]), X[k].copy())
            o = np.where(ok, obj, -np.inf)
            k = int(np.argmax(o))
            if o[k] > best_hi[0]:
                best_hi = (float(o[k]), X[k].copy())
    return best_lo, best_hi


def grid_bounds(
    p: PolynomialProgram,
    step: float = 1e-3,
    *,
    tol: float | None = None,
    coarse: float | None = None,
    max_points: int = 50_000_000,
) -> tuple[float, float]:
    """Extremes of the objective over grid points satisfying the constraints.

    Simplex groups are gridded by compositions and other variables by their
    box.  Constraints hold within ``tol`` (default: half the step), which lets an
    equality be met between grid points.  When the full product at ``step``
    exceeds ``max_points``, a ``coarse`` grid is searched exhaustively first
    and the ``step`` grid is then searched within one coarse cell of the best
    coarse point in each direction (widened up to four cells if that
    neighbourhood has no feasible point).
    """
    tol = step / 2 if tol is None else tol
    blocks = _blocks(p)
    sysm = PolySystem([p.objective] + [c.poly for c in p.constraints], p.n_vars)
    if math.prod(_block_count(p, idx, kind, step) for idx, kind in blocks) <= max_points:
        fine = [_block_points(p, idx, kind, step) for idx, kind in blocks]
        lo, hi = _evaluate(p, sysm, blocks, fine, tol)
    else:
        coarse = coarse or min(0.1, 10 * step)
        if math.prod(_block_count(p, idx, kind, coarse) for idx, kind in blocks) > max_points:
            raise OracleError("grid too large; reduce the number of free parameters")
        grid = [_block_points(p, idx, kind, coarse) for idx, kind in blocks]
        lo, hi = _evaluate(p, sysm, blocks, grid, max(tol, coarse))
        out = []
        for (val, x), sign in ((lo, 1), (hi, -1)):
            if x is None:
                out.append((val, None))
                continue
            # the coarse tolerance admits points whose fine neighbours lie a little further out
            radius = coarse
            while True:
                local = [_block_points(p, idx, kind, step, center=x[idx], radius=radius) for idx, kind in blocks]
                res = _evaluate(p, sysm, blocks, local, tol)
                best = res[0] if sign > 0 else res[1]
                if best[1] is not None or radius >= 4 * coarse:
                    break
                radius *= 2
            out.append(best)
        lo, hi = out[0], out[1]
    if lo[1] is None or hi[1] is None:
        raise OracleError("no grid point satisfies the constraints")
    return lo[0], hi[0]
