"""Numeric hot loops, each with a numba form and a vectorised numpy form.

The dispatchers at the bottom pick the numba form when
:data:`sharpbounds._accel.USE_NUMBA` is true.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from ._accel import USE_NUMBA, njit

if TYPE_CHECKING:  # pragma: no cover
    from .polynomial import PolySystem


# ---------------------------------------------------------------------------
# polynomial systems
# ---------------------------------------------------------------------------


@njit
def _factor_values_nb(x, f_ptr, f_idx):
    nf = f_ptr.shape[0] - 1
    fv = np.empty(nf)
    for f in range(nf):
        s = 0.0
        for j in range(f_ptr[f], f_ptr[f + 1]):
            s += x[f_idx[j]]
        fv[f] = s
    return fv


@njit
def _eval_nb(x, f_ptr, f_idx, p_ptr, p_fac, p_coef, p_poly, n_polys):
    fv = _factor_values_nb(x, f_ptr, f_idx)
    out = np.zeros(n_polys)
    for p in range(p_ptr.shape[0] - 1):
        v = p_coef[p]
        for j in range(p_ptr[p], p_ptr[p + 1]):
            v *= fv[p_fac[j]]
        out[p_poly[p]] += v
    return out


@njit
def _eval_batch_nb(X, f_ptr, f_idx, p_ptr, p_fac, p_coef, p_poly, n_polys):
    m = X.shape[0]
    out = np.empty((m, n_polys))
    for r in range(m):
        out[r] = _eval_nb(X[r], f_ptr, f_idx, p_ptr, p_fac, p_coef, p_poly, n_polys)
    return out


@njit
def _jac_nb(x, f_ptr, f_idx, p_ptr, p_fac, p_coef, p_poly, n_polys):
    fv = _factor_values_nb(x, f_ptr, f_idx)
    J = np.zeros((n_polys, x.shape[0]))
    for p in range(p_ptr.shape[0] - 1):
        a, b = p_ptr[p], p_ptr[p + 1]
        d = b - a
        if d == 0:
            continue
        for s in range(d):
            cof = p_coef[p]
            for t in range(d):
                if t != s:
                    cof *= fv[p_fac[a + t]]
            if cof == 0.0:
                continue
            f = p_fac[a + s]
            for j in range(f_ptr[f], f_ptr[f + 1]):
                J[p_poly[p], f_idx[j]] += cof
    return J


def _factor_values_np(X: np.ndarray, f_ptr: np.ndarray, f_idx: np.ndarray) -> np.ndarray:
    if f_ptr.shape[0] <= 1:
        return np.zeros(X.shape[:-1] + (0,))
    return np.add.reduceat(X[..., f_idx], f_ptr[:-1], axis=-1)


def _product_matrix_np(fv: np.ndarray, p_ptr: np.ndarray, p_fac: np.ndarray) -> np.ndarray:
    """Factor values per product slot, padded with ones: (..., n_prod, max_deg)."""
    deg = np.diff(p_ptr)
    maxd = int(deg.max()) if deg.size else 0
    n_prod = deg.shape[0]
    M = np.ones(fv.shape[:-1] + (n_prod, max(maxd, 1)))
    for s in range(maxd):
        rows = np.nonzero(deg > s)[0]
        M[..., rows, s] = fv[..., p_fac[p_ptr[rows] + s]]
    return M


def _eval_batch_np(X, f_ptr, f_idx, p_ptr, p_fac, p_coef, p_poly, n_polys):
    X = np.atleast_2d(X)
    fv = _factor_values_np(X, f_ptr, f_idx)
    prod = _product_matrix_np(fv, p_ptr, p_fac).prod(axis=-1) * p_coef
    out = np.zeros((X.shape[0], n_polys))
    for k in range(n_polys):
        sel = p_poly == k
        if sel.any():
            out[:, k] = prod[:, sel].sum(axis=1)
    return out


def _jac_np(x, f_ptr, f_idx, p_ptr, p_fac, p_coef, p_poly, n_polys):
    fv = _factor_values_np(x[None, :], f_ptr, f_idx)[0]
    M = _product_matrix_np(fv, p_ptr, p_fac)
    deg = np.diff(p_ptr)
    J = np.zeros((n_polys, x.shape[0]))
    for s in range(M.shape[1]):
        rows = np.nonzero(deg > s)[0]
        if rows.size == 0:
            continue
        others = M[rows].copy()
        others[:, s] = 1.0
        cof = others.prod(axis=1) * p_coef[rows]
        fac = p_fac[p_ptr[rows] + s]
        lens = f_ptr[fac + 1] - f_ptr[fac]
        poly_rep = np.repeat(p_poly[rows], lens)
        cof_rep = np.repeat(cof, lens)
        starts = np.repeat(f_ptr[fac], lens)
        offs = np.arange(lens.sum()) - np.repeat(np.cumsum(lens) - lens, lens)
        var_rep = f_idx[starts + offs]
        np.add.at(J, (poly_rep, var_rep), cof_rep)
    return J


def eval_system(sys: "PolySystem", x: np.ndarray) -> np.ndarray:
    args = sys.arrays() + (sys.n_polys,)
    if USE_NUMBA:
        return _eval_nb(x, *args)
    return _eval_batch_np(x[None, :], *args)[0]


def eval_system_batch(sys: "PolySystem", X: np.ndarray) -> np.ndarray:
    args = sys.arrays() + (sys.n_polys,)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if USE_NUMBA:
        return _eval_batch_nb(X, *args)
    return _eval_batch_np(X, *args)


def jac_system(sys: "PolySystem", x: np.ndarray) -> np.ndarray:
    args = sys.arrays() + (sys.n_polys,)
    if USE_NUMBA:
        return _jac_nb(x, *args)
    return _jac_np(x, *args)


# ---------------------------------------------------------------------------
# Bernoulli KL inversion
# ---------------------------------------------------------------------------


@njit
def _kl_scalar(q, p):
    out = 0.0
    if q > 0.0:
        out += q * np.log(q / p) if p > 0.0 else np.inf
    if q < 1.0:
        out += (1.0 - q) * np.log((1.0 - q) / (1.0 - p)) if p < 1.0 else np.inf
    return out


@njit
def _kl_bounds_nb(phat, t, tol):
    k = phat.shape[0]
    lo = np.empty(k)
    hi = np.empty(k)
    for i in range(k):
        q = phat[i]
        # lower endpoint on [0, q]
        if q <= 0.0:
            lo[i] = 0.0
        else:
            a, b = 0.0, q
            while b - a > tol:
                mid = 0.5 * (a + b)
                if _kl_scalar(q, mid) > t:
                    a = mid
                else:
                    b = mid
            lo[i] = 0.5 * (a + b)
        if q >= 1.0:
            hi[i] = 1.0
        else:
            a, b = q, 1.0
            while b - a > tol:
                mid = 0.5 * (a + b)
                if _kl_scalar(q, mid) > t:
                    b = mid
                else:
                    a = mid
            hi[i] = 0.5 * (a + b)
    return lo, hi


def _kl_np(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0) / p), 0.0)
        b = np.where(q < 1, (1 - q) * np.log(np.where(q < 1, 1 - q, 1.0) / (1 - p)), 0.0)
    return a + b


def _kl_bounds_np(phat, t, tol):
    q = np.asarray(phat, dtype=float)
    a, b = np.zeros_like(q), q.copy()
    while np.any(b - a > tol):
        mid = 0.5 * (a + b)
        above = _kl_np(q, mid) > t
        a = np.where(above, mid, a)
        b = np.where(above, b, mid)
    lo = np.where(q <= 0, 0.0, 0.5 * (a + b))
    a, b = q.copy(), np.ones_like(q)
    while np.any(b - a > tol):
        mid = 0.5 * (a + b)
        above = _kl_np(q, mid) > t
        b = np.where(above, mid, b)
        a = np.where(above, a, mid)
    hi = np.where(q >= 1, 1.0, 0.5 * (a + b))
    return lo, hi


def kl_bounds(phat: np.ndarray, t: float, tol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``KL(phat_k || p) = t`` below and above each ``phat_k`` by bisection."""
    phat = np.ascontiguousarray(phat, dtype=np.float64)
    if USE_NUMBA:
        return _kl_bounds_nb(phat, float(t), float(tol))
    return _kl_bounds_np(phat, float(t), float(tol))


# ---------------------------------------------------------------------------
# penalty coordinate search (primal heuristic)
# ---------------------------------------------------------------------------
#
# Moves: for a simplex parameter i, set x_i <- clip(x_i + d, 0, 1) and rescale
# the rest of its group to keep the sum at one; a free (non-simplex) variable
# moves by d inside its box.  Each sweep tries +-step on every coordinate and
# takes the single best improving move; the step halves when nothing improves.


@njit
def _penalty_nb(vals, kind, rhs, rho, sign):
    out = sign * vals[0]
    for k in range(1, vals.shape[0]):
        r = vals[k] - rhs[k]
        if kind[k] == 1:
            out += rho * r * r
        elif kind[k] == 2:
            if r > 0.0:
                out += rho * r * r
        elif kind[k] == 3:
            if r < 0.0:
                out += rho * r * r
    return out


@njit
def _apply_move_nb(x, i, d, group_id, g_ptr, g_idx, lo, hi, out):
    out[:] = x
    g = group_id[i]
    if g < 0:
        v = x[i] + d
        if v < lo[i]:
            v = lo[i]
        if v > hi[i]:
            v = hi[i]
        out[i] = v
        return v != x[i]
    t = x[i] + d
    if t < 0.0:
        t = 0.0
    if t > 1.0:
        t = 1.0
    if t == x[i]:
        return False
    rest = 1.0 - x[i]
    a, b = g_ptr[g], g_ptr[g + 1]
    if rest <= 1e-15:
        share = (1.0 - t) / (b - a - 1) if b - a > 1 else 0.0
        for j in range(a, b):
            out[g_idx[j]] = share
    else:
        scale = (1.0 - t) / rest
        for j in range(a, b):
            out[g_idx[j]] = x[g_idx[j]] * scale
    out[i] = t
    return True


@njit
def _penalty_search_nb(
    x0, f_ptr, f_idx, p_ptr, p_fac, p_coef, p_poly, n_polys,
    kind, rhs, group_id, g_ptr, g_idx, lo, hi, coords,
    rho, sign, step0, step_min, max_sweeps,
):
    x = x0.copy()
    cand = np.empty_like(x)
    best_x = x.copy()
    cur = _penalty_nb(_eval_nb(x, f_ptr, f_idx, p_ptr, p_fac, p_coef, p_poly, n_polys), kind, rhs, rho, sign)
    step = step0
    sweeps = 0
    while sweeps < max_sweeps and step >= step_min:
        sweeps += 1
        best = cur
        found = False
        for ci in range(coords.shape[0]):
            i = coords[ci]
            for s in (-1.0, 1.0):
                if not _apply_move_nb(x, i, s * step, group_id, g_ptr, g_idx, lo, hi, cand):
                    continue
                v = _penalty_nb(
                    _eval_nb(cand, f_ptr, f_idx, p_ptr, p_fac, p_coef, p_poly, n_polys), kind, rhs, rho, sign
                )
                if v < best - 1e-15 * (1.0 + abs(best)):
                    best = v
                    best_x[:] = cand
                    found = True
        if found:
            x[:] = best_x
            cur = best
        else:
            step *= 0.5
    return x, cur


def _penalty_np(vals, kind, rhs, rho, sign):
    r = vals[:, 1:] - rhs[1:]
    k = kind[1:]
    v = np.where(k == 1, r, np.where(k == 2, np.maximum(r, 0.0), np.where(k == 3, np.minimum(r, 0.0), 0.0)))
    return sign * vals[:, 0] + rho * (v * v).sum(axis=1)


def _candidates_np(x, coords, step, group_id, g_ptr, g_idx, lo, hi):
    """All +-step moves as rows; rows that do not move are dropped."""
    m = coords.shape[0]
    C = np.repeat(x[None, :], 2 * m, axis=0)
    d = np.concatenate([-np.full(m, step), np.full(m, step)])
    idx = np.concatenate([coords, coords])
    # order matches the loop form: for each coordinate, -step then +step
    order = np.empty(2 * m, dtype=np.int64)
    order[0::2] = np.arange(m)
    order[1::2] = np.arange(m) + m
    d, idx = d[order], idx[order]
    moved = np.zeros(2 * m, dtype=bool)
    for r in range(2 * m):
        i = idx[r]
        g = group_id[i]
        if g < 0:
            v = min(max(x[i] + d[r], lo[i]), hi[i])
            C[r, i] = v
            moved[r] = v != x[i]
            continue
        t = min(max(x[i] + d[r], 0.0), 1.0)
        if t == x[i]:
            continue
        members = g_idx[g_ptr[g] : g_ptr[g + 1]]
        rest = 1.0 - x[i]
        if rest <= 1e-15:
            C[r, members] = (1.0 - t) / (len(members) - 1) if len(members) > 1 else 0.0
        else:
            C[r, members] = x[members] * ((1.0 - t) / rest)
        C[r, i] = t
        moved[r] = True
    return C[moved]


def _penalty_search_np(
    x0, f_ptr, f_idx, p_ptr, p_fac, p_coef, p_poly, n_polys,
    kind, rhs, group_id, g_ptr, g_idx, lo, hi, coords,
    rho, sign, step0, step_min, max_sweeps,
):
    x = x0.copy()
    args = (f_ptr, f_idx, p_ptr, p_fac, p_coef, p_poly, n_polys)
    cur = _penalty_np(_eval_batch_np(x[None, :], *args), kind, rhs, rho, sign)[0]
    step = step0
    sweeps = 0
    while sweeps < max_sweeps and step >= step_min:
        sweeps += 1
        C = _candidates_np(x, coords, step, group_id, g_ptr, g_idx, lo, hi)
        if C.shape[0]:
            vals = _penalty_np(_eval_batch_np(C, *args), kind, rhs, rho, sign)
            k = int(np.argmin(vals))  # first minimiser, as in the loop form
            if vals[k] < cur - 1e-15 * (1.0 + abs(cur)):
                x = C[k].copy()
                cur = vals[k]
                continue
        step *= 0.5
    return x, cur


def penalty_search(
    sys: "PolySystem",
    x0: np.ndarray,
    kind: np.ndarray,
    rhs: np.ndarray,
    group_id: np.ndarray,
    g_ptr: np.ndarray,
    g_idx: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    *,
    rho: float,
    sign: float,
    step0: float = 0.1,
    step_min: float = 1e-9,
    max_sweeps: int = 400,
) -> tuple[np.ndarray, float]:
    """Minimise ``sign*obj + rho*sum(violation^2)`` by coordinate search.

    Polynomial 0 of ``sys`` is the objective; ``kind[k]`` is 1 for equality,
    2 for ``<=`` and 3 for ``>=`` rows.
    """
    coords = np.nonzero((group_id >= 0) | (hi > lo))[0].astype(np.int64)
    args = (
        np.ascontiguousarray(x0, dtype=np.float64),
        *sys.arrays(),
        sys.n_polys,
        kind.astype(np.int64),
        rhs.astype(np.float64),
        group_id.astype(np.int64),
        g_ptr.astype(np.int64),
        g_idx.astype(np.int64),
        lo.astype(np.float64),
        hi.astype(np.float64),
        coords,
        float(rho),
        float(sign),
        float(step0),
        float(step_min),
        int(max_sweeps),
    )
    if USE_NUMBA:
        x, v = _penalty_search_nb(*args)
    else:
        x, v = _penalty_search_np(*args)
    return x, float(v)
