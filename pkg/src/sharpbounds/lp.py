"""Linear programs through scipy's HiGHS interface."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

__all__ = ["LPResult", "lp_solve"]

_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
    "presolve": True,
}

# Minimum total violation (elastic phase 1) below which an "infeasible"
# verdict from HiGHS is treated as a numerical artefact.
INFEASIBLE_MARGIN = 1e-8


@dataclass(frozen=True)
class LPResult:
    status: Literal["optimal", "infeasible", "error"]
    value: float = float("nan")
    x: np.ndarray | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def lp_solve(
    c: np.ndarray,
    A_ub: sp.spmatrix | np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    A_eq: sp.spmatrix | np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    bounds: np.ndarray | None = None,
    *,
    maximize: bool = False,
) -> LPResult:
    """Minimise (or maximise) ``c @ x`` subject to rows and box ``bounds`` (n x 2).

    An infeasible result is only reported when HiGHS proves primal
    infeasibility; every other failure is ``"error"``.
    """
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    if bounds is None:
        bounds = np.tile([0.0, np.inf], (n, 1))
    bounds = np.asarray(bounds, dtype=float)
    if np.any(bounds[:, 0] > bounds[:, 1] + 1e-12):
        return LPResult("infeasible", message="empty box")
    bounds = np.column_stack([bounds[:, 0], np.maximum(bounds[:, 0], bounds[:, 1])])
    if A_ub is not None and A_ub.shape[0] == 0:
        A_ub, b_ub = None, None
    if A_eq is not None and A_eq.shape[0] == 0:
        A_eq, b_eq = None, None
    sign = -1.0 if maximize else 1.0
    try:
        res = linprog(
            sign * c,
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=A_eq,
            b_eq=b_eq,
            bounds=bounds,
            method="highs",
            options=_OPTIONS,
        )
        if res.status == 2:
            # tight tolerances occasionally make HiGHS reject feasible, badly scaled boxes
            res = linprog(sign * c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    except ValueError as exc:  # malformed input
        return LPResult("error", message=str(exc))
    if res.status == 0:
        return LPResult("optimal", float(sign * res.fun), np.asarray(res.x), res.message)
    if res.status == 2:
        v = min_violation(A_ub, b_ub, A_eq, b_eq, bounds)
        if v is not None and v > INFEASIBLE_MARGIN:
            return LPResult("infeasible", message=res.message)
        return LPResult("error", message=f"unconfirmed infeasibility (violation {v})")
    return LPResult("error", message=res.message)


def min_violation(
    A_ub: sp.spmatrix | np.ndarray | None,
    b_ub: np.ndarray | None,
    A_eq: sp.spmatrix | np.ndarray | None,
    b_eq: np.ndarray | None,
    bounds: np.ndarray,
) -> float | None:
    """Smallest total row violation over the box (elastic phase 1), or None on failure."""
    n = bounds.shape[0]
    m_ub = 0 if A_ub is None else A_ub.shape[0]
    m_eq = 0 if A_eq is None else A_eq.shape[0]
    n_s = m_ub + 2 * m_eq
    if n_s == 0:
        return 0.0
    blocks_ub, blocks_eq = None, None
    if m_ub:
        blocks_ub = sp.hstack(
            [sp.csr_matrix(A_ub), -sp.eye(m_ub, n_s, 0, format="csr")], format="csr"
        )
    if m_eq:
        s_part = sp.hstack(
            [sp.csr_matrix((m_eq, m_ub)), sp.eye(m_eq, format="csr"), -sp.eye(m_eq, format="csr")], format="csr"
        )
        blocks_eq = sp.hstack([sp.csr_matrix(A_eq), s_part], format="csr")
    cost = np.concatenate([np.zeros(n), np.ones(n_s)])
    box = np.vstack([bounds, np.column_stack([np.zeros(n_s), np.full(n_s, np.inf)])])
    res = linprog(
        cost, A_ub=blocks_ub, b_ub=b_ub, A_eq=blocks_eq, b_eq=b_eq, bounds=box, method="highs"
    )
    return float(res.fun) if res.status == 0 else None
