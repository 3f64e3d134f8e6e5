"""Confidence regions for multinomial evidence and loosened programs."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Literal, Sequence

import numpy as np

from . import kernels
from .polynomial import Polynomial
from .program import Constraint, PolynomialProgram

__all__ = [
    "InferenceError",
    "ConfidenceRegion",
    "kl_threshold",
    "kl_region",
    "gamma_p",
    "chi2_cdf",
    "chi2_quantile",
    "gaussian_region",
    "confidence_regions",
    "loosen",
]


class InferenceError(ValueError):
    pass


@dataclass(frozen=True)
class ConfidenceRegion:
    """Region for the cell probabilities of one evidence table.

    ``kl_box`` carries per-cell ``lower``/``upper``.  ``gaussian_ellipsoid``
    is ``n * (c - p)' P (c - p) <= radius`` over the first K-1 cells, with
    ``c = center`` and ``P = precision`` (the inverse multinomial covariance).
    """

    kind: Literal["kl_box", "gaussian_ellipsoid"]
    phat: np.ndarray
    n: int
    level: float
    table: int = 0
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    center: np.ndarray | None = None
    precision: np.ndarray | None = None
    radius: float | None = None

    @property
    def k(self) -> int:
        return int(self.phat.shape[0])

    def contains(self, p: Sequence[float], tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        if self.kind == "kl_box":
            return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))
        d = self.center - p[:-1]
        return bool(self.n * d @ self.precision @ d <= self.radius + tol)

    def quadratic_value(self, p: Sequence[float]) -> float:
        """Left-hand side of the ellipsoid inequality at ``p``."""
        if self.kind != "gaussian_ellipsoid":
            raise InferenceError("not an ellipsoid")
        d = self.center - np.asarray(p, dtype=float)[:-1]
        return float(self.n * d @ self.precision @ d)


def _check(counts: Sequence[int], level: float) -> np.ndarray:
    c = np.asarray(counts, dtype=np.int64)
    if np.any(c < 0):
        raise InferenceError("negative count")
    if c.sum() <= 0:
        raise InferenceError("no observations (N = 0)")
    if not 0.0 < level < 1.0:
        raise InferenceError("confidence level must lie in (0, 1)")
    return c


# ---------------------------------------------------------------------------
# Bernoulli KL
# ---------------------------------------------------------------------------


def kl_threshold(n: int, k: int, level: float) -> float:
    return math.log(2.0 * k / (1.0 - level)) / n


def kl_region(counts: Sequence[int], alpha: float, table: int = 0) -> ConfidenceRegion:
    """Per-cell intervals ``{p : KL(phat_k || p) <= log(2K / (1 - alpha)) / N}``.

    ``alpha`` is the confidence level (0.95 for 95%).
    """
    c = _check(counts, alpha)
    n = int(c.sum())
    phat = c / n
    t = kl_threshold(n, len(c), alpha)
    lo, hi = kernels.kl_bounds(phat, t, tol=1e-13)
    return ConfidenceRegion("kl_box", phat, n, alpha, table, lower=lo, upper=hi)


# ---------------------------------------------------------------------------
# chi-square quantile
# ---------------------------------------------------------------------------


def gamma_p(a: float, x: float) -> float:
    """Regularised lower incomplete gamma ``P(a, x)``."""
    if x <= 0.0:
        return 0.0
    if x < a + 1.0:
        term = 1.0 / a
        total = term
        ap = a
        for _ in range(10_000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
        return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    # continued fraction for Q(a, x), modified Lentz
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    q = math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    return 1.0 - q


def chi2_cdf(x: float, df: int) -> float:
    return gamma_p(df / 2.0, x / 2.0)


def chi2_quantile(q: float, df: int, tol: float = 1e-12) -> float:
    """Quantile of the chi-square distribution by bracketing and bisection."""
    if not 0.0 <= q < 1.0:
        raise InferenceError("quantile level must lie in [0, 1)")
    if df < 1:
        raise InferenceError("degrees of freedom must be positive")
    if q == 0.0:
        return 0.0
    lo, hi = 0.0, max(1.0, float(df))
    while chi2_cdf(hi, df) < q:
        lo, hi = hi, hi * 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gaussian_region(counts: Sequence[int], alpha: float, table: int = 0) -> ConfidenceRegion:
    """Wald ellipsoid with radius the chi-square(K-1) quantile at ``alpha``."""
    c = _check(counts, alpha)
    if np.any(c == 0):
        raise InferenceError(
            "a cell has zero count, so the covariance is singular; use the KL method or merge cells"
        )
    n = int(c.sum())
    phat = c / n
    ph = phat[:-1]
    cov = np.diag(ph) - np.outer(ph, ph)
    precision = np.linalg.inv(cov)
    z = chi2_quantile(alpha, len(c) - 1)
    return ConfidenceRegion(
        "gaussian_ellipsoid", phat, n, alpha, table, center=ph, precision=precision, radius=z
    )


def confidence_regions(
    p: PolynomialProgram, alpha: float, method: Literal["kl", "gaussian"]
) -> list[ConfidenceRegion]:
    """One region per counted evidence table, Bonferroni-split across tables."""
    counted = [(i, t) for i, t in enumerate(p.evidence) if t.counts is not None]
    if not counted:
        raise InferenceError("confidence regions need evidence given as counts")
    level = 1.0 - (1.0 - alpha) / len(counted)
    make = kl_region if method == "kl" else gaussian_region
    return [make(t.counts, level, table=i) for i, t in counted]


# ---------------------------------------------------------------------------
# loosening
# ---------------------------------------------------------------------------


def _frac(v: float) -> Fraction:
    return Fraction(repr(float(v)))


def loosen(p: PolynomialProgram, regions: ConfidenceRegion | Sequence[ConfidenceRegion]) -> PolynomialProgram:
    """Replace tagged evidence equalities by confidence-region constraints."""
    if isinstance(regions, ConfidenceRegion):
        regions = [regions]
    by_table: dict[int, list[Constraint]] = {}
    for c in p.constraints:
        if c.tag is not None:
            by_table.setdefault(c.tag[0], []).append(c)
    touched = {r.table for r in regions}
    for r in regions:
        cells = sorted(by_table.get(r.table, []), key=lambda c: c.tag[1])
        if len(cells) != r.k or [c.tag[1] for c in cells] != list(range(r.k)):
            raise InferenceError(f"evidence table {r.table} has no matching tagged cells")
        if any(c.numerator is None or c.denominator is None for c in cells):
            raise InferenceError(f"evidence table {r.table} lost its cell ratios during simplification")

    kept = [c for c in p.constraints if c.tag is None or c.tag[0] not in touched]
    names = list(p.var_names)
    boxes = list(p.var_boxes)
    aux = list(p.aux_vars)
    added: list[Constraint] = []
    for r in regions:
        cells = sorted(by_table[r.table], key=lambda c: c.tag[1])
        if r.kind == "kl_box":
            for c, lo, hi in zip(cells, r.lower, r.upper):
                num, den = c.numerator, c.denominator
                added.append(Constraint(num - den * _frac(lo), ">=", Fraction(0), tag=c.tag, label=f"{c.label} lo"))
                added.append(Constraint(num - den * _frac(hi), "<=", Fraction(0), tag=c.tag, label=f"{c.label} hi"))
            continue
        # Gaussian: y = L'(phat*D - N) with precision = L L', then sum y^2 <= (z/n) D^2
        L = np.linalg.cholesky(r.precision)
        den = cells[0].denominator
        diffs = [den * _frac(ph) - c.numerator for c, ph in zip(cells[:-1], r.center)]
        ys = []
        # |y_i| <= sqrt(z/n) * D and D is a probability
        bound = _frac(math.sqrt(r.radius / r.n) * 1.000001)
        for i in range(L.shape[1]):
            j = len(names)
            names.append(f"y{r.table}_{i}")
            boxes.append((-bound, bound))
            aux.append(j)
            ys.append(j)
            expr = Polynomial.variable(j)
            for row in range(L.shape[0]):
                if L[row, i] != 0.0:
                    expr = expr - diffs[row] * _frac(L[row, i])
            added.append(Constraint(expr, "=", Fraction(0), tag=(r.table, -1), label=f"y{r.table}_{i} def"))
        quad = Polynomial({((j,), (j,)): 1 for j in ys}) - den * den * _frac(r.radius / r.n)
        added.append(Constraint(quad, "<=", Fraction(0), tag=(r.table, -1), label=f"ellipsoid {r.table}"))
    meta = dict(p.meta)
    meta["regions"] = tuple(regions)
    return replace(
        p,
        constraints=tuple(kept + added),
        var_boxes=tuple(boxes),
        var_names=tuple(names),
        aux_vars=tuple(aux),
        meta=meta,
    )
