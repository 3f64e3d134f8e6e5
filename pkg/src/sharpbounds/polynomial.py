"""Sparse polynomials over model parameters with exact rational coefficients.

A polynomial is stored as a sum of products of *linear forms*, each linear
form being a sum of parameters with unit coefficients.  Polynomialization
produces exactly this shape (one subset-sum of a disturbance's strata per
factor), and keeping it factored avoids the exponential blow-up of expanding
into monomials.  :meth:`Polynomial.terms` gives the canonical monomial
expansion.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

Factor = tuple[int, ...]
Product = tuple[Factor, ...]
Number = Union[int, Fraction]

__all__ = ["Factor", "Polynomial", "PolySystem"]


def _as_fraction(c: Number | float) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, float):
        return Fraction(repr(c))
    return Fraction(c)


def _key(factors: Iterable[Factor]) -> Product:
    return tuple(sorted(factors))


class Polynomial:
    """Immutable polynomial ``sum_k c_k * prod_j (sum_{i in F_kj} x_i)``."""

    __slots__ = ("_products", "_terms", "_hash")

    def __init__(self, products: Mapping[Product, Number] | None = None) -> None:
        clean: dict[Product, Fraction] = {}
        for key, c in (products or {}).items():
            c = _as_fraction(c)
            if c == 0:
                continue
            if any(len(f) == 0 for f in key):
                continue  # an empty linear form is zero
            k = _key(key)
            clean[k] = clean.get(k, Fraction(0)) + c
            if clean[k] == 0:
                del clean[k]
        self._products = clean
        self._terms: dict[tuple[int, ...], Fraction] | None = None
        self._hash: int | None = None

    # -- constructors --------------------------------------------------
    @classmethod
    def constant(cls, c: Number | float) -> "Polynomial":
        return cls({(): c})

    @classmethod
    def variable(cls, i: int) -> "Polynomial":
        return cls({((int(i),),): 1})

    @classmethod
    def linear_form(cls, idx: Iterable[int]) -> "Polynomial":
        f = tuple(sorted({int(i) for i in idx}))
        return cls({(f,): 1}) if f else cls()

    @classmethod
    def from_terms(cls, terms: Mapping[Sequence[int], Number]) -> "Polynomial":
        return cls({tuple((int(i),) for i in sorted(m)): c for m, c in terms.items()})

    # -- inspection ----------------------------------------------------
    @property
    def products(self) -> dict[Product, Fraction]:
        return dict(self._products)

    def items(self) -> Iterable[tuple[Product, Fraction]]:
        return self._products.items()

    def is_zero(self) -> bool:
        return not self._products

    def is_constant(self) -> bool:
        return all(len(k) == 0 for k in self._products)

    def constant_term(self) -> Fraction:
        return self._products.get((), Fraction(0))

    @property
    def degree(self) -> int:
        return max((len(k) for k in self._products), default=0)

    def variables(self) -> set[int]:
        out: set[int] = set()
        for key in self._products:
            for f in key:
                out.update(f)
        return out

    def factors(self) -> set[Factor]:
        return {f for key in self._products for f in key}

    def terms(self) -> dict[tuple[int, ...], Fraction]:
        """Canonical expansion: sorted monomial tuple -> coefficient."""
        if self._terms is None:
            acc: dict[tuple[int, ...], Fraction] = {}
            for key, c in self._products.items():
                for combo in itertools.product(*key):
                    m = tuple(sorted(combo))
                    acc[m] = acc.get(m, Fraction(0)) + c
            self._terms = {m: c for m, c in sorted(acc.items()) if c != 0}
        return dict(self._terms)

    def n_terms(self) -> int:
        if len(self._products) == 1:
            (key,) = self._products
            n = 1
            for f in key:
                n *= len(f)
            flat = [i for f in key for i in f]
            if len(flat) == len(set(flat)):
                return n
        return len(self.terms())

    # -- arithmetic ----------------------------------------------------
    def _combine(self, other: "Polynomial", sign: int) -> "Polynomial":
        out = dict(self._products)
        for k, c in other._products.items():
            out[k] = out.get(k, Fraction(0)) + sign * c
        return Polynomial(out)

    def __add__(self, other: "Polynomial | Number") -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        return self._combine(other, 1)

    __radd__ = __add__

    def __sub__(self, other: "Polynomial | Number") -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        return self._combine(other, -1)

    def __rsub__(self, other: Number) -> "Polynomial":
        return Polynomial.constant(other) - self

    def __neg__(self) -> "Polynomial":
        return Polynomial({k: -c for k, c in self._products.items()})

    def __mul__(self, other: "Polynomial | Number") -> "Polynomial":
        if not isinstance(other, Polynomial):
            c = _as_fraction(other)
            return Polynomial({k: c * v for k, v in self._products.items()})
        out: dict[Product, Fraction] = {}
        for k1, c1 in self._products.items():
            for k2, c2 in other._products.items():
                k = _key(k1 + k2)
                out[k] = out.get(k, Fraction(0)) + c1 * c2
        return Polynomial(out)

    __rmul__ = __mul__

    def remap(self, mapping: Mapping[int, int]) -> "Polynomial":
        return Polynomial(
            {tuple(tuple(sorted(mapping[i] for i in f)) for f in k): c for k, c in self._products.items()}
        )

    # -- evaluation ----------------------------------------------------
    def evaluate(self, x: Sequence[float] | np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        total = 0.0
        for key, c in self._products.items():
            v = float(c)
            for f in key:
                v *= float(x[list(f)].sum())
            total += v
        return total

    def evaluate_exact(self, x: Sequence[Fraction]) -> Fraction:
        total = Fraction(0)
        for key, c in self._products.items():
            v = c
            for f in key:
                v *= sum((x[i] for i in f), Fraction(0))
            total += v
        return total

    # -- dunder --------------------------------------------------------
    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        if self._products == other._products:
            return True
        return self.terms() == other.terms()

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self.terms().items()))
        return self._hash

    def __repr__(self) -> str:
        if not self._products:
            return "Polynomial(0)"
        parts = []
        for key, c in sorted(self._products.items()):
            fs = "*".join("(" + "+".join(f"x{i}" for i in f) + ")" if len(f) > 1 else f"x{f[0]}" for f in key)
            parts.append(f"{c}" + (f"*{fs}" if fs else ""))
        text = " + ".join(parts)
        return f"Polynomial({text[:200]}{'...' if len(text) > 200 else ''})"


class PolySystem:
    """Flat array encoding of several polynomials for fast numeric evaluation.

    Layout: unique linear forms (``factor_ptr``/``factor_idx``), products
    (``prod_ptr``/``prod_fac``, ``prod_coef``, ``prod_poly``).
    """

    def __init__(self, polys: Sequence[Polynomial], n_vars: int) -> None:
        self.n_vars = int(n_vars)
        self.n_polys = len(polys)
        factor_id: dict[Factor, int] = {}
        f_ptr = [0]
        f_idx: list[int] = []
        p_ptr = [0]
        p_fac: list[int] = []
        p_coef: list[float] = []
        p_poly: list[int] = []
        for k, poly in enumerate(polys):
            for key, c in poly.items():
                for f in key:
                    if f not in factor_id:
                        factor_id[f] = len(factor_id)
                        f_idx.extend(f)
                        f_ptr.append(len(f_idx))
                    p_fac.append(factor_id[f])
                p_ptr.append(len(p_fac))
                p_coef.append(float(c))
                p_poly.append(k)
        self.factor_ptr = np.asarray(f_ptr, dtype=np.int64)
        self.factor_idx = np.asarray(f_idx, dtype=np.int64)
        self.prod_ptr = np.asarray(p_ptr, dtype=np.int64)
        self.prod_fac = np.asarray(p_fac, dtype=np.int64)
        self.prod_coef = np.asarray(p_coef, dtype=np.float64)
        self.prod_poly = np.asarray(p_poly, dtype=np.int64)
        self.factors = list(factor_id)

    @property
    def n_factors(self) -> int:
        return len(self.factor_ptr) - 1

    @property
    def n_products(self) -> int:
        return len(self.prod_ptr) - 1

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (
            self.factor_ptr,
            self.factor_idx,
            self.prod_ptr,
            self.prod_fac,
            self.prod_coef,
            self.prod_poly,
        )

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        from . import kernels

        return kernels.eval_system(self, np.asarray(x, dtype=np.float64))

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        from . import kernels

        return kernels.jac_system(self, np.asarray(x, dtype=np.float64))
