from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharpbounds.harness import load_scenario, population_evidence
from sharpbounds.polynomial import Polynomial
from sharpbounds.program import Constraint, PolynomialProgram, build_program
from sharpbounds.relax import Relaxation

V = Polynomial.variable


def lift(r: Relaxation, x: np.ndarray) -> np.ndarray:
    """Exact values of every relaxation column at a point of the original space."""
    z = np.zeros(r.n_cols)
    z[: r.n_x] = x
    for k, f in enumerate(r.forms):
        z[r.n_x + k] = x[list(f)].sum()
    for k in range(r.n_nodes):
        z[r.n_branch + k] = z[r.node_a[k]] * z[r.node_b[k]]
    return z


def _iv_unconstrained():
    sc = load_scenario("iv_exclusion")
    # no evidence: every simplex point is feasible; the objective is a product over two disturbances
    return build_program(sc.graph, None, [], "P(Y=1, X=1)")


def _random_point(p, rng):
    x = np.empty(p.n_vars)
    for g in p.simplex_groups:
        x[list(g)] = rng.dirichlet(np.ones(len(g)))
    return x


def _sub_box(box, z, rng):
    """A random box inside ``box`` that still contains ``z``."""
    lo, hi = box[:, 0].copy(), box[:, 1].copy()
    fin = np.isfinite(lo) & np.isfinite(hi)
    t = rng.random(len(z))
    lo[fin] = lo[fin] + t[fin] * (z[fin] - lo[fin])
    t = rng.random(len(z))
    hi[fin] = hi[fin] - t[fin] * (hi[fin] - z[fin])
    return np.column_stack([lo, hi])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mccormick_rows_hold_at_lifted_points(seed):
    p = _iv_unconstrained()
    r = Relaxation(p)
    assert r.nonlinear
    rng = np.random.default_rng(seed)
    x = _random_point(p, rng)
    z = lift(r, x)
    box = r.initial_box()
    assert np.all(box[:, 0] <= z + 1e-12) and np.all(z <= box[:, 1] + 1e-12)
    for b in (box, _sub_box(box, z, rng)):
        A, rhs = r.mccormick(b)
        assert np.all(A @ z <= rhs + 1e-9)
        assert np.allclose(r.A_eq @ z, r.b_eq, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_propagation_keeps_feasible_points(seed):
    p = _iv_unconstrained()
    r = Relaxation(p)
    rng = np.random.default_rng(seed)
    z = lift(r, _random_point(p, rng))
    b = r.propagate(_sub_box(r.initial_box(), z, rng))
    assert np.all(b[:, 0] <= z + 1e-9) and np.all(z <= b[:, 1] + 1e-9)


def test_relaxed_bounds_enclose_true_values():
    p = _iv_unconstrained()
    r = Relaxation(p)
    box = r.initial_box()
    lo = r.solve(box).value
    hi = r.solve(box, maximize=True).value
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = p.objective.evaluate(_random_point(p, rng))
        assert lo - 1e-9 <= v <= hi + 1e-9


def _square_program():
    # minimise / maximise x^2 - x over x in [-1, 2]
    obj = V(0) * V(0) - V(0)
    return PolynomialProgram(obj, (), ((Fraction(-1), Fraction(2)),), (), ("x",))


def test_square_tangents_tighten_the_relaxation():
    p = _square_program()
    r = Relaxation(p)
    box = r.initial_box()
    lo = r.solve(box).value
    # true minimum is -1/4 at x = 1/2; tangents at 15 interior points leave a small gap
    assert lo <= -0.25 + 1e-12
    assert lo >= -0.25 - 0.02
    for x in np.linspace(-1, 2, 31):
        z = lift(r, np.array([x]))
        A, rhs = r.mccormick(box)
        assert np.all(A @ z <= rhs + 1e-9)


def test_constant_violation_is_infeasible():
    p = PolynomialProgram(
        V(0),
        (Constraint(Polynomial.constant(1), "=", Fraction(0)),),
        ((Fraction(0), Fraction(1)),),
        (),
        ("x",),
    )
    assert Relaxation(p).solve(Relaxation(p).initial_box()).status == "infeasible"


def test_linear_program_has_no_product_columns():
    sc = load_scenario("iv_exclusion")
    p = build_program(sc.graph, population_evidence(sc.dgp), sc.assumptions, "ATE(X,Y)")
    r = Relaxation(p)
    assert not r.nonlinear
    assert r.n_nodes == 0
    res = r.solve(r.initial_box())
    assert res.ok
    assert res.value == pytest.approx(-0.445111, abs=1e-6)
