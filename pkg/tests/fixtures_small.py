"""Small programs (at most four free parameters) with known or gridded bounds."""

from __future__ import annotations

from fractions import Fraction

from sharpbounds.graph import parse_graph
from sharpbounds.polynomial import Polynomial
from sharpbounds.program import Constraint, PolynomialProgram, build_program, load_evidence

V = Polynomial.variable
F = Fraction


def product_on_segment() -> PolynomialProgram:
    """x*y with x + y = 1: bounds [0, 1/4]."""
    return PolynomialProgram(V(0) * V(1), (), ((F(0), F(1)),) * 2, ((0, 1),), ("x", "y"))


def ball() -> PolynomialProgram:
    """x + y over the quarter disc x^2 + y^2 <= 1/2 in the unit box: bounds [0, 1]."""
    con = Constraint(V(0) * V(0) + V(1) * V(1), "<=", F(1, 2))
    return PolynomialProgram(V(0) + V(1), (con,), ((F(0), F(1)),) * 2, (), ("x", "y"))


def bilinear_equality() -> PolynomialProgram:
    """x0 + y0 with x0*y0 = 1/5 on two binary simplices."""
    con = Constraint(V(0) * V(2), "=", F(1, 5))
    return PolynomialProgram(
        V(0) + V(2), (con,), ((F(0), F(1)),) * 4, ((0, 1), (2, 3)), ("x0", "x1", "y0", "y1")
    )


def no_confounding() -> PolynomialProgram:
    """X -> Y without confounding, only P(Y=1) observed; target P(Y(X=1)=1)."""
    g = parse_graph("X -> Y\ncard: X=2, Y=2")
    ev = load_evidence('{"statements": ["P(Y=1) = 0.2", "P(X=1) = 0.3"]}')
    return build_program(g, ev, [], "P(Y(X=1)=1)")


def cubic_box() -> PolynomialProgram:
    """x*y*z - x/2 over the unit cube with x + y + z <= 2."""
    con = Constraint(V(0) + V(1) + V(2), "<=", F(2))
    obj = V(0) * V(1) * V(2) - V(0) * F(1, 2)
    return PolynomialProgram(obj, (con,), ((F(0), F(1)),) * 3, (), ("x", "y", "z"))


SMALL = {
    "product_on_segment": product_on_segment,
    "ball": ball,
    "bilinear_equality": bilinear_equality,
    "no_confounding": no_confounding,
    "cubic_box": cubic_box,
}


def free_parameters(p: PolynomialProgram) -> int:
    grouped = sum(len(g) for g in p.simplex_groups)
    return p.n_vars - grouped + sum(len(g) - 1 for g in p.simplex_groups)
