from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from sharpbounds.harness import run_scenario
from sharpbounds.polynomial import Polynomial
from sharpbounds.program import Constraint, PolynomialProgram
from sharpbounds.solver import PROGRESS_HEADER, Feasibility, SolveOptions, solve

from .fixtures_small import SMALL

V = Polynomial.variable
F = Fraction


def _check_anytime(r, tol=1e-9):
    traj = r.trajectory
    assert traj
    for a, b in zip(traj, traj[1:]):
        assert b.dual_lo >= a.dual_lo - tol
        assert b.dual_hi <= a.dual_hi + tol
        assert b.iter >= a.iter
    for rec in traj:
        if np.isfinite(rec.primal_lo):
            assert rec.dual_lo <= rec.primal_lo + tol
            assert rec.primal_hi <= rec.dual_hi + tol


def test_product_on_segment_bounds():
    r = solve(SMALL["product_on_segment"]())
    assert r.status == "sharp"
    assert r.bounds == pytest.approx((0.0, 0.25), abs=1e-6)
    _check_anytime(r)


def test_witnesses_are_feasible_and_attain_the_primal_bounds():
    p = SMALL["bilinear_equality"]()
    r = solve(p)
    feas = Feasibility(p)
    for x, v in ((r.witness_lo, r.primal_lo), (r.witness_hi, r.primal_hi)):
        assert feas.violation(x) <= 1e-8
        assert feas.objective(x) == pytest.approx(v, abs=1e-12)
    assert r.primal_lo == pytest.approx(2 / np.sqrt(5), abs=1e-6)


def test_infeasible_program_has_certificate():
    # x*y >= 0.3 is impossible on x + y = 1
    con = Constraint(V(0) * V(1), ">=", F(3, 10))
    p = PolynomialProgram(V(0), (con,), ((F(0), F(1)),) * 2, ((0, 1),), ("x", "y"))
    r = solve(p)
    assert r.status == "infeasible"
    assert r.certificate
    d = r.to_dict()
    assert d["bounds"]["primal_lo"] is None


@pytest.fixture(scope="module")
def nonresponse():
    return run_scenario("nonresponse")


def test_scenario_trajectory_is_anytime(nonresponse):
    r = nonresponse.result
    assert r.status == "sharp"
    assert r.iterations > 3
    _check_anytime(r)
    assert r.epsilon <= 1e-4


def test_iteration_cap_interrupts_with_valid_bounds(nonresponse):
    final = nonresponse.result.bounds
    r = solve(nonresponse.program, max_iterations=2)
    assert r.status == "interrupted"
    assert r.iterations == 2
    assert r.dual_lo <= final[0] + 1e-9 and final[1] <= r.dual_hi + 1e-9
    _check_anytime(r)


def test_time_limit_interrupts(nonresponse):
    r = solve(nonresponse.program, time_limit=0.0)
    assert r.status == "interrupted"
    final = nonresponse.result.bounds
    assert r.dual_lo <= final[0] + 1e-9 and final[1] <= r.dual_hi + 1e-9


def test_progress_callback_sees_every_record(nonresponse):
    seen = []
    r = solve(nonresponse.program, progress=seen.append)
    assert seen == r.trajectory
    assert len(seen[0].csv().split(",")) == len(PROGRESS_HEADER.split(","))


def test_same_seed_same_result(nonresponse):
    a = solve(nonresponse.program, seed=3)
    b = solve(nonresponse.program, seed=3)
    assert a.to_dict(timing=False) == b.to_dict(timing=False)


def test_threads_give_the_same_bounds(nonresponse):
    r = solve(nonresponse.program, SolveOptions(threads=2))
    assert r.status == "sharp"
    assert r.bounds == pytest.approx(nonresponse.result.bounds, abs=1e-4)


def test_point_identified_status():
    # x fixed by the constraint x = 0.3
    con = Constraint(V(0), "=", F(3, 10))
    p = PolynomialProgram(V(0) * V(0), (con,), ((F(0), F(1)),), (), ("x",))
    r = solve(p)
    assert r.status == "point-identified"
    assert r.bounds == pytest.approx((0.09, 0.09), abs=1e-8)
