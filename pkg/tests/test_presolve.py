import numpy as np
import pytest
import scipy.sparse as sp

from dcflow.conesolver import ProgramBuilder, ProvenInfeasible, presolve, solve


def test_fixed_variable_eliminated_and_restored():
    # v0 pinned by a singleton equality row is substituted out
    b = ProgramBuilder()
    b.add_var("v0", cost=3.0)
    b.add_var("x", cost=1.0, lower=0.0)
    b.add_eq({"v0": 2.0}, 2.205)
    b.add_eq({"v0": 1.0, "x": -1.0}, 0.0)
    prog = b.build()
    reduced, presol = presolve(prog)
    assert reduced.n_vars == 0  # x got fixed through the second row too
    x, y, s, report = solve(prog)
    assert report.status == "optimal"
    assert np.isclose(x[0], 1.1025)
    assert np.isclose(x[1], 1.1025)
    # duals of the folded rows satisfy stationarity
    resid = prog.objective + np.asarray(prog.a_eq.T @ y).ravel()
    assert abs(resid[0]) <= 1e-9


def test_duplicate_row_dropped():
    b = ProgramBuilder()
    b.add_var("x", cost=1.0, lower=0.0)
    b.add_var("y", cost=1.0, lower=0.0)
    b.add_eq({"x": 1.0, "y": 1.0}, 1.0)
    b.add_eq({"x": 1.0, "y": 1.0}, 1.0)  # duplicate
    prog = b.build()
    reduced, presol = presolve(prog)
    assert reduced.n_eq == 1
    assert len(presol.dropped_rows) == 1
    x, y, s, report = solve(prog)
    assert report.status == "optimal"
    assert np.isclose(x.sum(), 1.0, atol=1e-8)


def test_inconsistent_dependent_rows():
    b = ProgramBuilder()
    b.add_var("x", cost=1.0)
    b.add_var("y", cost=1.0)
    b.add_eq({"x": 1.0, "y": 1.0}, 1.0)
    b.add_eq({"x": 2.0, "y": 2.0}, 3.0)  # parallel, inconsistent
    with pytest.raises(ProvenInfeasible):
        presolve(b.build())


def test_empty_bound_interval():
    b = ProgramBuilder()
    b.add_var("x", cost=1.0, lower=2.0, upper=1.0)
    with pytest.raises(ProvenInfeasible):
        presolve(b.build())
    # solve() maps it to a primal_infeasible report
    _, _, _, report = solve(b.build())
    assert report.status == "primal_infeasible"


def test_cone_variables_are_kept():
    b = ProgramBuilder()
    b.add_var("u", cost=1.0)
    b.add_var("v", lower=1.0, upper=1.0)  # pinned but in a cone: kept
    b.add_var("w")
    b.add_eq({"w": 1.0}, 2.0)
    b.add_cone("rsoc", ["u", "v", "w"])
    prog = b.build()
    reduced, _ = presolve(prog)
    assert reduced.n_vars == 3
    x, *_ , report = solve(prog)
    assert report.status == "optimal"
    assert abs(x[0] - 4.0) <= 1e-8


def test_conflicting_fixes():
    b = ProgramBuilder()
    b.add_var("x")
    b.add_eq({"x": 1.0}, 1.0)
    b.add_eq({"x": 2.0}, 4.0)
    with pytest.raises(ProvenInfeasible):
        presolve(b.build())
