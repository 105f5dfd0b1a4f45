import numpy as np
import pytest
import scipy.sparse as sp

from dcflow.conesolver import (
    Cone,
    ConeProgram,
    ProgramBuilder,
    SolverSettings,
    dump_program,
    parse_dump,
    solve,
)


def lp_min_x_geq_2():
    return ConeProgram(
        n_vars=1,
        objective=np.array([1.0]),
        a_eq=sp.csr_matrix((0, 1)),
        b_eq=np.zeros(0),
        lower=np.array([2.0]),
    )


def test_lp_corner():
    x, y, s, report = solve(lp_min_x_geq_2())
    assert report.status == "optimal"
    assert abs(x[0] - 2.0) <= 1e-9
    assert abs(report.primal_objective - 2.0) <= 1e-8


def test_soc_norm():
    # min t s.t. (t, 3, 4) in soc -> t = 5
    b = ProgramBuilder()
    b.add_var("t", cost=1.0)
    b.add_var("w1")
    b.add_var("w2")
    b.add_eq({"w1": 1.0}, 3.0)
    b.add_eq({"w2": 1.0}, 4.0)
    b.add_cone("soc", ["t", "w1", "w2"])
    x, _, _, report = solve(b.build())
    assert report.status == "optimal"
    assert abs(x[0] - 5.0) <= 1e-8


def test_rsoc_square():
    # min u s.t. (u, 1, 2) in rsoc -> u*1 >= 4
    b = ProgramBuilder()
    b.add_var("u", cost=1.0)
    b.add_var("v")
    b.add_var("w")
    b.add_eq({"v": 1.0}, 1.0)
    b.add_eq({"w": 1.0}, 2.0)
    b.add_cone("rsoc", ["u", "v", "w"])
    x, _, _, report = solve(b.build())
    assert report.status == "optimal"
    assert abs(x[0] - 4.0) <= 1e-8


def test_box_lp_with_equalities():
    # min x1 + 2 x2 s.t. x1 + x2 = 1, 0 <= xi <= 1 -> x = (1, 0)
    b = ProgramBuilder()
    b.add_var("x1", cost=1.0, lower=0.0, upper=1.0)
    b.add_var("x2", cost=2.0, lower=0.0, upper=1.0)
    b.add_eq({"x1": 1.0, "x2": 1.0}, 1.0)
    x, y, s, report = solve(b.build())
    assert report.status == "optimal"
    assert np.allclose(x, [1.0, 0.0], atol=1e-8)
    # the optimal dual set is the interval [-2, -1] (both bounds can price
    # the degenerate corner); interior-point lands inside it
    assert -2.0 - 1e-7 <= y[0] <= -1.0 + 1e-7


def test_determinism_bitwise():
    b = ProgramBuilder()
    b.add_var("t", cost=1.0)
    for i in range(4):
        b.add_var(f"w{i}")
        b.add_eq({f"w{i}": 1.0}, float(i + 1))
    b.add_cone("soc", ["t", "w0", "w1", "w2", "w3"])
    prog = b.build()
    x1, y1, s1, r1 = solve(prog)
    x2, y2, s2, r2 = solve(prog)
    assert r1.iterations == r2.iterations
    assert np.array_equal(x1, x2)
    assert np.array_equal(y1, y2)
    assert np.array_equal(s1, s2)


def test_scaling_invariance_of_argmin():
    b = ProgramBuilder()
    b.add_var("t", cost=1.0)
    b.add_var("w1")
    b.add_var("w2")
    b.add_eq({"w1": 1.0}, 3.0)
    b.add_eq({"w2": 1.0}, 4.0)
    b.add_cone("soc", ["t", "w1", "w2"])
    prog = b.build()
    x1, *_ = solve(prog)
    scaled = ConeProgram(
        prog.n_vars, 7.3 * prog.objective, prog.a_eq, prog.b_eq,
        prog.cones, prog.lower, prog.upper,
    )
    x2, *_ = solve(scaled)
    assert np.allclose(x1, x2, atol=1e-8)


def test_primal_infeasible_certificate():
    # x >= 2 together with x + y = 1, y >= 0 and x <= ... make it clean:
    # x >= 2, y >= 0, x + y = 1 is infeasible
    b = ProgramBuilder()
    b.add_var("x", cost=1.0, lower=2.0)
    b.add_var("y", lower=0.0)
    b.add_eq({"x": 1.0, "y": 1.0}, 1.0)
    x, y, s, report = solve(b.build())
    assert report.status == "primal_infeasible"


def test_dual_infeasible_unbounded():
    # min x with x <= 1 only: unbounded below
    b = ProgramBuilder()
    b.add_var("x", cost=1.0, upper=1.0)
    x, y, s, report = solve(b.build())
    assert report.status == "dual_infeasible"
    assert x[0] < 0  # certifying ray points down


def test_seeded_solves_agree():
    b = ProgramBuilder()
    b.add_var("u", cost=1.0)
    b.add_var("v")
    b.add_var("w")
    b.add_eq({"v": 1.0}, 1.5)
    b.add_eq({"w": 1.0}, 3.0)
    b.add_cone("rsoc", ["u", "v", "w"])
    prog = b.build()
    sols = []
    for seed in range(5):
        x, *_rest = solve(prog, SolverSettings(seed=seed))
        sols.append(x)
    for xs in sols[1:]:
        assert np.allclose(xs, sols[0], atol=1e-7)


def test_self_duality_gap_closes():
    b = ProgramBuilder()
    b.add_var("t", cost=1.0)
    b.add_var("w1")
    b.add_var("w2", lower=-3.0, upper=-1.0)
    b.add_eq({"w1": 1.0}, 2.0)
    b.add_cone("soc", ["t", "w1", "w2"])
    _, _, _, report = solve(b.build())
    assert report.status == "optimal"
    assert abs(report.primal_objective - report.dual_objective) <= 1e-7


def test_dump_roundtrip():
    b = ProgramBuilder()
    b.add_var("u", cost=1.0, lower=0.5)
    b.add_var("v", upper=4.0)
    b.add_var("w")
    b.add_eq({"v": 1.0, "w": -0.25}, 1.0)
    b.add_cone("rsoc", ["u", "v", "w"])
    b.constant = 1.25
    prog = b.build()
    text = dump_program(prog)
    back = parse_dump(text)
    assert back.n_vars == prog.n_vars
    assert np.array_equal(back.objective, prog.objective)
    assert np.array_equal(back.lower, prog.lower)
    assert np.array_equal(back.upper, prog.upper)
    assert (back.a_eq != prog.a_eq).nnz == 0
    assert back.cones == prog.cones
    assert back.objective_constant == prog.objective_constant
    x1, *_ = solve(prog)
    x2, *_ = solve(back)
    assert np.array_equal(x1, x2)
