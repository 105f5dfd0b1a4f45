import numpy as np
import pytest

from dcflow.conesolver import solve
from dcflow.formulations import build_rls1
from dcflow.netmodel import Bus, Line, Network
from dcflow.oracle import (
    NoFeasiblePoint,
    TooManyBuses,
    brute_force_opf1,
    check_feasible,
    lipschitz_bound,
)

from helpers import two_bus


def test_two_bus_optimum_converges_with_grid():
    # bus1 dispatchable in [0, 1], bus2 a fixed 0.196 load
    net = two_bus(p1=(0.0, 1.0), p2=(-0.196, -0.196))
    coarse = brute_force_opf1(net, grid_step=1e-3)
    fine = brute_force_opf1(net, grid_step=2.5e-4)
    assert np.isclose(coarse.best_V[0], 1.05, atol=5e-3)
    # refining the grid does not move the objective much
    assert abs(coarse.best_objective - fine.best_objective) <= 3 * coarse.kappa * 1e-3
    assert fine.best_objective <= coarse.best_objective + fine.tolerance
    # sanity: true loss of serving 0.196 over y=10 near V=1.05 is about 0.0036
    assert 0.002 <= fine.best_objective <= 0.006


def test_zero_load_network_has_zero_loss():
    net = two_bus(p1=(0.0, 0.0), p2=(0.0, 0.0))
    res = brute_force_opf1(net, grid_step=1e-2)
    assert res.best_objective <= res.tolerance
    assert res.feasible_count > 0


def test_no_feasible_point():
    net = two_bus(y=0.1, p1=(-20.0, 20.0), p2=(-10.0, -10.0))
    with pytest.raises(NoFeasiblePoint):
        brute_force_opf1(net, grid_step=1e-2)


def test_too_many_buses():
    buses = tuple(Bus(i, -1, 1, 0.95, 1.05) for i in range(1, 6))
    lines = tuple(Line(i, i + 1, 10.0) for i in range(1, 5))
    with pytest.raises(TooManyBuses):
        brute_force_opf1(Network(buses=buses, lines=lines))


def test_check_feasible_flags_voltage():
    net = two_bus()
    rep = check_feasible(np.array([1.06, 1.0]), net)
    assert not rep.feasible
    assert np.isclose(rep.voltage_violation[0], 0.01)


def test_check_feasible_accepts_box(net2):
    rep = check_feasible(np.array([1.02, 1.0]), net2)
    assert rep.voltage_violation.max() == 0.0


def test_oracle_agrees_with_solver():
    net = two_bus(p1=(0.0, 1.0), p2=(-0.196, -0.196))
    res = brute_force_opf1(net, grid_step=1e-3)
    build = build_rls1(net)
    x, y, s, report = solve(build.program)
    assert report.status == "optimal"
    assert abs(report.primal_objective - res.best_objective) <= max(
        1e-4, 3 * res.kappa * res.grid_step
    )


def test_lipschitz_bound_positive(net2):
    assert lipschitz_bound(net2) > 0
