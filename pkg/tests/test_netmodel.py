import math

import numpy as np
import pytest

from dcflow.formulations import injections_from_voltages
from dcflow.netmodel import (
    BadBounds,
    Bus,
    CostFunction,
    Disconnected,
    InvalidLine,
    Line,
    Network,
    NonIncreasingCost,
    NonpositiveConductance,
    PositiveLowerInjection,
    check_assumptions,
    objective_value,
    validate_network,
)

from helpers import two_bus


def test_valid_two_bus(net2):
    validate_network(net2)


def test_disconnected_bus():
    net = Network(
        buses=(Bus(1, -1, 1, 0.95, 1.05), Bus(2, -1, 1, 0.95, 1.05),
               Bus(3, -1, 1, 0.95, 1.05)),
        lines=(Line(1, 2, 10.0),),
    )
    with pytest.raises(Disconnected):
        validate_network(net)


def test_nonpositive_conductance():
    net = Network(
        buses=(Bus(1, -1, 1, 0.95, 1.05), Bus(2, -1, 1, 0.95, 1.05)),
        lines=(Line(1, 2, -1.0),),
    )
    with pytest.raises(NonpositiveConductance):
        validate_network(net)


def test_bad_bounds():
    with pytest.raises(BadBounds):
        Bus(1, 1.0, -1.0, 0.95, 1.05).validate()
    with pytest.raises(BadBounds):
        Bus(1, -1.0, 1.0, -0.1, 1.05).validate()
    with pytest.raises(BadBounds):
        # slack must have unbounded injection
        Bus(1, -1.0, 1.0, 1.0, 1.0, kind="slack").validate()


def test_nonincreasing_cost():
    with pytest.raises(NonIncreasingCost):
        Bus(1, -1, 1, 0.95, 1.05, cost=CostFunction("linear", (0.0, 0.0))).validate()
    with pytest.raises(NonIncreasingCost):
        # derivative negative at p_min
        Bus(1, -1, 1, 0.95, 1.05, cost=CostFunction("quadratic", (1.0, 0.5, 0.0))).validate()
    # fine when derivative positive over the whole interval
    Bus(1, -1, 1, 0.95, 1.05, cost=CostFunction("quadratic", (1.0, 2.5, 0.0))).validate()


def test_positive_lower_injection_warns():
    net = Network(
        buses=(Bus(1, 0.2, 1.0, 0.95, 1.05), Bus(2, -1, 1, 0.95, 1.05)),
        lines=(Line(1, 2, 10.0),),
    )
    with pytest.warns(PositiveLowerInjection):
        validate_network(net)
    assert net.any_positive_p_min


def test_self_loop_and_duplicate_lines():
    with pytest.raises(InvalidLine):
        Line(1, 1, 10.0)
    net = Network(
        buses=(Bus(1, -1, 1, 0.95, 1.05), Bus(2, -1, 1, 0.95, 1.05)),
        lines=(Line(1, 2, 10.0), Line(2, 1, 5.0)),
    )
    with pytest.raises(InvalidLine):
        validate_network(net)


def test_assumption_flags(net2):
    rep = check_assumptions(net2)
    assert rep.a1_uniform_vmax
    assert rep.a2_positive_loss is None

    uneven = Network(
        buses=(Bus(1, -1, 1, 0.95, 1.05), Bus(2, -1, 1, 0.95, 1.04)),
        lines=(Line(1, 2, 10.0),),
    )
    assert not check_assumptions(uneven).a1_uniform_vmax

    class Sol:
        p = np.array([0.2, -0.196])

    rep = check_assumptions(net2, Sol())
    assert rep.a2_positive_loss is True


def test_check_assumptions_pure(net2):
    r1 = check_assumptions(net2)
    r2 = check_assumptions(net2)
    assert r1 == r2


@pytest.mark.parametrize("seed", range(5))
def test_loss_identity(seed):
    # sum of injections equals sum of line losses for any voltage profile
    rng = np.random.default_rng(seed)
    buses = tuple(Bus(i, -10, 10, 0.5, 1.5) for i in range(1, 7))
    lines = [Line(i, i + 1, float(1.0 + 10 * rng.random())) for i in range(1, 6)]
    lines.append(Line(1, 4, 3.0))
    net = Network(buses=buses, lines=tuple(lines))
    V = 0.6 + 0.8 * rng.random(6)
    p = injections_from_voltages(V, net)
    loss = sum(
        l.y * (V[net.bus_index[l.i]] - V[net.bus_index[l.j]]) ** 2 for l in net.lines
    )
    assert np.isclose(p.sum(), loss, rtol=1e-12, atol=1e-14)


def test_objective_value_default_is_loss(net2):
    p = np.array([0.2, -0.196])
    assert np.isclose(objective_value(net2, p), p.sum())


def test_injection_example(net2):
    p = injections_from_voltages(np.array([1.0, 0.98]), net2)
    assert np.allclose(p, [0.2, -0.196])
