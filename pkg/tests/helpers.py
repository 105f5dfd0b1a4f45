"""Shared construction helpers for the test suite."""

import numpy as np

from dcflow.netmodel import Bus, CostFunction, Line, Network


def two_bus(y=10.0, p1=(-1.0, 1.0), p2=(-1.0, 1.0), vmin=0.95, vmax=1.05, i_max=None):
    return Network(
        buses=(
            Bus(1, p1[0], p1[1], vmin, vmax),
            Bus(2, p2[0], p2[1], vmin, vmax),
        ),
        lines=(Line(1, 2, y, i_max=i_max),),
        name="two_bus",
    )


def random_voltages(net, rng, lo=0.96, hi=1.04):
    return lo + (hi - lo) * rng.random(net.n)
