"""Seeded random network generation for experiments and property suites.

Every generated case satisfies the exactness prerequisites by
construction: uniform voltage caps, nonpositive injection lower bounds,
and a feasible interior point (bounds are carved around the injections
of a sampled interior voltage profile, and at least one bus keeps a
fixed negative injection so any feasible point carries flow and
therefore positive loss).
"""

from __future__ import annotations

import numpy as np

from .formulations import injections_from_voltages
from .netmodel import Bus, Line, Network

V_MIN = 0.95
V_MAX = 1.05


def random_network(seed: int, n_buses: int, topology: str = "tree",
                   with_limits: bool = False) -> Network:
    """Deterministic connected network with conductances in [1, 100].

    ``topology`` is "tree" or "mesh" (a tree plus extra chords, at least
    one cycle). ``with_limits`` adds a current limit on every line with
    comfortable slack relative to the construction profile.
    """
    if n_buses < 2:
        raise ValueError("need at least 2 buses")
    if topology not in ("tree", "mesh"):
        raise ValueError(f"unknown topology {topology!r}")
    rng = np.random.default_rng(seed)

    edges: set[tuple[int, int]] = set()
    for j in range(2, n_buses + 1):
        i = int(rng.integers(1, j))
        edges.add((i, j))
    if topology == "mesh":
        n_extra = max(1, n_buses // 3)
        tries = 0
        while n_extra > 0 and tries < 50 * n_buses:
            tries += 1
            a = int(rng.integers(1, n_buses + 1))
            b = int(rng.integers(1, n_buses + 1))
            key = (min(a, b), max(a, b))
            if a != b and key not in edges:
                edges.add(key)
                n_extra -= 1

    lines = []
    for i, j in sorted(edges):
        y = float(1.0 + 99.0 * rng.random())
        lines.append(Line(i, j, y))

    # carve feasible bounds around a sampled interior profile
    net0 = Network(
        buses=tuple(Bus(i, -1e6, 1e6, V_MIN, V_MAX) for i in range(1, n_buses + 1)),
        lines=tuple(lines),
    )
    V = 0.98 + 0.04 * rng.random(n_buses)
    p = injections_from_voltages(V, net0)

    roles = rng.random(n_buses)
    buses = []
    fixed_load_present = False
    for pos in range(n_buses):
        bid = pos + 1
        pi = float(p[pos])
        if roles[pos] < 0.35 and pi <= 0.0:
            buses.append(Bus(bid, pi, pi, V_MIN, V_MAX))  # fixed load
            fixed_load_present = True
        elif pi > 0.0:
            head = 0.5 + rng.random()
            buses.append(Bus(bid, min(0.0, -0.1 * pi), pi * (1.0 + head), V_MIN, V_MAX))
        else:
            slack = 0.2 + rng.random()
            buses.append(Bus(bid, pi * (1.0 + slack), 0.0, V_MIN, V_MAX))
    if not fixed_load_present:
        # force flow: the most negative injection becomes a fixed load
        pos = int(np.argmin(p))
        pi = float(min(p[pos], -1e-3))
        buses[pos] = Bus(pos + 1, pi, pi, V_MIN, V_MAX)

    if with_limits:
        limited = []
        for e, line in enumerate(lines):
            a = net0.bus_index[line.i]
            b = net0.bus_index[line.j]
            flow2 = (line.y * (V[a] - V[b])) ** 2
            limited.append(Line(line.i, line.j, line.y,
                                i_max=float(np.sqrt(4.0 * flow2 + 1.0))))
        lines = limited

    return Network(
        buses=tuple(buses),
        lines=tuple(lines),
        name=f"random_{topology}_{n_buses}_{seed}",
        provenance=f"seeded generator (seed={seed}, topology={topology})",
    )
