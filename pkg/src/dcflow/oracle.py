"""Independent ground truth for tiny networks.

Brute-force grid enumeration of the original voltage-space problem, plus
a feasibility checker for arbitrary candidate solutions. The oracle never
touches the conic pipeline, so it can certify it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .formulations import injections_from_voltages
from .netmodel import Network, objective_value

MAX_ORACLE_BUSES = 4


class TooManyBuses(ValueError):
    def __init__(self, n: int):
        super().__init__(f"brute-force enumeration limited to {MAX_ORACLE_BUSES} buses, got {n}")


class NoFeasiblePoint(ValueError):
    def __init__(self, tightest: float):
        self.tightest_violation = tightest
        super().__init__(
            f"no grid point satisfies the injection bounds "
            f"(tightest violation {tightest:.3e})"
        )


@dataclass(frozen=True)
class OracleResult:
    best_V: np.ndarray
    best_p: np.ndarray
    best_objective: float
    grid_step: float
    feasible_count: int
    kappa: float

    @property
    def tolerance(self) -> float:
        """Feasibility slack used for the injection bounds."""
        return self.kappa * self.grid_step


def lipschitz_bound(net: Network) -> float:
    """Bound on the infinity-norm gradient of the injection map over the box.

    |dp_i/dV_i| <= sum_j y_ij * max|2V_i - V_j| and |dp_i/dV_j| = y_ij V_i,
    with per-line interval bounds taken from the two endpoint voltage boxes.
    """
    kappa = 0.0
    for pos, bus in enumerate(net.buses):
        own = 0.0
        cross = 0.0
        for nbr, line in net.adjacency[pos]:
            other = net.buses[nbr]
            own += line.y * max(
                abs(2.0 * bus.v_max - other.v_min), abs(2.0 * bus.v_min - other.v_max)
            )
            cross += line.y * bus.v_max
        kappa = max(kappa, own + cross)
    return kappa


def _grids(net: Network, step: float) -> list[np.ndarray]:
    grids = []
    for bus in net.buses:
        lo, hi = bus.v_min, bus.v_max
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        g = lo + step * np.arange(count)
        if g[-1] < hi - 1e-12:
            g = np.append(g, hi)
        grids.append(g)
    return grids


def brute_force_opf1(net: Network, grid_step: float = 1e-3) -> OracleResult:
    """Globally minimize the voltage-space problem on a per-bus grid.

    A grid point is feasible when every injection bound holds within
    kappa*grid_step, kappa being the Lipschitz bound above; that slack
    guarantees the true optimum is never excluded by quantization.
    Enumeration is lexicographic and deterministic; objective ties keep
    the first point found.
    """
    if net.n > MAX_ORACLE_BUSES:
        raise TooManyBuses(net.n)
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    kappa = lipschitz_bound(net)
    tol = kappa * grid_step
    grids = _grids(net, grid_step)
    p_min = np.array([b.p_min for b in net.buses])
    p_max = np.array([b.p_max for b in net.buses])

    # vectorize over the last axis: sweep all values of the final bus at once
    last = grids[-1]
    lead_iter = itertools.product(*grids[:-1]) if net.n > 1 else [()]
    y_ab = [
        (net.bus_index[l.i], net.bus_index[l.j], l.y) for l in net.lines
    ]
    limits = [
        (net.bus_index[l.i], net.bus_index[l.j], l.y, l.i_max)
        for l in net.lines
        if l.i_max is not None
    ]

    best_obj = np.inf
    best_V: np.ndarray | None = None
    feasible = 0
    tightest = np.inf

    n = net.n
    for lead in lead_iter:
        V = np.empty((n, len(last)))
        for k, val in enumerate(lead):
            V[k, :] = val
        V[n - 1, :] = last
        p = np.zeros_like(V)
        for a, b, y in y_ab:
            p[a] += V[a] * (V[a] - V[b]) * y
            p[b] += V[b] * (V[b] - V[a]) * y
        viol = np.maximum(p_min[:, None] - p, p - p_max[:, None])
        worst = viol.max(axis=0)
        for a, b, y, imax in limits:
            cur2 = (y * (V[a] - V[b])) ** 2
            worst = np.maximum(worst, cur2 - imax * imax)
        ok = worst <= tol
        tightest = min(tightest, float(worst.min()))
        if not np.any(ok):
            continue
        feasible += int(ok.sum())
        obj = np.array(
            [objective_value(net, p[:, k]) if ok[k] else np.inf for k in range(len(last))]
        )
        k = int(np.argmin(obj))
        if obj[k] < best_obj:
            best_obj = float(obj[k])
            best_V = V[:, k].copy()

    if best_V is None:
        raise NoFeasiblePoint(tightest)
    return OracleResult(
        best_V=best_V,
        best_p=injections_from_voltages(best_V, net),
        best_objective=best_obj,
        grid_step=grid_step,
        feasible_count=feasible,
        kappa=kappa,
    )


@dataclass(frozen=True)
class FeasibilityReport:
    voltage_violation: np.ndarray
    injection_violation: np.ndarray
    line_violation: np.ndarray
    p: np.ndarray
    feasible: bool
    max_violation: float

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "max_violation": self.max_violation,
            "voltage_violation": self.voltage_violation.tolist(),
            "injection_violation": self.injection_violation.tolist(),
            "line_violation": self.line_violation.tolist(),
        }


def check_feasible(V: np.ndarray, net: Network, tol: float = 1e-8) -> FeasibilityReport:
    """Per-constraint residuals of a voltage profile against the network.

    Violations are clipped at zero; the overall flag requires every
    residual to stay within ``tol``.
    """
    V = np.asarray(V, dtype=float)
    p = injections_from_voltages(V, net)
    v_lo = np.array([b.v_min for b in net.buses])
    v_hi = np.array([b.v_max for b in net.buses])
    p_lo = np.array([b.p_min for b in net.buses])
    p_hi = np.array([b.p_max for b in net.buses])
    vviol = np.maximum(0.0, np.maximum(v_lo - V, V - v_hi))
    pviol = np.maximum(0.0, np.maximum(p_lo - p, p - p_hi))
    lviol = np.zeros(len(net.lines))
    for e, line in enumerate(net.lines):
        if line.i_max is None:
            continue
        a, b = net.bus_index[line.i], net.bus_index[line.j]
        cur2 = (line.y * (V[a] - V[b])) ** 2
        lviol[e] = max(0.0, cur2 - line.i_max ** 2)
    worst = max(
        vviol.max(initial=0.0), pviol.max(initial=0.0), lviol.max(initial=0.0)
    )
    return FeasibilityReport(
        voltage_violation=vviol,
        injection_violation=pviol,
        line_violation=lviol,
        p=p,
        feasible=bool(worst <= tol),
        max_violation=float(worst),
    )
