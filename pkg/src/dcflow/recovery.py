"""Approximate-solution recovery when line limits break exactness.

Two heuristics produce voltage-space solutions from rank-violating
limit-constrained optima:

* the direct construction takes V = sqrt(v*) and recomputes injections,
  which preserves the power-balance law, voltage boxes and line limits
  exactly, and can violate only injection lower bounds, each by no more
  than the analytic per-bus bound sum_{j in B_i} (sqrt(v_i v_j) - W) y;
* the slack-variable iteration re-solves the limit-constrained
  branch-flow model while granting a penalized absorption slack
  eps_i >= 0 to every bus where a rank violation coincides with a
  binding lower bound, so the effective bound becomes p_min - eps_i.
  The slack set only grows between iterations, which avoids cycling.

The constraint on a slack bus is relaxed downward (the bus may absorb
more), matching the direction of the constructive repair the theory
uses: closing a rank gap pushes both endpoint injections down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import conesolver
from .conesolver import ConeProgram, SolverSettings
from .exactness import ExactnessReport, Tolerances, diagnose, rank_gaps
from .formulations import (
    LiftedSolution,
    ModelBuild,
    VoltageSolution,
    _build,
    branchflow_from_x,
    injections_from_voltages,
    lifted_from_x,
)
from .netmodel import Bus, Network
from .oracle import FeasibilityReport, check_feasible

DIRECT = "direct"
SLACK_ITERATION = "slack_iteration"


class SolverFailure(RuntimeError):
    """The underlying conic solve did not reach an optimum."""

    def __init__(self, status: str, report):
        self.status = status
        self.report = report
        super().__init__(f"conic solve ended with status {status!r}")


class MaxIterationsExceeded(RuntimeError):
    """Raised only when configured; carries the last iterate."""

    def __init__(self, result: "RecoveryResult"):
        self.result = result
        super().__init__("slack iteration exhausted its iteration budget")


@dataclass(frozen=True)
class RecoverySettings:
    max_iterations: int = 10
    eps_weight: float = 1.0       # objective weight per unit of slack
    gap_tol: float = 1e-6
    solver: SolverSettings = field(default_factory=SolverSettings)
    raise_on_exhaustion: bool = False


@dataclass(frozen=True)
class RecoveryResult:
    solution: VoltageSolution
    method: str
    bound_violations: np.ndarray     # per-bus injection-bound violation, >= 0
    violation_bound: np.ndarray      # analytic bound (direct) / granted slack (slack)
    iterations: int
    epsilons: np.ndarray             # per-bus slack actually applied
    exact: bool
    feasibility: FeasibilityReport
    diagnosis: ExactnessReport | None = None

    def to_dict(self, lifted: LiftedSolution | None = None) -> dict:
        d = {
            "method": self.method,
            "exact": self.exact,
            "iterations": self.iterations,
            "V": self.solution.V.tolist(),
            "p": self.solution.p.tolist(),
            "bound_violations": self.bound_violations.tolist(),
            "violation_bound": self.violation_bound.tolist(),
            "epsilons": self.epsilons.tolist(),
            "feasibility": self.feasibility.to_dict(),
        }
        if lifted is not None:
            d["relaxation_optimum"] = {
                "p": lifted.p.tolist(),
                "v": lifted.v.tolist(),
                "W": lifted.W.tolist(),
            }
        return d


def _bound_violations(net: Network, p: np.ndarray) -> np.ndarray:
    out = np.zeros(net.n)
    for pos, bus in enumerate(net.buses):
        lo = bus.p_min - p[pos] if np.isfinite(bus.p_min) else -math.inf
        hi = p[pos] - bus.p_max if np.isfinite(bus.p_max) else -math.inf
        out[pos] = max(0.0, lo, hi)
    return out


def direct_construct(sol: LiftedSolution, net: Network,
                     gap_tol: float = 1e-6) -> RecoveryResult:
    """Project a (possibly rank-violating) lifted optimum onto voltages.

    Always constructs; solution quality is reported, never raised. The
    projected injections satisfy p_i <= p*_i, so only lower bounds can be
    violated, within the per-bus analytic bound over the rank-violating
    neighbour set.
    """
    V = np.sqrt(sol.v)
    p = injections_from_voltages(V, net)
    norm_gaps = np.array([
        g / (sol.v[net.bus_index[l.i]] * sol.v[net.bus_index[l.j]])
        for g, l in zip(rank_gaps(sol, net), net.lines)
    ])
    bound = np.zeros(net.n)
    for e, line in enumerate(net.lines):
        if norm_gaps[e] <= gap_tol:
            continue
        a, b = net.bus_index[line.i], net.bus_index[line.j]
        slack = (np.sqrt(sol.v[a] * sol.v[b]) - sol.W[e]) * line.y
        bound[a] += slack
        bound[b] += slack
    feas = check_feasible(V, net)
    return RecoveryResult(
        solution=VoltageSolution(V=V, p=p),
        method=DIRECT,
        bound_violations=_bound_violations(net, p),
        violation_bound=bound,
        iterations=0,
        epsilons=np.zeros(net.n),
        exact=bool(norm_gaps.max(initial=0.0) <= gap_tol),
        feasibility=feas,
    )


def _rls2_with_slacks(net: Network, slack_buses: set[int],
                      eps_weight: float) -> tuple[ModelBuild, dict[int, int]]:
    """Limit-constrained branch-flow build with absorption slacks.

    For each slack bus the injection's own lower bound is dropped and the
    row p_i + eps_i = d_i with d_i >= p_min, eps_i >= 0 takes its place;
    eps_i enters the objective with weight ``eps_weight``.
    """
    if slack_buses:
        buses = tuple(
            replace(b, p_min=-math.inf) if b.id in slack_buses else b
            for b in net.buses
        )
        base_net = Network(buses=buses, lines=net.lines, name=net.name)
    else:
        base_net = net
    build = _build(base_net, "rls1", with_limits=True)
    if not slack_buses:
        return build, {}

    prog = build.program
    vm = build.variable_map
    n = prog.n_vars
    extra = 2 * len(slack_buses)
    eps_index: dict[int, int] = {}
    obj = np.concatenate([prog.objective, np.zeros(extra)])
    lower = np.concatenate([prog.lower, np.zeros(extra)])
    upper = np.concatenate([prog.upper, np.full(extra, math.inf)])
    new_rows = []
    new_rhs = []
    col = n
    for bus_id in sorted(slack_buses):
        eps_col, d_col = col, col + 1
        col += 2
        eps_index[bus_id] = eps_col
        obj[eps_col] = eps_weight
        lower[d_col] = net.bus(bus_id).p_min
        upper[d_col] = math.inf
        row = np.zeros(n + extra)
        row[vm[("p", bus_id)]] = 1.0
        row[eps_col] = 1.0
        row[d_col] = -1.0
        new_rows.append(row)
        new_rhs.append(0.0)
    a = sp.vstack(
        [
            sp.hstack([prog.a_eq, sp.csr_matrix((prog.n_eq, extra))]),
            sp.csr_matrix(np.vstack(new_rows)),
        ]
    ).tocsr()
    extended = ConeProgram(
        n_vars=n + extra,
        objective=obj,
        a_eq=a,
        b_eq=np.concatenate([prog.b_eq, np.asarray(new_rhs)]),
        cones=prog.cones,
        lower=lower,
        upper=upper,
        objective_constant=prog.objective_constant,
    )
    extended.validate()
    return ModelBuild(extended, vm, build.shape, with_limits=True), eps_index


def slack_iterate(net: Network, settings: RecoverySettings | None = None) -> RecoveryResult:
    """Iterate limit-constrained solves, granting absorption slack to the
    buses where rank violations pin the injection lower bound, until the
    solution is rank-exact or the iteration budget runs out.

    Exhaustion returns the last iterate flagged non-exact (or raises when
    ``raise_on_exhaustion`` is set). Solver failures propagate as
    :class:`SolverFailure`.
    """
    settings = settings or RecoverySettings()
    if not net.has_line_limits:
        raise ValueError("slack iteration requires at least one line limit")

    slack_set: set[int] = set()
    tols = Tolerances(gap=settings.gap_tol)
    last: RecoveryResult | None = None

    for iteration in range(1, settings.max_iterations + 1):
        build, eps_index = _rls2_with_slacks(net, slack_set, settings.eps_weight)
        x, y, s, report = conesolver.solve(build.program, settings.solver)
        if report.status != conesolver.OPTIMAL:
            raise SolverFailure(report.status, report)
        lifted = lifted_from_x(x, build, net)
        eps = np.zeros(net.n)
        for bus_id, colidx in eps_index.items():
            eps[net.bus_index[bus_id]] = max(0.0, float(x[colidx]))

        # classify against the effective (relaxed) lower bounds
        eff_net = Network(
            buses=tuple(
                replace(b, p_min=b.p_min - eps[pos]) if eps[pos] > 0 else b
                for pos, b in enumerate(net.buses)
            ),
            lines=net.lines,
            name=net.name,
        )
        rep = diagnose(lifted, eff_net, tols)

        V = np.sqrt(lifted.v)
        p = injections_from_voltages(V, net)
        last = RecoveryResult(
            solution=VoltageSolution(V=V, p=p),
            method=SLACK_ITERATION,
            bound_violations=_bound_violations(net, p),
            violation_bound=eps.copy(),
            iterations=iteration,
            epsilons=eps,
            exact=rep.exact,
            feasibility=check_feasible(V, net),
            diagnosis=rep,
        )
        if rep.exact:
            return last
        grown = set(rep.recovery_buses) - slack_set
        if not grown:
            # identical model next round: no progress possible
            break
        slack_set |= grown

    assert last is not None
    if settings.raise_on_exhaustion:
        raise MaxIterationsExceeded(last)
    return last
