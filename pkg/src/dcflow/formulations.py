"""Model builders and coordinate maps for the OPF relaxations.

Three coordinate systems describe the same physics:

* V-space: nodal voltages V with injections p_i = sum_j V_i(V_i - V_j) y_ij.
* Lifted space: (p, v, W) with v_i = V_i^2 and one W per line standing in
  for V_i V_j, linearizing the injection equation; physical points satisfy
  the rank equality v_i v_j = W_ij^2.
* Branch-flow space: (p, P, v, l) over directed line flows P and squared
  currents l, numerically better conditioned because no near-equal
  quantities are subtracted.

``build_rl1`` / ``build_rls1`` compile the convex relaxations over the
last two spaces into :class:`ConeProgram` form. W is stored once per
unordered line pair; its symmetry is structural, not a constraint row.
The 2x2 PSD condition on each line is encoded as the rotated-cone row
W^2 <= v_i v_j. Since a program variable may join at most one cone
block, shared endpoint variables get linking copies on demand.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .conesolver import ConeProgram, ProgramBuilder
from .netmodel import Network, validate_network

CONSISTENCY_TOL = 1e-8  # absolute tolerance on each injection residual
ROUNDTRIP_TOL = 1e-12


class NonpositiveVoltage(ValueError):
    def __init__(self, bus_id: int, value: float):
        self.bus_id = bus_id
        super().__init__(f"bus {bus_id} has nonpositive voltage {value}")


class RankGapExceeded(ValueError):
    """The lifted point is not rank-one on some line; recovery is needed."""

    def __init__(self, line_key: tuple[int, int], gap: float, normalized: float):
        self.line_key = line_key
        self.gap = gap
        self.normalized = normalized
        super().__init__(
            f"rank gap {gap:.3e} (normalized {normalized:.3e}) on line {line_key}"
        )


class InconsistentBranchPoint(ValueError):
    def __init__(self, line_key: tuple[int, int], mismatch: float):
        self.line_key = line_key
        super().__init__(
            f"branch-flow point reconstructs conflicting W on line {line_key} "
            f"(mismatch {mismatch:.3e})"
        )


class InconsistentInjections(ValueError):
    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"injections disagree with voltages (residual {residual:.3e})")


class NoLimitsPresent(UserWarning):
    """add_line_limits called on a network without any current limit."""


@dataclass(frozen=True)
class VoltageSolution:
    """Voltages and consistent injections, ordered like ``net.buses``."""

    V: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "V", np.asarray(self.V, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))


@dataclass(frozen=True)
class LiftedSolution:
    """Point of the lifted space: injections, squared voltages, one W per line."""

    p: np.ndarray
    v: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        object.__setattr__(self, "W", np.asarray(self.W, dtype=float))


@dataclass(frozen=True)
class BranchFlowSolution:
    """Branch-flow point: P_fwd flows i->j, P_rev flows j->i, l squared current."""

    p: np.ndarray
    v: np.ndarray
    P_fwd: np.ndarray
    P_rev: np.ndarray
    l: np.ndarray

    def __post_init__(self):
        for name in ("p", "v", "P_fwd", "P_rev", "l"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


class VariableMap:
    """Bidirectional map between semantic keys and program variable indices.

    Keys are tuples such as ("p", bus_id), ("v", bus_id), ("w", (i, j)),
    ("flow", (i, j)) for the directed flow i->j, ("cur", (i, j)) for the
    squared current, plus builder-internal copies and epigraph variables.
    """

    def __init__(self, keys: list):
        self.keys = tuple(keys)
        self.index = {k: i for i, k in enumerate(self.keys)}

    def __getitem__(self, key) -> int:
        return self.index[key]

    def __contains__(self, key) -> bool:
        return key in self.index

    def key_of(self, idx: int):
        return self.keys[idx]

    def __len__(self) -> int:
        return len(self.keys)


@dataclass(frozen=True)
class ModelBuild:
    program: ConeProgram
    variable_map: VariableMap
    shape: str  # "rl1" | "rls1"
    with_limits: bool = False


def injections_from_voltages(V: np.ndarray, net: Network) -> np.ndarray:
    """Exact nodal injections implied by a voltage profile."""
    V = np.asarray(V, dtype=float)
    p = np.zeros(net.n)
    for line in net.lines:
        a, b = net.bus_index[line.i], net.bus_index[line.j]
        p[a] += V[a] * (V[a] - V[b]) * line.y
        p[b] += V[b] * (V[b] - V[a]) * line.y
    return p


def lift_f(V: np.ndarray, net: Network) -> LiftedSolution:
    """Lift a voltage profile: v = V^2, W = V_i V_j, p from the injection law."""
    V = np.asarray(V, dtype=float)
    for pos, val in enumerate(V):
        if not val > 0:
            raise NonpositiveVoltage(net.buses[pos].id, float(val))
    v = V * V
    W = np.array(
        [V[net.bus_index[l.i]] * V[net.bus_index[l.j]] for l in net.lines]
    )
    return LiftedSolution(p=injections_from_voltages(V, net), v=v, W=W)


def _injection_scale(net: Network) -> float:
    degree_y = [sum(l.y for _, l in net.adjacency[pos]) for pos in range(net.n)]
    return max(degree_y) if degree_y else 1.0


def unlift_f_inv(sol: LiftedSolution, net: Network, tol: float = 1e-6) -> VoltageSolution:
    """Invert the lifting on a rank-one point: V = sqrt(v).

    Raises :class:`RankGapExceeded` when some line's normalized rank gap
    D/(v_i v_j) exceeds ``tol``; callers should go to recovery then.
    """
    v = np.asarray(sol.v, dtype=float)
    for pos, val in enumerate(v):
        if not val > 0:
            raise NonpositiveVoltage(net.buses[pos].id, float(val))
    for e, line in enumerate(net.lines):
        a, b = net.bus_index[line.i], net.bus_index[line.j]
        gap = v[a] * v[b] - sol.W[e] ** 2
        norm = gap / (v[a] * v[b])
        if norm > tol:
            raise RankGapExceeded(line.key, float(gap), float(norm))
    V = np.sqrt(v)
    resid = float(np.max(np.abs(injections_from_voltages(V, net) - sol.p)))
    atol = max(CONSISTENCY_TOL, tol * _injection_scale(net))
    if resid > atol:
        raise InconsistentInjections(resid)
    return VoltageSolution(V=V, p=sol.p.copy())


def map_g(sol: LiftedSolution, net: Network) -> BranchFlowSolution:
    """Convert a lifted point to branch-flow coordinates."""
    n_lines = len(net.lines)
    P_fwd = np.zeros(n_lines)
    P_rev = np.zeros(n_lines)
    l = np.zeros(n_lines)
    for e, line in enumerate(net.lines):
        a, b = net.bus_index[line.i], net.bus_index[line.j]
        P_fwd[e] = (sol.v[a] - sol.W[e]) * line.y
        P_rev[e] = (sol.v[b] - sol.W[e]) * line.y
        l[e] = line.y ** 2 * (sol.v[a] - 2.0 * sol.W[e] + sol.v[b])
    return BranchFlowSolution(p=sol.p.copy(), v=sol.v.copy(), P_fwd=P_fwd, P_rev=P_rev, l=l)


def map_g_inv(sol: BranchFlowSolution, net: Network, tol: float = CONSISTENCY_TOL) -> LiftedSolution:
    """Convert a branch-flow point back to lifted coordinates.

    W is reconstructed from both line ends; the voltage-drop equation
    forces them to agree, so disagreement beyond ``tol`` (scaled by the
    squared-voltage magnitude) reports an inconsistent point.
    """
    W = np.zeros(len(net.lines))
    for e, line in enumerate(net.lines):
        a, b = net.bus_index[line.i], net.bus_index[line.j]
        w_i = sol.v[a] - line.z * sol.P_fwd[e]
        w_j = sol.v[b] - line.z * sol.P_rev[e]
        scale = 1.0 + abs(sol.v[a]) + abs(sol.v[b])
        if abs(w_i - w_j) > tol * scale:
            raise InconsistentBranchPoint(line.key, float(abs(w_i - w_j)))
        W[e] = 0.5 * (w_i + w_j)
    return LiftedSolution(p=sol.p.copy(), v=sol.v.copy(), W=W)


def _add_bus_variables(pb: ProgramBuilder, net: Network) -> None:
    for bus in net.buses:
        if bus.cost.kind == "linear":
            slope, intercept = bus.cost.coefficients
            pb.add_var(("p", bus.id), cost=slope, lower=bus.p_min, upper=bus.p_max)
            pb.constant += intercept
        else:
            a, bcoef, c0 = bus.cost.coefficients
            pb.add_var(("p", bus.id), cost=bcoef, lower=bus.p_min, upper=bus.p_max)
            pb.constant += c0
    for bus in net.buses:
        if bus.kind == "slack":
            ref = bus.v_ref ** 2
            pb.add_var(("v", bus.id), lower=ref, upper=ref)
        else:
            pb.add_var(("v", bus.id), lower=bus.v_min ** 2, upper=bus.v_max ** 2)


def _add_cost_epigraphs(pb: ProgramBuilder, net: Network) -> None:
    # quadratic costs: a*p^2 + b*p + c <= a*t + b*p + c with t >= p^2
    # realized as the rotated cone t * 1 >= p^2
    for bus in net.buses:
        if bus.cost.kind != "quadratic":
            continue
        a = bus.cost.coefficients[0]
        pb.add_var(("epi", bus.id), cost=a)
        pb.add_var(("one", bus.id))
        pb.add_eq({("one", bus.id): 1.0}, 1.0)
        pb.add_cone("rsoc", [("epi", bus.id), ("one", bus.id), ("p", bus.id)])


class _ConeEndpoint:
    """Hands out a cone-usable key for a shared variable, copying on reuse."""

    def __init__(self, pb: ProgramBuilder):
        self.pb = pb
        self.used: set = set()

    def key_for(self, base_key, copy_tag) -> tuple:
        if base_key not in self.used:
            self.used.add(base_key)
            return base_key
        copy_key = ("copy",) + copy_tag
        self.pb.add_var(copy_key)
        self.pb.add_eq({copy_key: 1.0, base_key: -1.0}, 0.0)
        return copy_key


def _build(net: Network, shape: str, with_limits: bool) -> ModelBuild:
    validate_network(net, allow_disconnected=True)
    pb = ProgramBuilder()
    _add_bus_variables(pb, net)

    if shape == "rl1":
        for line in net.lines:
            pb.add_var(("w", line.key), lower=0.0)
        for bus in net.buses:
            pos = net.bus_index[bus.id]
            coeffs = {("p", bus.id): 1.0}
            ydeg = 0.0
            for nbr, line in net.adjacency[pos]:
                ydeg += line.y
                coeffs[("w", line.key)] = coeffs.get(("w", line.key), 0.0) + line.y
            coeffs[("v", bus.id)] = -ydeg
            pb.add_eq(coeffs, 0.0)
        ends = _ConeEndpoint(pb)
        for line in net.lines:
            u = ends.key_for(("v", line.i), ("v", line.i, line.key))
            v = ends.key_for(("v", line.j), ("v", line.j, line.key))
            pb.add_cone("rsoc", [u, v, ("w", line.key)])
        if with_limits:
            for line in net.lines:
                if line.i_max is None:
                    continue
                slack = ("limslack", line.key)
                pb.add_var(slack, lower=0.0)
                y2 = line.y ** 2
                pb.add_eq(
                    {
                        ("v", line.i): y2,
                        ("v", line.j): y2,
                        ("w", line.key): -2.0 * y2,
                        slack: 1.0,
                    },
                    line.i_max ** 2,
                )
    elif shape == "rls1":
        for line in net.lines:
            pb.add_var(("flow", (line.i, line.j)))
            pb.add_var(("flow", (line.j, line.i)))
            upper = line.i_max ** 2 if (with_limits and line.i_max is not None) else math.inf
            pb.add_var(("cur", line.key), upper=upper)
        for bus in net.buses:
            pos = net.bus_index[bus.id]
            coeffs = {("p", bus.id): 1.0}
            for nbr, line in net.adjacency[pos]:
                other = net.buses[nbr].id
                coeffs[("flow", (bus.id, other))] = -1.0
            pb.add_eq(coeffs, 0.0)
        for line in net.lines:
            fwd, rev = ("flow", (line.i, line.j)), ("flow", (line.j, line.i))
            pb.add_eq({fwd: 1.0, rev: 1.0, ("cur", line.key): -line.z}, 0.0)
            pb.add_eq(
                {("v", line.i): 1.0, ("v", line.j): -1.0, fwd: -line.z, rev: line.z},
                0.0,
            )
        # one current cone per line: given the line-loss and voltage-drop
        # rows, l*v_i - P_ij^2 and l*v_j - P_ji^2 are identically equal, so
        # the reverse-orientation inequality holds automatically and adding
        # it would only create a degenerate twin cone
        ends = _ConeEndpoint(pb)
        for line in net.lines:
            lu = ends.key_for(("cur", line.key), ("cur", line.key, "f"))
            vu = ends.key_for(("v", line.i), ("v", line.i, line.key))
            pb.add_cone("rsoc", [lu, vu, ("flow", (line.i, line.j))])
    else:
        raise ValueError(f"unknown model shape {shape!r}")

    _add_cost_epigraphs(pb, net)
    prog = pb.build()
    return ModelBuild(
        program=prog,
        variable_map=VariableMap(pb.keys()),
        shape=shape,
        with_limits=with_limits,
    )


def build_rl1(net: Network) -> ModelBuild:
    """Compile the lifted-space relaxation over (p, v, W)."""
    return _build(net, "rl1", with_limits=False)


def build_rls1(net: Network) -> ModelBuild:
    """Compile the branch-flow relaxation over (p, P, v, l)."""
    return _build(net, "rls1", with_limits=False)


def add_line_limits(build: ModelBuild, net: Network) -> ModelBuild:
    """Add current-limit rows to an RL1/RLS1 build.

    Lines without a limit are untouched. RL1 limits become the linear row
    y^2 (v_i - 2W + v_j) <= imax^2; RLS1 limits become upper bounds on l.
    """
    if not net.has_line_limits:
        warnings.warn("no line in the network carries a current limit",
                      NoLimitsPresent, stacklevel=2)
        return build
    return _build(net, build.shape, with_limits=True)


def lifted_from_x(x: np.ndarray, build: ModelBuild, net: Network) -> LiftedSolution:
    vm = build.variable_map
    p = np.array([x[vm[("p", b.id)]] for b in net.buses])
    v = np.array([x[vm[("v", b.id)]] for b in net.buses])
    if build.shape == "rl1":
        W = np.array([x[vm[("w", l.key)]] for l in net.lines])
        return LiftedSolution(p=p, v=v, W=W)
    return map_g_inv(branchflow_from_x(x, build, net), net)


def branchflow_from_x(x: np.ndarray, build: ModelBuild, net: Network) -> BranchFlowSolution:
    vm = build.variable_map
    p = np.array([x[vm[("p", b.id)]] for b in net.buses])
    v = np.array([x[vm[("v", b.id)]] for b in net.buses])
    if build.shape == "rls1":
        P_fwd = np.array([x[vm[("flow", (l.i, l.j))]] for l in net.lines])
        P_rev = np.array([x[vm[("flow", (l.j, l.i))]] for l in net.lines])
        l = np.array([x[vm[("cur", ln.key)]] for ln in net.lines])
        return BranchFlowSolution(p=p, v=v, P_fwd=P_fwd, P_rev=P_rev, l=l)
    return map_g(lifted_from_x(x, build, net), net)
