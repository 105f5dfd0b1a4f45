"""Network model for DC microgrids.

A network is an undirected graph of buses and resistive lines. Each bus
carries injection bounds, voltage bounds and a strictly increasing cost
function; each line carries a conductance and an optional current limit.
All quantities are per-unit. Instances are immutable after construction
and safe to share across concurrent solves.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

INF = math.inf

# Assumption of uniform voltage caps is an exact equality; p.u. quantities
# are O(1), so the comparison tolerance is absolute.
VMAX_UNIFORM_TOL = 1e-12

DEFAULT_LOSS_TOL = 1e-9

BusKind = Literal["standalone", "slack"]


class NetworkValidationError(ValueError):
    """Base class for network validation failures."""


class Disconnected(NetworkValidationError):
    def __init__(self, components: list[list[int]]):
        self.components = components
        super().__init__(f"line graph is not connected: {len(components)} components")


class NonpositiveConductance(NetworkValidationError):
    def __init__(self, line: "Line"):
        self.line = line
        super().__init__(f"line ({line.i},{line.j}) has conductance {line.y} <= 0")


class BadBounds(NetworkValidationError):
    def __init__(self, bus_id: int, msg: str):
        self.bus_id = bus_id
        super().__init__(f"bus {bus_id}: {msg}")


class NonIncreasingCost(NetworkValidationError):
    def __init__(self, bus_id: int, msg: str):
        self.bus_id = bus_id
        super().__init__(f"bus {bus_id}: {msg}")


class InvalidLine(NetworkValidationError):
    def __init__(self, msg: str):
        super().__init__(msg)


class PositiveLowerInjection(UserWarning):
    """A bus has p_min > 0.

    Accepted, but the exactness guarantees assume p_min <= 0; downstream
    exactness reports carry this flag.
    """


@dataclass(frozen=True)
class CostFunction:
    """Strictly increasing injection cost, linear or quadratic.

    linear: coefficients (slope, intercept); f(p) = slope*p + intercept.
    quadratic: coefficients (a, b, c); f(p) = a*p^2 + b*p + c with a > 0.
    """

    kind: Literal["linear", "quadratic"] = "linear"
    coefficients: tuple[float, ...] = (1.0, 0.0)

    def value(self, p: float) -> float:
        if self.kind == "linear":
            slope, intercept = self.coefficients
            return slope * p + intercept
        a, b, c = self.coefficients
        return a * p * p + b * p + c

    def check_increasing(self, bus_id: int, p_min: float, p_max: float) -> None:
        if self.kind == "linear":
            if len(self.coefficients) != 2:
                raise NonIncreasingCost(bus_id, "linear cost needs (slope, intercept)")
            if not self.coefficients[0] > 0:
                raise NonIncreasingCost(bus_id, f"linear slope {self.coefficients[0]} <= 0")
            return
        if self.kind == "quadratic":
            if len(self.coefficients) != 3:
                raise NonIncreasingCost(bus_id, "quadratic cost needs (a, b, c)")
            a, b, _ = self.coefficients
            # a > 0 keeps the epigraph cone-representable; the derivative
            # 2ap + b must be positive over the whole injection interval,
            # which for a > 0 reduces to the lower endpoint.
            if not a > 0:
                raise NonIncreasingCost(bus_id, f"quadratic curvature {a} <= 0")
            if not math.isfinite(p_min):
                raise NonIncreasingCost(
                    bus_id, "quadratic cost on a bus with unbounded-below injection"
                )
            if not 2 * a * p_min + b > 0:
                raise NonIncreasingCost(
                    bus_id, f"derivative {2 * a * p_min + b} <= 0 at p_min={p_min}"
                )
            return
        raise NonIncreasingCost(bus_id, f"unknown cost kind {self.kind!r}")


LINEAR_LOSS_COST = CostFunction("linear", (1.0, 0.0))


@dataclass(frozen=True)
class Bus:
    """A bus with injection bounds, voltage bounds and a cost.

    Infinite injection bounds are written as ``math.inf`` / ``-math.inf``;
    model builders must omit the corresponding inequality rather than emit
    a large coefficient. A slack bus has unbounded injection and a fixed
    reference voltage (v_min == v_max).
    """

    id: int
    p_min: float
    p_max: float
    v_min: float
    v_max: float
    kind: BusKind = "standalone"
    cost: CostFunction = LINEAR_LOSS_COST

    def validate(self) -> None:
        if not self.v_min > 0:
            raise BadBounds(self.id, f"v_min {self.v_min} must be > 0")
        if self.v_min > self.v_max:
            raise BadBounds(self.id, f"v_min {self.v_min} > v_max {self.v_max}")
        if self.p_min > self.p_max:
            raise BadBounds(self.id, f"p_min {self.p_min} > p_max {self.p_max}")
        if self.kind == "slack":
            if self.p_min != -INF or self.p_max != INF:
                raise BadBounds(self.id, "slack bus must have unbounded injection")
            if self.v_min != self.v_max:
                raise BadBounds(self.id, "slack bus must have v_min == v_max")
        elif self.kind == "standalone":
            if self.p_min > 0:
                warnings.warn(
                    f"bus {self.id} has p_min {self.p_min} > 0; exactness "
                    "guarantees are void",
                    PositiveLowerInjection,
                    stacklevel=3,
                )
        else:
            raise BadBounds(self.id, f"unknown bus kind {self.kind!r}")
        self.cost.check_increasing(self.id, self.p_min, self.p_max)

    @property
    def v_ref(self) -> float:
        """Reference voltage of a slack bus (v_min == v_max)."""
        return self.v_min


@dataclass(frozen=True)
class Line:
    """A line between buses i and j with conductance y > 0.

    Endpoints are normalised so i < j. ``i_max`` is the optional current
    limit; absent means the line is unconstrained.
    """

    i: int
    j: int
    y: float
    i_max: float | None = None

    def __post_init__(self):
        if self.i == self.j:
            raise InvalidLine(f"line ({self.i},{self.j}) is a self-loop")
        if self.i > self.j:
            lo, hi = self.j, self.i
            object.__setattr__(self, "i", lo)
            object.__setattr__(self, "j", hi)

    @property
    def z(self) -> float:
        return 1.0 / self.y

    @property
    def key(self) -> tuple[int, int]:
        return (self.i, self.j)


@dataclass(frozen=True)
class Network:
    """Immutable bus/line graph.

    ``name``, ``provenance`` and ``adapt_applied`` are case metadata carried
    through from case files; they do not affect any computation.
    """

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    name: str = ""
    provenance: str = ""
    adapt_applied: bool = False

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))

    @property
    def n(self) -> int:
        return len(self.buses)

    @cached_property
    def bus_index(self) -> dict[int, int]:
        """Bus id -> position in ``buses``."""
        index = {}
        for pos, bus in enumerate(self.buses):
            if bus.id in index:
                raise NetworkValidationError(f"duplicate bus id {bus.id}")
            index[bus.id] = pos
        return index

    @cached_property
    def adjacency(self) -> dict[int, list[tuple[int, "Line"]]]:
        """Bus position -> list of (neighbour position, line)."""
        adj: dict[int, list[tuple[int, Line]]] = {pos: [] for pos in range(self.n)}
        for line in self.lines:
            a, b = self.bus_index[line.i], self.bus_index[line.j]
            adj[a].append((b, line))
            adj[b].append((a, line))
        return adj

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.bus_index[bus_id]]

    def line_between(self, i: int, j: int) -> Line | None:
        key = (min(i, j), max(i, j))
        for line in self.lines:
            if line.key == key:
                return line
        return None

    @property
    def has_line_limits(self) -> bool:
        return any(line.i_max is not None for line in self.lines)

    @property
    def any_positive_p_min(self) -> bool:
        return any(b.kind == "standalone" and b.p_min > 0 for b in self.buses)


def validate_network(net: Network, allow_disconnected: bool = False) -> None:
    """Check all Network/Bus/Line/CostFunction invariants.

    Returns normally iff every invariant holds; buses with p_min > 0 are
    accepted with a :class:`PositiveLowerInjection` warning.

    ``allow_disconnected`` skips the connectivity requirement; the model
    builders use it because opening tie breakers can split a case into
    islands that remain jointly solvable (the exactness theory then
    applies per connected component).
    """
    if net.n == 0:
        raise NetworkValidationError("network has no buses")
    net.bus_index  # raises on duplicate ids
    for bus in net.buses:
        bus.validate()
    seen: set[tuple[int, int]] = set()
    for line in net.lines:
        if line.i not in net.bus_index or line.j not in net.bus_index:
            raise InvalidLine(f"line ({line.i},{line.j}) references an unknown bus")
        if line.key in seen:
            raise InvalidLine(f"duplicate line between {line.i} and {line.j}")
        seen.add(line.key)
        if not line.y > 0:
            raise NonpositiveConductance(line)
        if line.i_max is not None and not line.i_max > 0:
            raise InvalidLine(f"line ({line.i},{line.j}) has i_max {line.i_max} <= 0")
    if not allow_disconnected:
        _check_connected(net)


def _check_connected(net: Network) -> None:
    if net.n == 1:
        return
    seen = {0}
    stack = [0]
    while stack:
        pos = stack.pop()
        for nbr, _ in net.adjacency[pos]:
            if nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    if len(seen) != net.n:
        inside = sorted(net.buses[p].id for p in seen)
        outside = sorted(b.id for p, b in enumerate(net.buses) if p not in seen)
        raise Disconnected([inside, outside])


def objective_value(net: Network, p) -> float:
    """Total cost sum_i f_i(p_i); with default costs, the total network loss."""
    return float(sum(bus.cost.value(float(pi)) for bus, pi in zip(net.buses, p)))


@dataclass(frozen=True)
class AssumptionReport:
    """Flags for the two exactness assumptions plus the p_min sign flag.

    ``a2_positive_loss`` is None when no solution was supplied: the total
    injection equals the total network loss, which is zero only at
    uniform-voltage points, so the flag is solution-dependent.
    """

    a1_uniform_vmax: bool
    a2_positive_loss: bool | None
    any_positive_p_min: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "a1_uniform_vmax": self.a1_uniform_vmax,
            "a2_positive_loss": self.a2_positive_loss,
            "any_positive_p_min": self.any_positive_p_min,
            "note": self.note,
        }


def check_assumptions(net: Network, sol=None, loss_tol: float = DEFAULT_LOSS_TOL) -> AssumptionReport:
    """Report whether the exactness assumptions hold.

    ``sol`` may be anything with a per-bus injection vector attribute ``p``
    (ordered like ``net.buses``). Pure function: identical inputs yield
    identical reports.
    """
    caps = [b.v_max for b in net.buses if b.kind == "standalone"]
    a1 = True
    if caps:
        a1 = max(caps) - min(caps) <= VMAX_UNIFORM_TOL
    if sol is None:
        return AssumptionReport(
            a1_uniform_vmax=a1,
            a2_positive_loss=None,
            any_positive_p_min=net.any_positive_p_min,
            note="a2 is solution-dependent: sum(p) equals total loss and is "
            "zero only at uniform-voltage points",
        )
    p = getattr(sol, "p", sol)
    total = float(sum(p))
    return AssumptionReport(
        a1_uniform_vmax=a1,
        a2_positive_loss=total > loss_tol,
        any_positive_p_min=net.any_positive_p_min,
        note=f"sum(p) = {total:.6g}",
    )
