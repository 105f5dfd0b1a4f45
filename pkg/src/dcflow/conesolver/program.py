"""Solver-agnostic conic program container.

A program has a linear objective (plus constant), sparse linear
equalities, optional per-variable bounds, and an ordered list of cone
memberships over disjoint variable index sets:

    nonneg : x_i >= 0 for each named index
    soc    : (t, w...) with t >= ||w||
    rsoc   : (u, v, w...) with u*v >= ||w||^2, u >= 0, v >= 0

Infinite bounds mean the corresponding inequality is absent; they are
stored as +/-inf, never as large sentinel numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

INF = math.inf


class ProgramError(ValueError):
    """Invalid conic program."""


@dataclass(frozen=True)
class Cone:
    kind: str  # "nonneg" | "soc" | "rsoc"
    indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))


@dataclass(frozen=True)
class ConeProgram:
    n_vars: int
    objective: np.ndarray
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    cones: tuple[Cone, ...] = ()
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    objective_constant: float = 0.0

    def __post_init__(self):
        n = self.n_vars
        object.__setattr__(self, "objective", np.asarray(self.objective, dtype=float))
        object.__setattr__(self, "b_eq", np.asarray(self.b_eq, dtype=float))
        object.__setattr__(self, "cones", tuple(self.cones))
        lower = np.full(n, -INF) if self.lower is None else np.asarray(self.lower, dtype=float)
        upper = np.full(n, INF) if self.upper is None else np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        a = self.a_eq
        if not sp.issparse(a):
            a = sp.csr_matrix(np.atleast_2d(np.asarray(a, dtype=float)))
            if a.shape == (1, 0):
                a = sp.csr_matrix((0, n))
        object.__setattr__(self, "a_eq", a.tocsr())

    @property
    def n_eq(self) -> int:
        return self.a_eq.shape[0]

    def validate(self) -> None:
        if self.objective.shape != (self.n_vars,):
            raise ProgramError("objective length does not match n_vars")
        if self.a_eq.shape[1] != self.n_vars:
            raise ProgramError("a_eq column count does not match n_vars")
        if self.b_eq.shape != (self.n_eq,):
            raise ProgramError("b_eq length does not match a_eq rows")
        if self.lower.shape != (self.n_vars,) or self.upper.shape != (self.n_vars,):
            raise ProgramError("bound arrays must have one entry per variable")
        seen: set[int] = set()
        for cone in self.cones:
            if cone.kind not in ("nonneg", "soc", "rsoc"):
                raise ProgramError(f"unknown cone kind {cone.kind!r}")
            if cone.kind == "soc" and len(cone.indices) < 2:
                raise ProgramError("soc cone needs at least 2 variables")
            if cone.kind == "rsoc" and len(cone.indices) < 3:
                raise ProgramError("rsoc cone needs at least 3 variables")
            for i in cone.indices:
                if not 0 <= i < self.n_vars:
                    raise ProgramError(f"cone index {i} out of range")
                if i in seen:
                    raise ProgramError(f"variable {i} appears in more than one cone block")
                seen.add(i)


class ProgramBuilder:
    """Incremental construction of a :class:`ConeProgram`.

    Variables are registered under hashable keys so that model builders
    can keep a bidirectional map between semantic quantities and program
    indices.
    """

    def __init__(self):
        self._keys: list = []
        self._index: dict = {}
        self._cost: list[float] = []
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._rows: list[dict] = []
        self._rhs: list[float] = []
        self._cones: list[Cone] = []
        self.constant = 0.0

    @property
    def n_vars(self) -> int:
        return len(self._keys)

    def add_var(self, key, cost: float = 0.0, lower: float = -INF, upper: float = INF) -> int:
        if key in self._index:
            raise ProgramError(f"duplicate variable key {key!r}")
        idx = len(self._keys)
        self._keys.append(key)
        self._index[key] = idx
        self._cost.append(cost)
        self._lower.append(lower)
        self._upper.append(upper)
        return idx

    def var(self, key) -> int:
        return self._index[key]

    def add_cost(self, key, coeff: float) -> None:
        self._cost[self._index[key]] += coeff

    def set_bounds(self, key, lower: float, upper: float) -> None:
        idx = self._index[key]
        self._lower[idx] = lower
        self._upper[idx] = upper

    def add_eq(self, coeffs: dict, rhs: float) -> int:
        self._rows.append({self._index[k]: float(v) for k, v in coeffs.items()})
        self._rhs.append(float(rhs))
        return len(self._rows) - 1

    def add_cone(self, kind: str, keys) -> None:
        self._cones.append(Cone(kind, tuple(self._index[k] for k in keys)))

    def build(self) -> ConeProgram:
        n = self.n_vars
        rows, cols, vals = [], [], []
        for r, row in enumerate(self._rows):
            for c, v in row.items():
                if v != 0.0:
                    rows.append(r)
                    cols.append(c)
                    vals.append(v)
        a = sp.csr_matrix((vals, (rows, cols)), shape=(len(self._rows), n))
        prog = ConeProgram(
            n_vars=n,
            objective=np.array(self._cost, dtype=float),
            a_eq=a,
            b_eq=np.array(self._rhs, dtype=float),
            cones=tuple(self._cones),
            lower=np.array(self._lower, dtype=float),
            upper=np.array(self._upper, dtype=float),
            objective_constant=self.constant,
        )
        prog.validate()
        return prog

    def keys(self) -> list:
        return list(self._keys)


# --- plain-text debug dump -------------------------------------------------
#
# One header line, then one record per line:
#   dcflow-cone-dump 1 <n_vars> <n_eq> <n_cones>
#   const <value>
#   c <var> <value>               (only nonzero objective entries)
#   A <row> <var> <value>         (equality coefficients)
#   b <row> <value>               (only nonzero right-hand sides)
#   l <var> <value>               (finite lower bounds)
#   u <var> <value>               (finite upper bounds)
#   k <kind> <var> [<var> ...]    (cone membership, declaration order)
#
# Used only by tests and for offline inspection of compiled models.


def dump_program(prog: ConeProgram) -> str:
    out = [f"dcflow-cone-dump 1 {prog.n_vars} {prog.n_eq} {len(prog.cones)}"]
    out.append(f"const {prog.objective_constant!r}")
    for i, v in enumerate(prog.objective):
        if v != 0.0:
            out.append(f"c {i} {float(v)!r}")
    coo = prog.a_eq.tocoo()
    order = np.lexsort((coo.col, coo.row))
    for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
        out.append(f"A {r} {c} {float(v)!r}")
    for r, v in enumerate(prog.b_eq):
        if v != 0.0:
            out.append(f"b {r} {float(v)!r}")
    for i, v in enumerate(prog.lower):
        if v != -INF:
            out.append(f"l {i} {float(v)!r}")
    for i, v in enumerate(prog.upper):
        if v != INF:
            out.append(f"u {i} {float(v)!r}")
    for cone in prog.cones:
        out.append("k " + cone.kind + " " + " ".join(str(i) for i in cone.indices))
    return "\n".join(out) + "\n"


def parse_dump(text: str) -> ConeProgram:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if head[:2] != ["dcflow-cone-dump", "1"]:
        raise ProgramError("not a dcflow-cone-dump v1 document")
    n_vars, n_eq, _ = (int(x) for x in head[2:5])
    c = np.zeros(n_vars)
    lower = np.full(n_vars, -INF)
    upper = np.full(n_vars, INF)
    b = np.zeros(n_eq)
    rows, cols, vals = [], [], []
    cones: list[Cone] = []
    const = 0.0
    for ln in lines[1:]:
        parts = ln.split()
        tag = parts[0]
        if tag == "const":
            const = float(parts[1])
        elif tag == "c":
            c[int(parts[1])] = float(parts[2])
        elif tag == "A":
            rows.append(int(parts[1]))
            cols.append(int(parts[2]))
            vals.append(float(parts[3]))
        elif tag == "b":
            b[int(parts[1])] = float(parts[2])
        elif tag == "l":
            lower[int(parts[1])] = float(parts[2])
        elif tag == "u":
            upper[int(parts[1])] = float(parts[2])
        elif tag == "k":
            cones.append(Cone(parts[1], tuple(int(x) for x in parts[2:])))
        else:
            raise ProgramError(f"unknown dump record {tag!r}")
    a = sp.csr_matrix((vals, (rows, cols)), shape=(n_eq, n_vars))
    prog = ConeProgram(n_vars, c, a, b, tuple(cones), lower, upper, const)
    prog.validate()
    return prog
