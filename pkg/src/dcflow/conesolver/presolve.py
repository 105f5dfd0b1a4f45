"""Presolve for conic programs.

Performs, until a fixed point is reached:

* bound folding: lower > upper is proven infeasible, lower == upper fixes
  the variable (cone-block variables are kept, since cone memberships
  reference variables by index);
* singleton equality rows a*x_i = b fix x_i = b/a;
* substitution of fixed variables into rows, objective and rhs;

then drops linearly dependent equality rows found by a pivoted QR of the
reduced equality matrix, after checking the dependent rows are
consistent. The returned :class:`Presolution` maps reduced solutions
back to original indices exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .program import INF, Cone, ConeProgram

_FEAS_TOL = 1e-9
_RANK_TOL = 1e-11


class ProvenInfeasible(Exception):
    """Presolve established that no feasible point exists."""


@dataclass
class Presolution:
    """Mapping from a reduced program's solution back to the original."""

    n_orig: int
    kept_vars: np.ndarray
    fixed_values: dict[int, float]
    kept_rows: np.ndarray
    dropped_rows: np.ndarray
    folded_rows: list[tuple[int, int, float]]  # (row, var, coefficient)
    objective_shift: float

    def restore_x(self, x_reduced: np.ndarray) -> np.ndarray:
        x = np.empty(self.n_orig)
        x[self.kept_vars] = x_reduced
        for i, v in self.fixed_values.items():
            x[i] = v
        return x

    def restore_y(self, y_reduced: np.ndarray, prog: ConeProgram, x_full: np.ndarray,
                  reduced_costs: np.ndarray | None = None) -> np.ndarray:
        """Equality duals for the original rows.

        Dropped dependent rows get zero. Folded singleton rows recover
        their dual from stationarity of the eliminated variable,
        attributing no dual weight to its (slack or coincident) bounds.
        """
        y = np.zeros(prog.n_eq)
        y[self.kept_rows] = y_reduced
        if self.folded_rows:
            at = prog.a_eq.tocsc()
            for row, var, coef in reversed(self.folded_rows):
                resid = prog.objective[var] + float((at[:, var].T @ y).item())
                if reduced_costs is not None:
                    resid += reduced_costs[var]
                y[row] = -resid / coef
        return y


def presolve(prog: ConeProgram) -> tuple[ConeProgram, Presolution]:
    prog.validate()
    n = prog.n_vars
    lower = prog.lower.copy()
    upper = prog.upper.copy()
    cone_vars: set[int] = set()
    for cone in prog.cones:
        cone_vars.update(cone.indices)

    a = prog.a_eq.tocsr().copy()
    b = prog.b_eq.copy()
    fixed: dict[int, float] = {}
    folded: list[tuple[int, int, float]] = []
    dead_rows: set[int] = set()
    shift = 0.0
    scale = 1.0 + float(np.max(np.abs(b))) if b.size else 1.0

    def fix_var(i: int, value: float):
        nonlocal shift
        if i in fixed:
            if abs(fixed[i] - value) > _FEAS_TOL * (1.0 + abs(value)):
                raise ProvenInfeasible(f"variable {i} fixed to conflicting values")
            return
        if value < lower[i] - _FEAS_TOL or value > upper[i] + _FEAS_TOL:
            raise ProvenInfeasible(f"fixed value {value} of variable {i} violates bounds")
        fixed[i] = value
        shift += prog.objective[i] * value

    changed = True
    while changed:
        changed = False
        if np.any(lower > upper):
            i = int(np.argmax(lower - upper))
            raise ProvenInfeasible(f"variable {i} has empty bound interval")
        for i in np.nonzero(lower == upper)[0]:
            i = int(i)
            if i not in fixed and i not in cone_vars and np.isfinite(lower[i]):
                fix_var(i, float(lower[i]))
                changed = True
        # substitute fixed variables out of the rows
        for r in range(a.shape[0]):
            if r in dead_rows:
                continue
            start, end = a.indptr[r], a.indptr[r + 1]
            live = [(int(c), a.data[k]) for k, c in enumerate(a.indices[start:end], start)
                    if int(c) not in fixed and a.data[k] != 0.0]
            rhs = b[r] - sum(
                a.data[k] * fixed[int(c)]
                for k, c in enumerate(a.indices[start:end], start)
                if int(c) in fixed
            )
            if len(live) == 0:
                if abs(rhs) > _FEAS_TOL * scale:
                    raise ProvenInfeasible(f"row {r} reduces to 0 = {rhs}")
                dead_rows.add(r)
                changed = True
            elif len(live) == 1:
                c, coef = live[0]
                if c not in cone_vars:
                    fix_var(c, rhs / coef)
                    folded.append((r, c, coef))
                    dead_rows.add(r)
                    changed = True

    kept_vars = np.array([i for i in range(n) if i not in fixed], dtype=np.int64)
    new_index = {int(old): k for k, old in enumerate(kept_vars)}
    candidate_rows = np.array(
        [r for r in range(a.shape[0]) if r not in dead_rows], dtype=np.int64
    )

    # reduced equality system
    if candidate_rows.size:
        a_red = a[candidate_rows][:, kept_vars].tocsr()
        b_red = b[candidate_rows].astype(float)
        if fixed:
            fixed_idx = np.fromiter(fixed.keys(), dtype=np.int64)
            fixed_val = np.fromiter((fixed[int(i)] for i in fixed_idx), dtype=float)
            b_red = b_red - np.asarray(
                a[candidate_rows][:, fixed_idx] @ fixed_val
            ).ravel()
        keep_local, drop_local = _independent_rows(a_red, b_red)
        kept_rows = candidate_rows[keep_local]
        dropped_rows = np.concatenate(
            [candidate_rows[drop_local], np.array(sorted(dead_rows), dtype=np.int64)]
        ) if (len(drop_local) or dead_rows) else np.array([], dtype=np.int64)
        a_red = a_red[keep_local]
        b_red = b_red[keep_local]
    else:
        a_red = sp.csr_matrix((0, len(kept_vars)))
        b_red = np.zeros(0)
        kept_rows = candidate_rows
        dropped_rows = np.array(sorted(dead_rows), dtype=np.int64)

    cones = tuple(
        Cone(c.kind, tuple(new_index[i] for i in c.indices)) for c in prog.cones
    )
    reduced = ConeProgram(
        n_vars=len(kept_vars),
        objective=prog.objective[kept_vars],
        a_eq=a_red,
        b_eq=b_red,
        cones=cones,
        lower=lower[kept_vars],
        upper=upper[kept_vars],
        objective_constant=prog.objective_constant + shift,
    )
    reduced.validate()
    solution = Presolution(
        n_orig=n,
        kept_vars=kept_vars,
        fixed_values=fixed,
        kept_rows=kept_rows,
        dropped_rows=np.sort(dropped_rows),
        folded_rows=folded,
        objective_shift=shift,
    )
    return reduced, solution


def _independent_rows(a: sp.csr_matrix, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows of a maximal independent set, by pivoted QR of A^T.

    Dependent rows must be consistent with the kept ones, otherwise the
    system is proven infeasible.
    """
    m = a.shape[0]
    if m == 0:
        return np.array([], dtype=np.int64), np.array([], dtype=np.int64)
    dense_at = np.asarray(a.todense()).T  # n x m
    _, r, piv = scipy.linalg.qr(dense_at, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r)) if r.size else np.array([])
    if diag.size == 0 or diag[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(diag > _RANK_TOL * diag[0] * max(a.shape)))
    keep = np.sort(piv[:rank])
    drop = np.sort(piv[rank:])
    if drop.size:
        # consistency: least-squares residual of the full system must vanish
        x, *_ = np.linalg.lstsq(np.asarray(a.todense()), b, rcond=None)
        resid = np.asarray(a @ x).ravel() - b
        bad = np.abs(resid[drop]) > _FEAS_TOL * (1.0 + np.max(np.abs(b)))
        if np.any(bad):
            raise ProvenInfeasible("equality rows are linearly dependent and inconsistent")
    return keep.astype(np.int64), drop.astype(np.int64)
