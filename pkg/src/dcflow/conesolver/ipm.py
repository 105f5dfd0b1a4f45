"""Primal-dual interior-point solver for conic programs.

Algorithm: homogeneous self-dual embedding with Nesterov-Todd scaling
and Mehrotra predictor-corrector steps. The embedded model over
(x, y, z, s, tau, kappa) is

    A'y + G'z + c*tau          = 0
    A x - b*tau                = 0
    G x + s - h*tau            = 0
    c'x + b'y + h'z + kappa    = 0
    s in K, z in K, tau >= 0, kappa >= 0

where the internal standard form  min c'x : Ax = b, Gx + s = h, s in K
is compiled from a :class:`ConeProgram` (variable bounds and cone
memberships become rows of G). Each Newton step solves one quasi-definite
KKT system

    [ 0   A'   G'  ] [dx]
    [ A   0    0   ] [dy]  = rhs
    [ G   0   -W^2 ] [dz]

factorized once per iteration by sparse LDL^T with static regularization
and iterative refinement; tau/kappa are pivoted out analytically.

A solve is single-threaded and deterministic given (program, settings):
the initial point is the unit interior point e of each cone (optionally
perturbed by a seeded generator for uniqueness experiments), never a
problem-data heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .cones import ConeLayout, Scaling
from .ldl import QuasiDefiniteLDL
from .presolve import Presolution, ProvenInfeasible, presolve
from .program import INF, ConeProgram

OPTIMAL = "optimal"
PRIMAL_INFEASIBLE = "primal_infeasible"
DUAL_INFEASIBLE = "dual_infeasible"
ITERATION_LIMIT = "iteration_limit"
NUMERICAL_FAILURE = "numerical_failure"

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class SolverSettings:
    tol_p: float = 1e-9
    tol_d: float = 1e-9
    tol_gap: float = 1e-9
    tol_infeas: float = 1e-9
    max_iterations: int = 200
    static_reg: float = 1e-8
    refine_passes: int = 3
    frac_to_boundary: float = 0.99
    seed: int = 0
    presolve: bool = True
    retries: int = 2


@dataclass(frozen=True)
class SolveReport:
    status: str
    iterations: int
    primal_residual: float
    dual_residual: float
    duality_gap: float
    solve_seed: int
    primal_objective: float = np.nan
    dual_objective: float = np.nan
    dyn_reg_bumps: int = 0

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "duality_gap": self.duality_gap,
            "solve_seed": self.solve_seed,
            "primal_objective": self.primal_objective,
            "dual_objective": self.dual_objective,
        }


class _StandardForm:
    """Internal min c'x : Ax = b, Gx + s = h, s in K."""

    def __init__(self, prog: ConeProgram):
        n = prog.n_vars
        self.n = n
        self.c = prog.objective.copy()
        self.constant = prog.objective_constant

        a_rows = [prog.a_eq.tocsr()]
        b_parts = [prog.b_eq]
        cone_vars = {i for cone in prog.cones for i in cone.indices}

        g_rows: list[int] = []
        g_cols: list[int] = []
        g_vals: list[float] = []
        h_vals: list[float] = []

        def g_entry(col: int, val: float, rhs: float):
            g_rows.append(len(h_vals))
            g_cols.append(col)
            g_vals.append(val)
            h_vals.append(rhs)

        # pinned variables inside cone blocks stay as equality rows
        pin_rows: list[int] = []
        pin_vals: list[float] = []
        for i in range(n):
            lo, up = prog.lower[i], prog.upper[i]
            if lo == up and np.isfinite(lo):
                pin_rows.append(i)
                pin_vals.append(lo)
                continue
            if lo != -INF:
                g_entry(i, -1.0, -lo)
            if up != INF:
                g_entry(i, 1.0, up)
        if pin_rows:
            pin = sp.csr_matrix(
                (np.ones(len(pin_rows)), (np.arange(len(pin_rows)), pin_rows)),
                shape=(len(pin_rows), n),
            )
            a_rows.append(pin)
            b_parts.append(np.asarray(pin_vals, dtype=float))

        # orthant rows must stay leading: emit nonneg cone rows before the
        # quadratic blocks, remembering each cone's row range for dual maps
        nonneg_starts: dict[int, int] = {}
        for ci, cone in enumerate(prog.cones):
            if cone.kind == "nonneg":
                nonneg_starts[ci] = len(h_vals)
                for i in cone.indices:
                    g_entry(i, -1.0, 0.0)

        blocks: list[tuple[str, int]] = []
        quad_info: dict[int, tuple[str, int, int, np.ndarray]] = {}
        n_nonneg_rows = len(h_vals)
        for ci, cone in enumerate(prog.cones):
            if cone.kind == "soc":
                start = len(h_vals)
                for i in cone.indices:
                    g_entry(i, -1.0, 0.0)
                blocks.append(("soc", len(cone.indices)))
                quad_info[ci] = ("soc", start, len(cone.indices), np.ones(len(cone.indices)))
            elif cone.kind == "rsoc":
                start = len(h_vals)
                # internal block lives in the self-dual cone 2uv >= ||w||^2;
                # scaling w rows by sqrt(2) realizes uv >= ||w||^2
                scale = np.ones(len(cone.indices))
                scale[2:] = _SQRT2
                for i, fac in zip(cone.indices, scale):
                    g_entry(i, -fac, 0.0)
                blocks.append(("rsoc", len(cone.indices)))
                quad_info[ci] = ("rsoc", start, len(cone.indices), scale)

        self.cone_dual_info = []
        for ci, cone in enumerate(prog.cones):
            if cone.kind == "nonneg":
                self.cone_dual_info.append(
                    ("nonneg", nonneg_starts[ci], len(cone.indices),
                     np.ones(len(cone.indices)))
                )
            else:
                self.cone_dual_info.append(quad_info[ci])

        self.A = sp.vstack(a_rows).tocsc() if a_rows else sp.csc_matrix((0, n))
        self.b = np.concatenate(b_parts) if b_parts else np.zeros(0)
        m = len(h_vals)
        self.G = sp.csc_matrix(
            (np.asarray(g_vals), (np.asarray(g_rows), np.asarray(g_cols))),
            shape=(m, n),
        )
        self.h = np.asarray(h_vals, dtype=float)
        self.layout = ConeLayout(n_nonneg_rows, blocks)
        self.n_orig_eq = prog.n_eq
        self.orig = (self.A.copy(), self.G.copy(), self.b.copy(),
                     self.c.copy(), self.h.copy())
        self.e_col, self.d_a, self.d_g = _equilibrate(self)

    def unscale(self, x, y, z, s):
        return (self.e_col * x, self.d_a * y, self.d_g * z,
                s / self.d_g if len(s) else s)


def _equilibrate(std: "_StandardForm", passes: int = 8):
    """Ruiz row/column equilibration of the stacked [A; G] system.

    Column scaling is unconstrained (cone memberships live on the G
    slacks, where column factors cancel); quadratic-block rows must scale
    compatibly with their cone, so SOC rows share one factor and the
    rotated-cone w rows take the geometric mean of the u and v factors.
    Modifies the standard-form data in place and returns the accumulated
    (column, A-row, G-row) scale vectors.
    """
    n = std.n
    p, m = std.A.shape[0], std.G.shape[0]
    e_col = np.ones(n)
    d_a = np.ones(p)
    d_g = np.ones(m)
    layout = std.layout
    a = std.A.tocsr()
    g = std.G.tocsr()

    def row_max(mat):
        out = np.zeros(mat.shape[0])
        mat = mat.tocsr()
        for r in range(mat.shape[0]):
            sl = slice(mat.indptr[r], mat.indptr[r + 1])
            if sl.stop > sl.start:
                out[r] = np.max(np.abs(mat.data[sl]))
        return out

    for _ in range(passes):
        ra = row_max(a)
        rg = row_max(g)
        # project quadratic-block row factors onto cone-compatible ones
        for blk in layout.blocks:
            sl = slice(blk.offset, blk.offset + blk.dim)
            vals = rg[sl]
            vals[vals == 0] = 1.0
            if blk.kind == "soc":
                rg[sl] = np.exp(np.mean(np.log(vals)))
            else:
                rg[sl.start + 2:sl.stop] = np.sqrt(vals[0] * vals[1])
        ua = 1.0 / np.sqrt(np.maximum(ra, 1e-12))
        ug = 1.0 / np.sqrt(np.maximum(rg, 1e-12))
        ua[ra == 0] = 1.0
        ug[rg == 0] = 1.0
        a = sp.diags(ua) @ a
        g = sp.diags(ug) @ g
        d_a *= ua
        d_g *= ug
        stacked = sp.vstack([a, g]).tocsc()
        cmax = np.zeros(n)
        for ccol in range(n):
            sl = slice(stacked.indptr[ccol], stacked.indptr[ccol + 1])
            if sl.stop > sl.start:
                cmax[ccol] = np.max(np.abs(stacked.data[sl]))
        uc = 1.0 / np.sqrt(np.maximum(cmax, 1e-12))
        uc[cmax == 0] = 1.0
        a = a @ sp.diags(uc)
        g = g @ sp.diags(uc)
        e_col *= uc

    std.A = a.tocsc()
    std.G = g.tocsc()
    std.b = d_a * std.b
    std.h = d_g * std.h
    std.c = e_col * std.c
    return e_col, d_a, d_g


class _KKT:
    """Quasi-definite KKT matrix with fixed pattern and per-iteration values."""

    def __init__(self, std: _StandardForm, static_reg: float):
        n, p, m = std.n, std.A.shape[0], std.G.shape[0]
        self.n, self.p, self.m = n, p, m
        self.N = n + p + m
        layout = std.layout

        rows: list[np.ndarray] = []
        cols: list[np.ndarray] = []
        vals: list[np.ndarray] = []

        def add(r, c, v):
            rows.append(np.asarray(r, dtype=np.int64))
            cols.append(np.asarray(c, dtype=np.int64))
            vals.append(np.asarray(v, dtype=float))

        idx = np.arange(n, dtype=np.int64)
        add(idx, idx, np.zeros(n))  # x diagonal
        acoo = std.A.tocoo()
        add(acoo.col, acoo.row + n, acoo.data)  # A^T block (upper)
        idx = np.arange(p, dtype=np.int64) + n
        add(idx, idx, np.zeros(p))  # y diagonal
        gcoo = std.G.tocoo()
        add(gcoo.col, gcoo.row + n + p, gcoo.data)  # G^T block (upper)

        base = n + p
        nn = layout.n_nonneg
        nn_start = len(np.concatenate(rows)) if rows else 0
        idx = np.arange(nn, dtype=np.int64) + base
        add(idx, idx, np.zeros(nn))
        self._nn_slots = np.arange(nn_start, nn_start + nn, dtype=np.int64)

        self._block_slots: list[tuple[int, np.ndarray, np.ndarray, np.ndarray]] = []
        cursor = nn_start + nn
        for bi, blk in enumerate(layout.blocks):
            d = blk.dim
            lr, lc = np.triu_indices(d)
            add(blk.offset + base + lr, blk.offset + base + lc, np.zeros(len(lr)))
            slots = np.arange(cursor, cursor + len(lr), dtype=np.int64)
            self._block_slots.append((bi, slots, lr, lc))
            cursor += len(lr)

        self.rows = np.concatenate(rows)
        self.cols = np.concatenate(cols)
        self.base_vals = np.concatenate(vals)
        nnz = len(self.rows)

        diag_mask = self.rows == self.cols
        self.reg_vals = np.zeros(nnz)
        self.reg_vals[diag_mask & (self.rows < n)] = static_reg
        self.reg_vals[diag_mask & (self.rows >= n)] = -static_reg

        signs = np.ones(self.N)
        signs[n:] = -1.0
        self.ldl = QuasiDefiniteLDL(self.N, self.rows, self.cols, signs)

        order = np.lexsort((self.rows, self.cols))
        self._order = order
        indptr = np.zeros(self.N + 1, dtype=np.int64)
        np.add.at(indptr, self.cols[order] + 1, 1)
        np.cumsum(indptr, out=indptr)
        self._U = sp.csc_matrix(
            (self.base_vals[order].copy(), self.rows[order], indptr),
            shape=(self.N, self.N),
        )
        self._diag_ids = np.nonzero(diag_mask)[0]
        self._diag_rows = self.rows[self._diag_ids]
        self.vals_true = self.base_vals.copy()
        self._vals_ld = self.base_vals.astype(np.longdouble)
        self.refine_passes = 3
        self.refine_rtol = 1e-14
        # extended-precision refinement for the terminal iterations, where
        # direction accuracy must beat the vanishing complementarity products
        self.precise = False

    def update(self, scal: Scaling) -> None:
        vals = self.base_vals.copy()
        if len(self._nn_slots):
            vals[self._nn_slots] = -scal.w2_diag_nonneg()
        for bi, slots, lr, lc in self._block_slots:
            w2 = scal.w2_block(bi)
            vals[slots] = -w2[lr, lc]
        scale_limit = 1e18 * (1.0 + float(np.max(np.abs(self.base_vals))))
        if not np.all(np.isfinite(vals)) or float(np.max(np.abs(vals))) > scale_limit:
            raise FloatingPointError("scaling blocks exceed factorizable range")
        self.vals_true = vals
        self._vals_ld = vals.astype(np.longdouble)
        self._U.data[:] = vals[self._order]
        reg = vals + self.reg_vals
        # symmetric row-max scaling bounds every entry of the scaled matrix
        # by 1 in magnitude, taming element growth as the NT blocks blow up
        # near the central-path boundary; the factor is of D K D while
        # refinement runs against the true unscaled K
        rmax = np.zeros(self.N)
        np.maximum.at(rmax, self.rows, np.abs(reg))
        np.maximum.at(rmax, self.cols, np.abs(reg))
        self._dscale = 1.0 / np.sqrt(np.maximum(rmax, 1e-300))
        self.ldl.refactor(reg * self._dscale[self.rows] * self._dscale[self.cols])

    def matvec(self, u: np.ndarray) -> np.ndarray:
        diag = np.zeros(self.N)
        diag[self._diag_rows] = self.vals_true[self._diag_ids]
        return self._U @ u + self._U.T @ u - diag * u

    def _precond_solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._dscale * self.ldl.solve(self._dscale * rhs)

    def _matvec_ld(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros(self.N, dtype=np.longdouble)
        np.add.at(out, self.rows, self._vals_ld * u[self.cols])
        np.add.at(out, self.cols, self._vals_ld * u[self.rows])
        diag = np.zeros(self.N, dtype=np.longdouble)
        diag[self._diag_rows] = self._vals_ld[self._diag_ids]
        return out - diag * u

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        sol = self._precond_solve(rhs)
        rhs_scale = 1.0 + float(np.max(np.abs(rhs))) if rhs.size else 1.0
        passes = self.refine_passes + (4 if self.precise else 0)
        if self.precise:
            rhs_ld = rhs.astype(np.longdouble)
            sol_ld = sol.astype(np.longdouble)
            best, best_norm = sol_ld, np.inf
            for _ in range(passes):
                resid = rhs_ld - self._matvec_ld(sol_ld)
                rnorm = float(np.max(np.abs(resid)))
                if rnorm < best_norm:
                    best, best_norm = sol_ld.copy(), rnorm
                if rnorm <= self.refine_rtol * rhs_scale:
                    break
                sol_ld = sol_ld + self._precond_solve(
                    resid.astype(np.float64)
                ).astype(np.longdouble)
            resid = rhs_ld - self._matvec_ld(sol_ld)
            if float(np.max(np.abs(resid))) > best_norm:
                sol_ld = best
            return sol_ld.astype(np.float64)
        best = sol
        best_norm = np.inf
        for _ in range(passes):
            resid = rhs - self.matvec(sol)
            rnorm = float(np.max(np.abs(resid)))
            if rnorm < best_norm:
                best, best_norm = sol, rnorm
            if rnorm <= self.refine_rtol * rhs_scale:
                break
            sol = sol + self._precond_solve(resid)
        else:
            resid = rhs - self.matvec(sol)
            if float(np.max(np.abs(resid))) > best_norm:
                sol = best
        return sol

    def solve3(self, r1: np.ndarray, r2: np.ndarray, r3: np.ndarray):
        sol = self.solve(np.concatenate([r1, r2, r3]))
        n, p = self.n, self.p
        return sol[:n], sol[n:n + p], sol[n + p:]


def _norm_inf(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


@dataclass
class _RawResult:
    status: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    iterations: int
    pres: float
    dres: float
    gap: float
    pobj: float
    dobj: float
    dyn_bumps: int


def _initial_point(layout: ConeLayout, seed: int):
    e = layout.identity()
    s = e.copy()
    z = e.copy()
    if seed:
        rng = np.random.default_rng(seed)
        nn = layout.n_nonneg
        s[:nn] *= 1.0 + 0.1 * rng.random(nn)
        z[:nn] *= 1.0 + 0.1 * rng.random(nn)
        for blk in layout.blocks:
            sl = slice(blk.offset, blk.offset + blk.dim)
            s[sl] *= 1.0 + 0.1 * rng.random()
            z[sl] *= 1.0 + 0.1 * rng.random()
    return s, z


def _ipm(std: _StandardForm, settings: SolverSettings) -> _RawResult:
    layout = std.layout
    A, G, b, c, h = std.A, std.G, std.b, std.c, std.h
    n, p, m = std.n, A.shape[0], G.shape[0]
    m_deg = layout.degree

    bnorm, cnorm, hnorm = _norm_inf(b), _norm_inf(c), _norm_inf(h)
    res_scale_p = 1.0 + max(bnorm, hnorm)
    res_scale_d = 1.0 + cnorm

    x = np.zeros(n)
    y = np.zeros(p)
    s, z = _initial_point(layout, settings.seed)
    tau, kappa = 1.0, 1.0

    kkt = _KKT(std, settings.static_reg)
    kkt.refine_passes = settings.refine_passes

    At = A.T.tocsc()
    Gt = G.T.tocsc()

    best: _RawResult | None = None
    best_score = np.inf
    status = ITERATION_LIMIT
    it = 0
    dyn_bumps = 0
    prev_mu = np.inf
    stall_count = 0
    last_alpha = 1.0

    for it in range(settings.max_iterations):
        rx = At @ y + Gt @ z + c * tau
        ry = A @ x - b * tau
        rz = G @ x + s - h * tau
        rtau = float(c @ x + b @ y + h @ z + kappa)
        stz = float(s @ z)
        mu = (stz + tau * kappa) / (m_deg + 1)

        pobj = float(c @ x) / tau + std.constant
        dobj = -float(b @ y + h @ z) / tau + std.constant
        pres = max(_norm_inf(ry), _norm_inf(rz)) / tau / res_scale_p
        dres = _norm_inf(rx) / tau / res_scale_d
        gap = stz / (tau * tau)

        score = max(pres, dres, gap)
        if score < best_score:
            best_score = score
            best = _RawResult(
                status, x / tau, y / tau, z / tau, s / tau, it,
                pres, dres, gap, pobj, dobj, dyn_bumps,
            )

        if (
            pres <= settings.tol_p
            and dres <= settings.tol_d
            and (gap <= settings.tol_gap or gap <= settings.tol_gap * abs(pobj))
        ):
            return _RawResult(
                OPTIMAL, x / tau, y / tau, z / tau, s / tau, it,
                pres, dres, gap, pobj, dobj, dyn_bumps,
            )

        if mu <= 1e-14:
            # at the numerical floor for double precision; the best iterate
            # either already satisfied the tolerances or never will
            status = NUMERICAL_FAILURE
            break
        if mu > 0.98 * prev_mu and last_alpha < 1e-6:
            stall_count += 1
            if stall_count >= 999:
                status = NUMERICAL_FAILURE
                break
        else:
            stall_count = 0
        prev_mu = mu
        kkt.precise = mu < 1e-6

        # infeasibility certificates (tau -> 0, kappa > 0)
        nu_p = -float(b @ y + h @ z)
        if nu_p > 1e-12:
            ray_res = _norm_inf(At @ y + Gt @ z) / nu_p
            if ray_res <= settings.tol_infeas:
                return _RawResult(
                    PRIMAL_INFEASIBLE, np.zeros(n), y / nu_p, z / nu_p,
                    np.zeros(m), it, pres, dres, gap, np.nan, np.nan, dyn_bumps,
                )
        nu_d = -float(c @ x)
        if nu_d > 1e-12:
            ray_res = max(_norm_inf(A @ x), _norm_inf(G @ x + s)) / nu_d
            if ray_res <= settings.tol_infeas:
                return _RawResult(
                    DUAL_INFEASIBLE, x / nu_d, np.zeros(p), np.zeros(m),
                    s / nu_d, it, pres, dres, gap, np.nan, np.nan, dyn_bumps,
                )

        scal = layout.scaling(s, z)
        kkt.update(scal)
        dyn_bumps += kkt.ldl.n_bumped
        u1 = kkt.solve3(-c, b, h)
        q1 = float(c @ u1[0] + b @ u1[1] + h @ u1[2])
        lam_sq = layout.jordan_prod(scal.lam, scal.lam)

        def direction(eta: float, ds_rhs: np.ndarray, dtk_rhs: float):
            w_lam_ds = scal.mult_w(scal.lam_solve(ds_rhs)) if m else ds_rhs
            rhs_x = -eta * rx
            rhs_y = -eta * ry
            rhs_z = -eta * rz - w_lam_ds
            u2 = kkt.solve3(rhs_x, rhs_y, rhs_z)
            q2 = float(c @ u2[0] + b @ u2[1] + h @ u2[2])
            den = q1 - kappa / tau
            if abs(den) < 1e-300:
                raise FloatingPointError("singular tau pivot in HSD step")
            dtau = (-eta * rtau - dtk_rhs / tau - q2) / den
            dx = u2[0] + dtau * u1[0]
            dy = u2[1] + dtau * u1[1]
            dz = u2[2] + dtau * u1[2]
            if m:
                ds = w_lam_ds - scal.mult_w(scal.mult_w(dz))
            else:
                ds = dz
            dkappa = (dtk_rhs - kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkappa

        def max_alpha(dz, ds, dtau, dkappa):
            alpha = layout.max_step(z, dz) if m else np.inf
            alpha = min(alpha, layout.max_step(s, ds) if m else np.inf)
            if dtau < 0:
                alpha = min(alpha, -tau / dtau)
            if dkappa < 0:
                alpha = min(alpha, -kappa / dkappa)
            return alpha

        # predictor
        dxa, dya, dza, dsa, dtaua, dkappaa = direction(1.0, -lam_sq, -tau * kappa)
        alpha_aff = min(1.0, max_alpha(dza, dsa, dtaua, dkappaa))
        mu_aff = (
            float((s + alpha_aff * dsa) @ (z + alpha_aff * dza))
            + (tau + alpha_aff * dtaua) * (kappa + alpha_aff * dkappaa)
        ) / (m_deg + 1)
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

        # Mehrotra corrector
        corr = layout.jordan_prod(scal.mult_winv(dsa), scal.mult_w(dza)) if m else dsa
        ds_rhs = sigma * mu * layout.identity() - lam_sq - corr
        dtk_rhs = sigma * mu - tau * kappa - dtaua * dkappaa
        dx, dy, dz, ds, dtau, dkappa = direction(1.0 - sigma, ds_rhs, dtk_rhs)
        alpha = min(1.0, settings.frac_to_boundary * max_alpha(dz, ds, dtau, dkappa))
        # max_alpha is exact only in real arithmetic; near the boundary the
        # quadratic roots carry rounding error, so back off until the trial
        # point is verifiably interior
        while alpha > 1e-13:
            s_new = s + alpha * ds
            z_new = z + alpha * dz
            tau_new = tau + alpha * dtau
            kappa_new = kappa + alpha * dkappa
            if (
                tau_new > 0.0
                and kappa_new > 0.0
                and (m == 0 or layout.interior_margin(s_new) > 0.0)
                and (m == 0 or layout.interior_margin(z_new) > 0.0)
            ):
                break
            alpha *= 0.5
        else:
            status = NUMERICAL_FAILURE
            break

        x += alpha * dx
        y += alpha * dy
        z = z_new
        s = s_new
        tau = tau_new
        kappa = kappa_new
        last_alpha = alpha

    assert best is not None
    return replace(best, status=status, iterations=it + 1, dyn_bumps=dyn_bumps)


def _trivial_result(prog: ConeProgram, presol: Presolution, settings: SolverSettings):
    x = presol.restore_x(np.zeros(0))
    y = presol.restore_y(np.zeros(0), prog, x)
    obj = prog.objective_constant + presol.objective_shift
    report = SolveReport(
        status=OPTIMAL, iterations=0, primal_residual=0.0, dual_residual=0.0,
        duality_gap=0.0, solve_seed=settings.seed,
        primal_objective=obj, dual_objective=obj,
    )
    return x, y, np.zeros(0), report


def _cone_duals(std: _StandardForm, z: np.ndarray) -> np.ndarray:
    """Duals of the declared cone memberships, concatenated in order."""
    parts = []
    for _, start, dim, scale in std.cone_dual_info:
        parts.append(scale * z[start:start + dim])
    return np.concatenate(parts) if parts else np.zeros(0)


def solve(prog: ConeProgram, settings: SolverSettings | None = None):
    """Solve a conic program.

    Returns ``(x, y, s, report)`` where ``x`` is the primal point, ``y``
    the equality duals, and ``s`` the duals of the declared cone
    memberships (concatenated in declaration order). For infeasible
    statuses the certifying ray is carried in ``y`` (primal infeasible)
    or ``x`` (dual infeasible).
    """
    settings = settings or SolverSettings()
    prog.validate()

    if settings.presolve:
        try:
            reduced, presol = presolve(prog)
        except ProvenInfeasible:
            report = SolveReport(
                status=PRIMAL_INFEASIBLE, iterations=0,
                primal_residual=np.inf, dual_residual=np.inf,
                duality_gap=np.inf, solve_seed=settings.seed,
            )
            return np.zeros(prog.n_vars), np.zeros(prog.n_eq), np.zeros(0), report
    else:
        reduced, presol = prog, Presolution(
            n_orig=prog.n_vars,
            kept_vars=np.arange(prog.n_vars),
            fixed_values={},
            kept_rows=np.arange(prog.n_eq),
            dropped_rows=np.array([], dtype=np.int64),
            folded_rows=[],
            objective_shift=0.0,
        )

    if reduced.n_vars == 0:
        return _trivial_result(prog, presol, settings)

    std = _StandardForm(reduced)
    raw: _RawResult | None = None
    attempt_settings = settings
    for attempt in range(settings.retries + 1):
        try:
            raw = _ipm(std, attempt_settings)
        except FloatingPointError:
            raw = None
        if raw is not None and raw.status != NUMERICAL_FAILURE:
            break
        attempt_settings = replace(
            attempt_settings,
            static_reg=attempt_settings.static_reg * 10.0,
            refine_passes=attempt_settings.refine_passes + 1,
        )
    if raw is None:
        raw = _RawResult(
            NUMERICAL_FAILURE, np.zeros(std.n), np.zeros(std.A.shape[0]),
            np.zeros(std.G.shape[0]), np.zeros(std.G.shape[0]), 0,
            np.inf, np.inf, np.inf, np.nan, np.nan, 0,
        )

    x_t, y_t, z_t, s_t = std.unscale(raw.x, raw.y, raw.z, raw.s)
    x_full = presol.restore_x(x_t)
    y_eq = y_t[: reduced.n_eq]
    y_full = presol.restore_y(y_eq, prog, x_full)
    s_out = _cone_duals(std, z_t)

    pres, dres, pobj, dobj = raw.pres, raw.dres, raw.pobj, raw.dobj
    if raw.status == OPTIMAL:
        # report residuals against the original (unequilibrated) data
        a0, g0, b0, c0, h0 = std.orig
        ry = a0 @ x_t - b0
        rz = g0 @ x_t + s_t - h0
        rx = a0.T @ y_t + g0.T @ z_t + c0
        pres = max(_norm_inf(ry), _norm_inf(rz)) / (1.0 + max(_norm_inf(b0), _norm_inf(h0)))
        dres = _norm_inf(rx) / (1.0 + _norm_inf(c0))
        pobj = float(c0 @ x_t) + std.constant
        dobj = -float(b0 @ y_t + h0 @ z_t) + std.constant

    report = SolveReport(
        status=raw.status,
        iterations=raw.iterations,
        primal_residual=pres,
        dual_residual=dres,
        duality_gap=raw.gap,
        solve_seed=settings.seed,
        primal_objective=pobj,
        dual_objective=dobj,
        dyn_reg_bumps=raw.dyn_bumps,
    )
    return x_full, y_full, s_out, report
