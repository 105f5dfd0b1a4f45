"""Cone kernels for the interior-point solver.

The slack cone is a product of a nonnegative orthant, second-order cones
t >= ||w||, and rotated quadratic cones 2uv >= ||w||^2 (u, v >= 0). The
rotated cone is handled natively: program data is never rewritten into
standard SOC rows. Internally its kernels reuse the second-order
formulas through the orthogonal involution

    (u, v, w) -> ((u+v)/sqrt(2), (u-v)/sqrt(2), w),

which maps the rotated cone onto the second-order cone without touching
conditioning (the map is orthogonal and its own inverse).

All scaling formulas follow the Nesterov-Todd construction for the spin
Jordan algebra: x o y = (x'y; x0*y1 + y0*x1), identity e = (1, 0, ...),
det(x) = x0^2 - ||x1||^2. The NT point w satisfies P(w) z = s with
P(w) = 2ww' - det(w)J, J = diag(1, -I), and the scaling matrix is
W = P(w^{1/2}), so W z = W^{-1} s =: lambda and W^2 = P(w).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SQRT1_2 = 1.0 / np.sqrt(2.0)


def _rotate(x: np.ndarray) -> np.ndarray:
    """Orthogonal involution carrying the rotated cone onto the SOC."""
    out = x.copy()
    out[0] = (x[0] + x[1]) * _SQRT1_2
    out[1] = (x[0] - x[1]) * _SQRT1_2
    return out


def _rotation_matrix(dim: int) -> np.ndarray:
    r = np.eye(dim)
    r[0, 0] = r[0, 1] = r[1, 0] = _SQRT1_2
    r[1, 1] = -_SQRT1_2
    return r


def _soc_det(x: np.ndarray) -> float:
    return (x[0] - np.linalg.norm(x[1:])) * (x[0] + np.linalg.norm(x[1:]))


def _soc_max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """sup { a >= 0 : x + a*dx in SOC } for strictly interior x."""
    c = _soc_det(x)
    if c <= 0.0:
        return 0.0
    a = dx[0] * dx[0] - float(dx[1:] @ dx[1:])
    b = 2.0 * (x[0] * dx[0] - float(x[1:] @ dx[1:]))
    if abs(a) < 1e-300:
        if b >= 0.0:
            return np.inf
        return -c / b
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return np.inf if a > 0.0 else 0.0
    sq = np.sqrt(disc)
    q = -0.5 * (b + np.copysign(sq, b)) if b != 0.0 else 0.5 * sq
    roots = []
    if q != 0.0:
        roots.append(q / a)
        roots.append(c / q)
    else:
        roots.append(0.0)
    pos = [r for r in roots if r > 0.0]
    return min(pos) if pos else np.inf


@dataclass
class _SocScaling:
    """NT scaling data for one SOC/RSOC block (in SOC coordinates)."""

    eta: float
    wbar: np.ndarray   # det(wbar) = 1
    ubar: np.ndarray   # ubar = wbar^{1/2}, det(ubar) = 1
    lam: np.ndarray    # scaled point, SOC coordinates

    def mult_w(self, v: np.ndarray) -> np.ndarray:
        # W v = eta * (2 ubar (ubar'v) - J v), J = diag(1, -I)
        out = v.copy()
        out[0] = -v[0]
        out += 2.0 * float(self.ubar @ v) * self.ubar
        return self.eta * out

    def mult_winv(self, v: np.ndarray) -> np.ndarray:
        # W^{-1} = eta^{-1} P(J ubar)
        q = self.ubar.copy()
        q[1:] *= -1.0
        out = v.copy()
        out[0] = -v[0]
        out += 2.0 * float(q @ v) * q
        return out / self.eta

    def w2_dense(self) -> np.ndarray:
        d = len(self.wbar)
        j = -np.eye(d)
        j[0, 0] = 1.0
        return (self.eta ** 2) * (2.0 * np.outer(self.wbar, self.wbar) - j)


def _soc_scaling(s: np.ndarray, z: np.ndarray) -> _SocScaling:
    rho_s = _soc_det(s)
    rho_z = _soc_det(z)
    if rho_s <= 0.0 or rho_z <= 0.0 or s[0] <= 0.0 or z[0] <= 0.0:
        raise FloatingPointError("NT scaling requested at a non-interior point")
    rho_s = np.sqrt(rho_s)
    rho_z = np.sqrt(rho_z)
    sb = s / rho_s
    zb = z / rho_z
    gamma = np.sqrt((1.0 + float(sb @ zb)) / 2.0)
    wbar = sb.copy()
    wbar[0] += zb[0]
    wbar[1:] -= zb[1:]
    wbar /= 2.0 * gamma
    eta = np.sqrt(rho_s / rho_z)
    ubar = wbar.copy()
    ubar[0] += 1.0
    ubar /= np.sqrt(2.0 * (wbar[0] + 1.0))
    scal = _SocScaling(eta=eta, wbar=wbar, ubar=ubar, lam=np.empty(0))
    scal.lam = scal.mult_w(z)
    return scal


def _soc_prod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = a[0] * b
    out[1:] += b[0] * a[1:]
    out[0] = float(a @ b)
    return out


def _soc_solve(lam: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Solve lam o u = d in the spin algebra."""
    det = _soc_det(lam)
    u0 = (lam[0] * d[0] - float(lam[1:] @ d[1:])) / det
    out = np.empty_like(d)
    out[0] = u0
    out[1:] = (d[1:] - u0 * lam[1:]) / lam[0]
    return out


@dataclass(frozen=True)
class _Block:
    kind: str       # "soc" | "rsoc"
    offset: int
    dim: int


class ConeLayout:
    """Product-cone layout over a slack vector of length ``size``.

    The leading ``n_nonneg`` entries form the orthant; SOC/RSOC blocks
    follow in declaration order. ``degree`` counts one per orthant entry
    and one per quadratic block, matching the complementarity measure
    mu = (s'z + tau*kappa) / (degree + 1).
    """

    def __init__(self, n_nonneg: int, blocks: list[tuple[str, int]]):
        self.n_nonneg = n_nonneg
        self.blocks: list[_Block] = []
        off = n_nonneg
        for kind, dim in blocks:
            if kind not in ("soc", "rsoc"):
                raise ValueError(f"unknown cone kind {kind!r}")
            if kind == "soc" and dim < 2:
                raise ValueError("soc block needs >= 2 entries")
            if kind == "rsoc" and dim < 3:
                raise ValueError("rsoc block needs >= 3 entries")
            self.blocks.append(_Block(kind, off, dim))
            off += dim
        self.size = off
        self.degree = n_nonneg + len(self.blocks)

    def _views(self, x: np.ndarray):
        for blk in self.blocks:
            yield blk, x[blk.offset:blk.offset + blk.dim]

    def identity(self) -> np.ndarray:
        e = np.zeros(self.size)
        e[: self.n_nonneg] = 1.0
        for blk in self.blocks:
            if blk.kind == "soc":
                e[blk.offset] = 1.0
            else:
                e[blk.offset] = _SQRT1_2
                e[blk.offset + 1] = _SQRT1_2
        return e

    def interior_margin(self, x: np.ndarray) -> float:
        """Positive iff x is strictly interior; smallest slack/determinant."""
        m = np.inf
        if self.n_nonneg:
            m = float(np.min(x[: self.n_nonneg]))
        for blk, xb in self._views(x):
            v = _rotate(xb) if blk.kind == "rsoc" else xb
            if v[0] <= 0:
                return min(m, float(v[0]))
            m = min(m, _soc_det(v))
        return m

    def max_step(self, x: np.ndarray, dx: np.ndarray) -> float:
        """sup { a >= 0 : x + a*dx in cone } for strictly interior x."""
        alpha = np.inf
        if self.n_nonneg:
            xs = x[: self.n_nonneg]
            ds = dx[: self.n_nonneg]
            neg = ds < 0.0
            if np.any(neg):
                alpha = float(np.min(-xs[neg] / ds[neg]))
        for blk, xb in self._views(x):
            db = dx[blk.offset:blk.offset + blk.dim]
            if blk.kind == "rsoc":
                xb = _rotate(xb)
                db = _rotate(db)
            alpha = min(alpha, _soc_max_step(xb, db))
        return alpha

    def jordan_prod(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = np.empty(self.size)
        nn = self.n_nonneg
        out[:nn] = a[:nn] * b[:nn]
        for blk in self.blocks:
            sl = slice(blk.offset, blk.offset + blk.dim)
            ab, bb = a[sl], b[sl]
            if blk.kind == "rsoc":
                out[sl] = _rotate(_soc_prod(_rotate(ab), _rotate(bb)))
            else:
                out[sl] = _soc_prod(ab, bb)
        return out

    def scaling(self, s: np.ndarray, z: np.ndarray) -> "Scaling":
        return Scaling(self, s, z)


class Scaling:
    """NT scaling of the product cone at an interior pair (s, z)."""

    def __init__(self, layout: ConeLayout, s: np.ndarray, z: np.ndarray):
        self.layout = layout
        nn = layout.n_nonneg
        if np.any(s[:nn] <= 0) or np.any(z[:nn] <= 0):
            raise FloatingPointError("NT scaling requested at a non-interior point")
        self._w = np.sqrt(s[:nn] / z[:nn])
        self._blocks: list[_SocScaling] = []
        lam = np.empty(layout.size)
        lam[:nn] = np.sqrt(s[:nn] * z[:nn])
        for blk in layout.blocks:
            sl = slice(blk.offset, blk.offset + blk.dim)
            sb, zb = s[sl], z[sl]
            if blk.kind == "rsoc":
                sb, zb = _rotate(sb), _rotate(zb)
            scal = _soc_scaling(sb, zb)
            self._blocks.append(scal)
            lam[sl] = _rotate(scal.lam) if blk.kind == "rsoc" else scal.lam
        self.lam = lam

    def _per_block(self, v: np.ndarray, op) -> np.ndarray:
        out = np.empty(self.layout.size)
        nn = self.layout.n_nonneg
        out[:nn] = op(None, v[:nn])
        for blk, scal in zip(self.layout.blocks, self._blocks):
            sl = slice(blk.offset, blk.offset + blk.dim)
            vb = v[sl]
            if blk.kind == "rsoc":
                out[sl] = _rotate(op(scal, _rotate(vb)))
            else:
                out[sl] = op(scal, vb)
        return out

    def mult_w(self, v: np.ndarray) -> np.ndarray:
        return self._per_block(
            v, lambda scal, vb: self._w * vb if scal is None else scal.mult_w(vb)
        )

    def mult_winv(self, v: np.ndarray) -> np.ndarray:
        return self._per_block(
            v, lambda scal, vb: vb / self._w if scal is None else scal.mult_winv(vb)
        )

    def lam_solve(self, d: np.ndarray) -> np.ndarray:
        """Solve lambda o u = d blockwise."""
        lam = self.lam

        def op(scal, db):
            if scal is None:
                return db / lam[: self.layout.n_nonneg]
            return _soc_solve(scal.lam, db)

        return self._per_block(d, op)

    def w2_diag_nonneg(self) -> np.ndarray:
        return self._w * self._w

    def w2_block(self, block_index: int) -> np.ndarray:
        """Dense W^2 for one SOC/RSOC block, in original coordinates."""
        blk = self.layout.blocks[block_index]
        dense = self._blocks[block_index].w2_dense()
        if blk.kind == "rsoc":
            r = _rotation_matrix(blk.dim)
            dense = r @ dense @ r
        return dense
