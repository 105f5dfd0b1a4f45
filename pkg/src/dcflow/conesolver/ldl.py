"""Sparse LDL^T factorization of symmetric quasi-definite matrices.

Up-looking row factorization over a fixed sparsity pattern: symbolic
analysis (elimination tree, column counts, fill-reducing permutation)
runs once, numeric refactorization runs per call. Quasi-definite
matrices admit LDL^T with a strictly diagonal D under any symmetric
permutation, so no pivoting is performed; a sign-aware dynamic
regularization floor guards against cancellation to zero pivots.

The input is the upper triangle in CSC form with every diagonal entry
structurally present and row indices sorted within each column.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

try:  # pragma: no cover - exercised implicitly
    from numba import njit as _njit

    def _jit(func):
        return _njit(cache=True)(func)

    NUMBA_AVAILABLE = True
except Exception:  # pragma: no cover
    def _jit(func):
        return func

    NUMBA_AVAILABLE = False


@_jit
def _etree_and_counts(n, Ap, Ai, parent, lnz, work):
    """Elimination tree and per-column counts of L for an upper CSC pattern."""
    for i in range(n):
        parent[i] = -1
        lnz[i] = 0
        work[i] = -1
    for j in range(n):
        work[j] = j
        for p in range(Ap[j], Ap[j + 1]):
            i = Ai[p]
            if i > j:
                return -1
            while work[i] != j:
                if parent[i] == -1:
                    parent[i] = j
                lnz[i] += 1
                work[i] = j
                i = parent[i]
    return 0


@_jit
def _factor(n, Ap, Ai, Ax, Lp, Li, Lx, D, Dinv, parent, signs, dyn_eps, dyn_reg,
            y_val, y_marker, y_idx, elim, l_next):
    """Numeric up-looking LDL^T. Returns the count of regularized pivots.

    Pivots whose magnitude collapses below dyn_eps (relative to the
    column's diagonal magnitude) are floored with their expected sign,
    which keeps element growth bounded on ill-conditioned late
    interior-point iterations; iterative refinement absorbs the
    perturbation.
    """
    n_bumped = 0
    for i in range(n):
        y_val[i] = 0.0
        y_marker[i] = 0
        l_next[i] = Lp[i]
    for k in range(n):
        nnz_y = 0
        dk = 0.0
        for p in range(Ap[k], Ap[k + 1]):
            b = Ai[p]
            if b == k:
                dk = Ax[p]
                continue
            y_val[b] = Ax[p]
            nxt = b
            if y_marker[nxt] == 0:
                y_marker[nxt] = 1
                elim[0] = nxt
                nnz_e = 1
                nxt = parent[nxt]
                while nxt != -1 and nxt < k:
                    if y_marker[nxt] == 1:
                        break
                    y_marker[nxt] = 1
                    elim[nnz_e] = nxt
                    nnz_e += 1
                    nxt = parent[nxt]
                while nnz_e > 0:
                    nnz_e -= 1
                    y_idx[nnz_y] = elim[nnz_e]
                    nnz_y += 1
        D[k] = dk
        for q in range(nnz_y - 1, -1, -1):
            c = y_idx[q]
            yv = y_val[c]
            end = l_next[c]
            for p in range(Lp[c], end):
                y_val[Li[p]] -= Lx[p] * yv
            lkc = yv * Dinv[c]
            Li[end] = k
            Lx[end] = lkc
            D[k] -= yv * lkc
            l_next[c] = end + 1
            y_val[c] = 0.0
            y_marker[c] = 0
        sk = signs[k]
        scale = abs(dk)
        if scale < 1.0:
            scale = 1.0
        if sk * D[k] < dyn_eps * scale:
            D[k] = sk * dyn_reg * scale
            n_bumped += 1
        Dinv[k] = 1.0 / D[k]
    return n_bumped


@_jit
def _solve(n, Lp, Li, Lx, Dinv, x):
    for j in range(n):
        xj = x[j]
        if xj != 0.0:
            for p in range(Lp[j], Lp[j + 1]):
                x[Li[p]] -= Lx[p] * xj
    for j in range(n):
        x[j] *= Dinv[j]
    for j in range(n - 1, -1, -1):
        acc = 0.0
        for p in range(Lp[j], Lp[j + 1]):
            acc += Lx[p] * x[Li[p]]
        x[j] -= acc


def rcm_permutation(n: int, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Reverse Cuthill-McKee ordering of the symmetrized pattern."""
    if n <= 1:
        return np.arange(n, dtype=np.int64)
    data = np.ones(len(rows) * 2)
    adj = sp.coo_matrix(
        (data, (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(n, n),
    ).tocsr()
    return np.asarray(reverse_cuthill_mckee(adj, symmetric_mode=True), dtype=np.int64)


class QuasiDefiniteLDL:
    """Pattern-fixed LDL^T with a precomputed fill-reducing permutation.

    Parameters
    ----------
    n : order of the matrix.
    rows, cols : COO coordinates of the upper triangle (i <= j), all
        diagonal entries present, no duplicates. The entry order defines
        the value layout accepted by :meth:`refactor`.
    signs : expected sign (+1/-1) of each pivot in the original ordering.
    perm : optional explicit permutation (new position -> old index);
        default is RCM on the symmetrized pattern.
    """

    def __init__(self, n, rows, cols, signs, perm=None):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if np.any(rows > cols):
            raise ValueError("pattern must be upper triangular (i <= j)")
        self.n = int(n)
        self.nnz = len(rows)
        if perm is None:
            perm = rcm_permutation(n, rows, cols)
        self.perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty(n, dtype=np.int64)
        inv[self.perm] = np.arange(n, dtype=np.int64)

        pr = inv[rows]
        pc = inv[cols]
        flip = pr > pc
        pr2 = np.where(flip, pc, pr)
        pc2 = np.where(flip, pr, pc)
        order = np.lexsort((pr2, pc2))
        # scatter maps original entry index -> slot in the permuted CSC data
        self._scatter = np.empty(self.nnz, dtype=np.int64)
        self._scatter[order] = np.arange(self.nnz, dtype=np.int64)

        sr = pr2[order]
        sc = pc2[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, sc + 1, 1)
        np.cumsum(indptr, out=indptr)
        self._Ap = indptr
        self._Ai = sr
        self._Ax = np.zeros(self.nnz)
        self._signs = np.asarray(signs, dtype=np.float64)[self.perm]

        parent = np.empty(n, dtype=np.int64)
        lnz = np.empty(n, dtype=np.int64)
        work = np.empty(n, dtype=np.int64)
        status = _etree_and_counts(n, self._Ap, self._Ai, parent, lnz, work)
        if status != 0:
            raise ValueError("pattern is not upper triangular after permutation")
        self._parent = parent
        self._Lp = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(lnz, out=self._Lp[1:])
        lnnz = int(self._Lp[-1])
        self._Li = np.zeros(lnnz, dtype=np.int64)
        self._Lx = np.zeros(lnnz)
        self._D = np.zeros(n)
        self._Dinv = np.zeros(n)
        self._y_val = np.zeros(n)
        self._y_marker = np.zeros(n, dtype=np.int64)
        self._y_idx = np.zeros(n, dtype=np.int64)
        self._elim = np.zeros(n, dtype=np.int64)
        self._l_next = np.zeros(n, dtype=np.int64)
        self.n_bumped = 0

    def refactor(self, values, dyn_eps: float = 1e-13, dyn_reg: float = 1e-13) -> None:
        """Recompute the numeric factor for new values on the fixed pattern."""
        self._Ax[self._scatter] = values
        self.n_bumped = int(
            _factor(
                self.n, self._Ap, self._Ai, self._Ax,
                self._Lp, self._Li, self._Lx, self._D, self._Dinv,
                self._parent, self._signs, dyn_eps, dyn_reg,
                self._y_val, self._y_marker, self._y_idx, self._elim,
                self._l_next,
            )
        )
        if not np.all(np.isfinite(self._D)):
            raise FloatingPointError("LDL factorization produced non-finite pivots")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = np.asarray(rhs, dtype=np.float64)[self.perm].copy()
        _solve(self.n, self._Lp, self._Li, self._Lx, self._Dinv, x)
        out = np.empty_like(x)
        out[self.perm] = x
        return out
