import numpy as np
import pytest
import scipy.sparse as sp

from dcflow.conesolver.ldl import QuasiDefiniteLDL, rcm_permutation


def random_quasi_definite(n_pos, n_neg, density, rng):
    """Random symmetric quasi-definite matrix: SPD top-left, SND bottom-right."""
    n = n_pos + n_neg
    m = sp.random(n, n, density=density, random_state=rng, format="csc")
    m = (m + m.T) * 0.5
    d = np.concatenate([np.full(n_pos, 5.0), np.full(n_neg, -5.0)])
    m = m + sp.diags(d)
    return m.tocsc()


def upper_coo(m):
    coo = sp.triu(m, format="coo")
    return coo.row, coo.col, coo.data


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_factor_solve_matches_dense(seed):
    rng = np.random.default_rng(seed)
    n_pos, n_neg = 17, 12
    m = random_quasi_definite(n_pos, n_neg, 0.15, rng)
    rows, cols, vals = upper_coo(m)
    signs = np.concatenate([np.ones(n_pos), -np.ones(n_neg)])
    ldl = QuasiDefiniteLDL(n_pos + n_neg, rows, cols, signs)
    ldl.refactor(vals)
    rhs = rng.standard_normal(n_pos + n_neg)
    x = ldl.solve(rhs)
    x_ref = np.linalg.solve(m.toarray(), rhs)
    assert np.allclose(x, x_ref, rtol=1e-9, atol=1e-10)


def test_refactor_updates_values():
    rng = np.random.default_rng(7)
    m = random_quasi_definite(6, 5, 0.3, rng)
    rows, cols, vals = upper_coo(m)
    signs = np.concatenate([np.ones(6), -np.ones(5)])
    ldl = QuasiDefiniteLDL(11, rows, cols, signs)
    ldl.refactor(vals)
    rhs = rng.standard_normal(11)
    x1 = ldl.solve(rhs)
    # scale all values; solution scales inversely
    ldl.refactor(2.0 * vals)
    x2 = ldl.solve(rhs)
    assert np.allclose(x2, 0.5 * x1, rtol=1e-10)


def test_identity_permutation_ok():
    n = 5
    rows = np.arange(n)
    cols = np.arange(n)
    vals = np.array([2.0, 3.0, -4.0, -1.0, -2.0])
    ldl = QuasiDefiniteLDL(n, rows, cols, np.array([1, 1, -1, -1, -1.0]),
                           perm=np.arange(n))
    ldl.refactor(vals)
    rhs = np.ones(n)
    assert np.allclose(ldl.solve(rhs), 1.0 / vals)


def test_rcm_is_deterministic():
    rng = np.random.default_rng(3)
    m = random_quasi_definite(10, 10, 0.2, rng)
    rows, cols, _ = upper_coo(m)
    p1 = rcm_permutation(20, rows, cols)
    p2 = rcm_permutation(20, rows, cols)
    assert np.array_equal(p1, p2)


def test_dynamic_regularization_reports_bumps():
    # a zero pivot on the diagonal forces a sign-aware bump
    rows = np.array([0, 0, 1])
    cols = np.array([0, 1, 1])
    vals = np.array([1.0, 1.0, 0.0])  # second pivot would be -1 after update; fine
    ldl = QuasiDefiniteLDL(2, rows, cols, np.array([1.0, -1.0]), perm=np.arange(2))
    ldl.refactor(vals)
    assert ldl.n_bumped == 0
    # now make the trailing block exactly cancel
    vals = np.array([1.0, 1.0, 1.0])  # D2 = 1 - 1 = 0 -> bump
    ldl.refactor(vals)
    assert ldl.n_bumped == 1
