import numpy as np
import pytest

from dcflow.conesolver.cones import ConeLayout


def random_interior(layout, rng, scale=1.0):
    """Random strictly interior point of the product cone."""
    x = np.empty(layout.size)
    x[: layout.n_nonneg] = scale * (0.1 + rng.random(layout.n_nonneg))
    for blk in layout.blocks:
        w = rng.standard_normal(blk.dim - 1) if blk.kind == "soc" else rng.standard_normal(blk.dim - 2)
        if blk.kind == "soc":
            x[blk.offset] = scale * (np.linalg.norm(w) + 0.2 + rng.random())
            x[blk.offset + 1:blk.offset + blk.dim] = w
        else:
            u = scale * (0.2 + rng.random())
            nrm = np.linalg.norm(w)
            v = (nrm * nrm) / u + scale * (0.2 + rng.random())
            x[blk.offset] = u
            x[blk.offset + 1] = v
            x[blk.offset + 2:blk.offset + blk.dim] = w
    return x


LAYOUTS = [
    ConeLayout(4, []),
    ConeLayout(0, [("soc", 3)]),
    ConeLayout(0, [("rsoc", 3)]),
    ConeLayout(3, [("soc", 4), ("rsoc", 5), ("rsoc", 3)]),
]


@pytest.mark.parametrize("layout", LAYOUTS)
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_nt_scaling_identities(layout, seed):
    rng = np.random.default_rng(seed)
    s = random_interior(layout, rng)
    z = random_interior(layout, rng, scale=2.0)
    scal = layout.scaling(s, z)
    # defining property: W z = W^{-1} s = lambda
    assert np.allclose(scal.mult_w(z), scal.lam, rtol=1e-12, atol=1e-12)
    assert np.allclose(scal.mult_winv(s), scal.lam, rtol=1e-11, atol=1e-12)
    # W^{-1} inverts W
    v = rng.standard_normal(layout.size)
    assert np.allclose(scal.mult_winv(scal.mult_w(v)), v, rtol=1e-11, atol=1e-12)
    # lambda' lambda = s'z
    assert np.isclose(float(scal.lam @ scal.lam), float(s @ z), rtol=1e-12)


@pytest.mark.parametrize("layout", LAYOUTS)
def test_w2_blocks_match_operator(layout):
    rng = np.random.default_rng(5)
    s = random_interior(layout, rng)
    z = random_interior(layout, rng)
    scal = layout.scaling(s, z)
    v = rng.standard_normal(layout.size)
    w2v = scal.mult_w(scal.mult_w(v))
    nn = layout.n_nonneg
    assert np.allclose(w2v[:nn], scal.w2_diag_nonneg() * v[:nn], rtol=1e-11)
    for bi, blk in enumerate(layout.blocks):
        sl = slice(blk.offset, blk.offset + blk.dim)
        assert np.allclose(scal.w2_block(bi) @ v[sl], w2v[sl], rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("layout", LAYOUTS)
def test_identity_and_jordan(layout):
    rng = np.random.default_rng(11)
    e = layout.identity()
    assert layout.interior_margin(e) > 0
    a = random_interior(layout, rng)
    # e is the Jordan identity
    assert np.allclose(layout.jordan_prod(a, e), a, rtol=1e-12)
    # lam_solve inverts the product by lam
    s = random_interior(layout, rng)
    z = random_interior(layout, rng)
    scal = layout.scaling(s, z)
    d = rng.standard_normal(layout.size)
    u = scal.lam_solve(d)
    assert np.allclose(layout.jordan_prod(scal.lam, u), d, rtol=1e-10, atol=1e-11)


@pytest.mark.parametrize("layout", LAYOUTS)
def test_max_step(layout):
    rng = np.random.default_rng(3)
    x = random_interior(layout, rng)
    d = rng.standard_normal(layout.size)
    alpha = layout.max_step(x, d)
    if np.isfinite(alpha):
        assert layout.interior_margin(x + 0.999 * alpha * d) > 0
        assert layout.interior_margin(x + 1.01 * alpha * d + 1e-9 * np.abs(d)) <= 1e-6
    # a direction inside the cone is never blocking
    assert layout.max_step(x, x) == np.inf
