import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import cameraman, quadrants
from lcs.errors import DimensionError, DivergenceError
from lcs.imaging import Image
from lcs.metrics import psnr
from lcs.sampling import encode_image, generate_matrix
from lcs.tvsolver import (
    GradientField,
    LineOperator,
    SolverConfig,
    al_x_gradient,
    al_x_value,
    grad,
    grad_adjoint,
    initialize,
    reconstruct,
    shrink,
    tv,
)

SQUARE = [0.0, 1.0, 2.0, 3.0]  # [[0, 1], [2, 3]]


def assert_monotone(trace, rel=1e-6):
    for prev, cur in zip(trace[1:], trace[2:]):
        assert cur <= prev + rel * abs(prev), (prev, cur)


# -- gradient ---------------------------------------------------------------------


def test_grad_constant():
    g = grad(np.full(12, 7.0), 3, 4)
    assert not g.dx.any() and not g.dy.any()


def test_grad_2x2():
    g = grad(SQUARE, 2, 2)
    assert g.dx.tolist() == [[1, 0], [1, 0]]
    assert g.dy.tolist() == [[2, 2], [0, 0]]


def test_grad_ramp():
    g = grad(np.arange(6.0), 1, 6)
    assert g.dx.tolist() == [[1, 1, 1, 1, 1, 0]]
    assert not g.dy.any()


def test_grad_boundary_zero(rng):
    g = grad(rng.standard_normal(30), 5, 6)
    assert not g.dx[:, -1].any()
    assert not g.dy[-1, :].any()


def test_grad_dimension_mismatch():
    with pytest.raises(DimensionError):
        grad(np.zeros(5), 2, 2)


def test_adjoint_zero():
    z = np.zeros((3, 4))
    assert not grad_adjoint(GradientField(z, z)).any()


def test_adjoint_delta():
    dx = np.zeros((4, 5))
    dx[1, 2] = 1.0
    out = grad_adjoint(GradientField(dx, np.zeros((4, 5)))).reshape(4, 5)
    expected = np.zeros((4, 5))
    expected[1, 2], expected[1, 3] = -1.0, 1.0
    assert np.array_equal(out, expected)


def test_adjoint_identity_5x7(rng):
    for _ in range(20):
        x = rng.standard_normal(35)
        dx, dy = rng.standard_normal((2, 5, 7))
        g = grad(x, 5, 7)
        lhs = np.vdot(g.dx, dx) + np.vdot(g.dy, dy)
        rhs = np.vdot(x, grad_adjoint(GradientField(dx, dy)))
        assert abs(lhs - rhs) < 1e-10


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_adjoint_identity_property(rows, cols, seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal(rows * cols)
    dx, dy = r.standard_normal((2, rows, cols))
    g = grad(x, rows, cols)
    lhs = np.vdot(g.dx, dx) + np.vdot(g.dy, dy)
    rhs = np.vdot(x, grad_adjoint(GradientField(dx, dy)))
    scale = np.linalg.norm(x) * math.hypot(np.linalg.norm(dx), np.linalg.norm(dy)) + 1
    assert abs(lhs - rhs) < 1e-10 * scale


def test_adjoint_shape_mismatch():
    with pytest.raises(DimensionError):
        grad_adjoint(GradientField(np.zeros((2, 3)), np.zeros((3, 2))))


# -- TV and shrinkage -------------------------------------------------------------


@pytest.mark.parametrize("flavor", ["anisotropic", "isotropic"])
def test_tv_constant(flavor):
    assert tv(np.full(9, 3.0), 3, 3, flavor) == 0.0


def test_tv_2x2_anisotropic():
    assert tv(SQUARE, 2, 2, "anisotropic") == 6.0


def test_tv_2x2_isotropic():
    # sqrt(1^2 + 2^2) + sqrt(0 + 2^2) + sqrt(1^2 + 0)
    assert tv(SQUARE, 2, 2, "isotropic") == pytest.approx(math.sqrt(5) + 3, abs=1e-12)


def test_tv_dimension_mismatch():
    with pytest.raises(DimensionError):
        tv(np.zeros(3), 2, 2)


@given(
    st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1),
    st.floats(-1e3, 1e3), st.sampled_from(["anisotropic", "isotropic"]),
)
@settings(max_examples=80, deadline=None)
def test_tv_nonnegative_and_shift_invariant(rows, cols, seed, c, flavor):
    x = np.random.default_rng(seed).uniform(0, 255, rows * cols)
    t = tv(x, rows, cols, flavor)
    assert t >= 0.0
    assert tv(x + c, rows, cols, flavor) == pytest.approx(t, rel=1e-9, abs=1e-6)
    if rows * cols > 1:
        assert t > 0.0  # random data is not constant


def test_shrink_examples():
    assert shrink(0.0, 1.0) == 0.0
    assert shrink(3.0, 1.0) == 2.0
    assert shrink(-0.5, 1.0) == 0.0
    assert shrink(-3.0, 1.0) == -2.0


def test_shrink_isotropic():
    v = np.array([[3.0, 0.0], [4.0, 0.0]])  # pairs (3, 4) and (0, 0)
    out = shrink(v, 1.0, "isotropic")
    assert out[:, 0] == pytest.approx([2.4, 3.2])
    assert not out[:, 1].any()


def test_shrink_threshold_must_be_positive():
    with pytest.raises(ValueError):
        shrink(1.0, 0.0)


# -- initialisation ----------------------------------------------------------------


def test_initialize_zero():
    s = encode_image(Image(np.zeros((8, 8))), 0.5, 1)
    assert not initialize(s).any()


def test_initialize_full_rate_exact(rng):
    img = Image(rng.uniform(0, 255, (8, 8)))
    s = encode_image(img, 1.0, 1)
    assert np.abs(initialize(s) - img.flat()).max() < 1e-10


def test_initialize_matches_dense_oracle(rng):
    img = Image(rng.uniform(0, 255, (8, 8)))
    s = encode_image(img, 0.5, 4)
    phi = s.matrix().entries
    oracle = np.concatenate([phi.T @ (phi @ row) for row in img.pixels])
    assert np.abs(initialize(s) - oracle).max() < 1e-10


def test_initialize_header_mismatch():
    s = encode_image(Image(np.zeros((8, 8))), 0.5, 1)
    with pytest.raises(DimensionError):
        initialize(s, generate_matrix(0.5, 4, 1))


# -- X-subproblem gradient check ---------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_al_gradient_matches_finite_differences(seed):
    r = np.random.default_rng(seed)
    phi = generate_matrix(0.6, 5, seed)
    op = LineOperator(phi.entries, 5, 5)
    u = r.uniform(0, 1, (5, 5))
    y = r.standard_normal((5, phi.m))
    target = r.standard_normal((2, 5, 5))
    lam, beta = 10.0, 3.0
    g = al_x_gradient(u, op, y, target, lam, beta)
    h = 1e-5
    fd = np.zeros_like(u)
    for idx in np.ndindex(u.shape):
        e = np.zeros_like(u)
        e[idx] = h
        fd[idx] = (al_x_value(u + e, op, y, target, lam, beta)
                   - al_x_value(u - e, op, y, target, lam, beta)) / (2 * h)
    assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(fd)


# -- reconstruction ----------------------------------------------------------------


def test_config_validation():
    for bad in (dict(lam=0), dict(beta=-1), dict(tol=0), dict(max_outer=0),
                dict(tv_flavor="l2")):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_full_rate_reconstruction(rng):
    img = Image(rng.uniform(0, 255, (16, 16)))
    rec, state = reconstruct(encode_image(img, 1.0, 2))
    assert psnr(img, rec) > 60
    assert_monotone(state.objective_trace)


def test_piecewise_constant_recovery():
    img = quadrants(64)
    rec, state = reconstruct(encode_image(img, 0.5, 1))
    assert psnr(img, rec) > 40
    assert state.converged
    assert_monotone(state.objective_trace)


def test_isotropic_flavor_recovers():
    img = quadrants(32)
    rec, state = reconstruct(encode_image(img, 0.5, 1), SolverConfig(tv_flavor="isotropic"))
    assert psnr(img, rec) > 40
    assert_monotone(state.objective_trace)


def test_output_clamped_and_sized(camera64):
    rec, state = reconstruct(encode_image(camera64, 0.1, 0), SolverConfig(max_outer=20))
    assert rec.shape == (64, 64)
    assert rec.pixels.min() >= 0 and rec.pixels.max() <= 255
    assert state.x.shape == (64 * 64,)
    assert len(state.objective_trace) == state.iterations <= 20


def test_max_outer_respected(camera64):
    _, state = reconstruct(encode_image(camera64, 0.3, 0), SolverConfig(max_outer=1))
    assert state.iterations == 1 and len(state.objective_trace) == 1


def test_supplied_matrix_equals_regenerated(camera64):
    s = encode_image(camera64, 0.2, 5)
    a, _ = reconstruct(s, SolverConfig(max_outer=15))
    b, _ = reconstruct(s, SolverConfig(max_outer=15), matrix=s.matrix())
    assert a == b


def test_deterministic(camera64):
    s = encode_image(camera64, 0.2, 5)
    a, sa = reconstruct(s, SolverConfig(max_outer=30))
    b, sb = reconstruct(s, SolverConfig(max_outer=30))
    assert a.pixels.tobytes() == b.pixels.tobytes()
    assert sa.objective_trace == sb.objective_trace


def test_divergence_guard():
    s = encode_image(quadrants(8), 0.5, 1)
    phi = s.matrix().entries.copy()
    phi[0, 0] = np.inf
    with pytest.raises(DivergenceError) as info:
        reconstruct(s, matrix=phi)
    assert info.value.iteration == 1


@pytest.mark.parametrize("img,rate,seed", [
    (quadrants(32), 0.3, 0),
    (cameraman(32), 0.2, 1),
    (cameraman(32), 0.5, 2),
])
def test_final_residual_small(img, rate, seed):
    s = encode_image(img, rate, seed)
    _, state = reconstruct(s)
    op = LineOperator(s.matrix().entries, *img.shape)
    resid = np.linalg.norm(op.forward(state.x.reshape(img.shape)) - s.measurements)
    assert resid <= 1e-3 * np.linalg.norm(s.measurements)


@given(st.integers(0, 2**32 - 1), st.sampled_from([8, 12, 16]),
       st.floats(0.2, 1.0), st.sampled_from(["anisotropic", "isotropic"]))
@settings(max_examples=15, deadline=None)
def test_objective_trace_monotone_property(seed, n, rate, flavor):
    img = Image(np.random.default_rng(seed).uniform(0, 255, (n, n)))
    _, state = reconstruct(encode_image(img, rate, seed),
                           SolverConfig(max_outer=60, tv_flavor=flavor))
    assert all(math.isfinite(v) for v in state.objective_trace)
    assert_monotone(state.objective_trace)


@pytest.mark.parametrize("img", [quadrants(32), cameraman(32)], ids=["quadrants", "camera"])
def test_psnr_grows_with_rate(img):
    rates = [0.1, 0.2, 0.3, 0.5]
    values = [psnr(img, reconstruct(encode_image(img, r, 3))[0]) for r in rates]
    for lo, hi in zip(values, values[1:]):
        assert hi >= lo - 0.5, values
