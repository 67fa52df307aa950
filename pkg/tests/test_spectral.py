import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_real, random_solenoidal
from oldroyd import spectral as sp


def test_grid_validation():
    with pytest.raises(ValueError):
        sp.Grid(4, 32)
    with pytest.raises(ValueError):
        sp.Grid(2, 24)
    with pytest.raises(ValueError):
        sp.Grid(2, 8)
    g = sp.Grid(3, 16)
    assert g.shape == (16, 16, 16)
    assert g.cutoff == 5


def test_get_grid_is_shared():
    assert sp.get_grid(2, 32) is sp.get_grid(2, 32)


def test_transform_roundtrip(grid2):
    rng = np.random.default_rng(1)
    f = rng.standard_normal(grid2.shape)
    assert np.allclose(sp.inverse_transform(grid2, sp.transform(grid2, f)), f, atol=1e-14)


def test_constant_field_single_coefficient(grid2):
    f_hat = sp.transform(grid2, np.ones(grid2.shape))
    assert f_hat[0, 0] == pytest.approx(1.0)
    assert np.sum(np.abs(f_hat)) == pytest.approx(1.0)


def test_l2_norm_matches_quadrature(grid2):
    f = np.sin(grid2.x[0]) * np.cos(2 * grid2.x[1])
    exact = math.sqrt(math.pi**2)  # int sin^2 cos^2 over the torus = pi^2
    assert sp.l2_norm(grid2, sp.transform(grid2, f)) == pytest.approx(exact, rel=1e-13)


def test_shape_mismatch_rejected(grid2):
    with pytest.raises(ValueError):
        sp.inverse_transform(grid2, np.zeros((16, 16), complex))


def test_partial_derivative_of_sine(grid2):
    x = grid2.x
    f = sp.transform(grid2, np.sin(3 * x[0] + x[1]))
    d0 = sp.inverse_transform(grid2, sp.partial_derivative(grid2, f, 0))
    assert np.allclose(d0, 3 * np.cos(3 * x[0] + x[1]), atol=1e-12)
    with pytest.raises(ValueError):
        sp.partial_derivative(grid2, f, 2)


def test_gradient_index_layout(grid3):
    f = random_real(grid3, (3,), seed=2)
    g = sp.gradient(grid3, f)
    assert g.shape == (3, 3) + grid3.shape
    assert np.allclose(g[1, 2], sp.partial_derivative(grid3, f[1], 2))


def test_laplacian_is_div_grad(grid2):
    f = random_real(grid2, seed=3)
    assert np.allclose(sp.divergence(grid2, sp.gradient(grid2, f)), sp.laplacian(grid2, f), atol=1e-12)


@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
def test_leray_projection_properties(seed, dim):
    grid = sp.get_grid(dim, 16)
    u = random_real(grid, (dim,), seed)
    p = sp.leray_project(grid, u)
    assert sp.l2_norm(grid, sp.divergence(grid, p)) <= 1e-12 * max(1.0, sp.l2_norm(grid, u))
    assert np.allclose(sp.leray_project(grid, p), p, atol=1e-14)
    assert sp.l2_norm(grid, p) <= sp.l2_norm(grid, u) * (1 + 1e-14)


def test_leray_keeps_mean(grid2):
    u = np.zeros((2,) + grid2.shape, complex)
    u[:, 0, 0] = [1.0, -2.0]
    assert np.array_equal(sp.leray_project(grid2, u), u)


def test_lambda_power_and_gauge(grid2):
    f = random_real(grid2, seed=4)
    back = sp.lambda_power(grid2, sp.lambda_power(grid2, f, 1.5), -1.5)
    assert np.allclose(back, f, atol=1e-13)
    with_mean = f.copy()
    with_mean[0, 0] = 1.0
    with pytest.raises(ValueError):
        sp.lambda_power(grid2, with_mean, -1.0)
    assert np.array_equal(sp.lambda_power(grid2, with_mean, 0), with_mean)


def test_riesz_sum_of_squares_is_minus_identity(grid2):
    f = random_real(grid2, seed=5)
    total = sum(sp.riesz(grid2, sp.riesz(grid2, f, j), j) for j in range(2))
    assert np.allclose(total, -f, atol=1e-13)


def test_dealiased_product_exact_inside_band(grid2):
    x = grid2.x
    a = sp.transform(grid2, np.cos(3 * x[0]))
    b = sp.transform(grid2, np.sin(4 * x[1]))
    prod = sp.pointwise_product(grid2, a, b)
    assert np.allclose(sp.inverse_transform(grid2, prod), np.cos(3 * x[0]) * np.sin(4 * x[1]), atol=1e-14)


def test_dealias_mask_two_thirds():
    g = sp.get_grid(2, 64)
    assert np.all(np.abs(g.k[:, g.dealias_mask]) <= 21)
    assert g.dealias_mask[21, 0] and not g.dealias_mask[22, 0]


def test_det_identity_and_3d(grid3):
    E = np.zeros((3, 3) + grid3.shape, complex)
    assert np.allclose(sp.det_I_plus_E(grid3, E), 1.0)
    rng = np.random.default_rng(0)
    m = rng.standard_normal((3, 3)) * 0.1
    E[(slice(None), slice(None), 0, 0, 0)] = m
    assert np.allclose(sp.det_I_plus_E(grid3, E), np.linalg.det(np.eye(3) + m), atol=1e-14)


def test_dilate_moves_modes(grid2):
    x = grid2.x
    f = sp.transform(grid2, np.sin(x[0] + 2 * x[1]))
    f2 = sp.dilate(grid2, f, 2)
    assert np.allclose(sp.inverse_transform(grid2, f2), np.sin(2 * x[0] + 4 * x[1]), atol=1e-14)
    big = sp.transform(grid2, np.sin(8 * x[0]))
    with pytest.raises(ValueError):
        sp.dilate(grid2, big, 2)


def test_advect_constant_velocity_is_derivative(grid2):
    f = random_real(grid2, seed=6, band=(1, 8))
    u = np.zeros((2,) + grid2.shape, complex)
    u[0, 0, 0] = 2.0
    assert np.allclose(sp.advect(grid2, u, f), 2.0 * sp.partial_derivative(grid2, f, 0), atol=1e-13)


def test_advection_skew_symmetric(grid2):
    u = random_solenoidal(grid2, seed=7)
    f = random_real(grid2, seed=8, band=(1, 6))
    inner = np.sum(np.conj(f) * sp.advect(grid2, u, f)).real
    assert abs(inner) <= 1e-14 * sp.l2_norm(grid2, f) ** 2 * sp.linf_norm(grid2, u) * 10
