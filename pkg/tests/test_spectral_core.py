import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.models import RealField
from src.spectral_core import (
    dealiased_product,
    from_function,
    hs_norm,
    make_grid,
    random_band_limited,
    spectral_derivative,
    spectral_integral,
    to_physical,
    to_spectral,
    translate,
)


@pytest.mark.parametrize("n, length", [(12, 1.0), (4, 1.0), (64, 0.0), (64, -2.0)])
def test_make_grid_rejects_bad_shapes(n, length):
    with pytest.raises(ValueError):
        make_grid(n, length)


def test_transform_round_trip(grid, rng):
    values = rng.standard_normal(grid.n)
    back = to_physical(to_spectral(RealField(values, grid)))
    assert_allclose(back.values, values, atol=1e-12)


def test_coefficients_are_averaged(grid):
    field = from_function(grid, lambda x: 3.0 + np.cos(5 * grid.dxi * x))
    assert field.coeffs[0] == pytest.approx(3.0)
    assert field.coeffs[5] == pytest.approx(0.5)
    assert field.coeffs[-5] == pytest.approx(0.5)


@pytest.mark.parametrize("s", [-1.75, 0.0, 1.0])
def test_hs_norm_of_single_cosine(grid, s):
    k = 7
    xi = k * grid.dxi
    field = from_function(grid, lambda x: np.cos(xi * x))
    expected = np.sqrt(grid.box_length / 2.0 * (1.0 + xi) ** (2 * s))
    assert hs_norm(field, s) == pytest.approx(expected, rel=1e-12)


def test_l2_norm_matches_physical_integral(grid, rng):
    field = random_band_limited(grid, 20, rng)
    values = to_physical(field).values
    assert hs_norm(field, 0.0) == pytest.approx(np.sqrt(grid.box_length * np.mean(values ** 2)), rel=1e-12)


def test_spectral_derivative_of_sine(grid):
    xi = 3 * grid.dxi
    field = from_function(grid, lambda x: np.sin(xi * x))
    derivative = to_physical(spectral_derivative(field, 1)).values
    assert_allclose(derivative, xi * np.cos(xi * grid.x), atol=1e-12)
    second = to_physical(spectral_derivative(field, 2)).values
    assert_allclose(second, -xi ** 2 * np.sin(xi * grid.x), atol=1e-12)


def test_spectral_derivative_drops_nyquist(grid):
    coeffs = np.zeros(grid.n, dtype=complex)
    coeffs[grid.nyquist_index] = 1.0
    field = to_spectral(RealField(np.real(np.fft.ifft(coeffs) * grid.n), grid))
    assert_allclose(spectral_derivative(field, 1).coeffs, 0.0, atol=1e-12)


def test_translate_shifts_profile(grid):
    xi = 2 * grid.dxi
    shift = 1.3
    field = from_function(grid, lambda x: np.cos(xi * x))
    moved = to_physical(translate(field, shift)).values
    assert_allclose(moved, np.cos(xi * (grid.x - shift)), atol=1e-12)


def test_random_band_limited_is_real_and_mean_free(grid, rng):
    field = random_band_limited(grid, 10, rng)
    assert field.is_conjugate_symmetric()
    assert field.coeffs[0] == 0
    assert np.all(field.coeffs[11:grid.n - 10] == 0)


def test_random_band_limited_rejects_large_cutoff(grid, rng):
    with pytest.raises(ValueError):
        random_band_limited(grid, grid.n // 2, rng)


@pytest.mark.parametrize("factors", [2, 3])
def test_dealiased_product_is_exact_for_band_limited_inputs(grid, rng, factors):
    fields = [random_band_limited(grid, grid.n // 8, rng) for _ in range(factors)]
    exact = np.prod([to_physical(f).values for f in fields], axis=0)
    product = dealiased_product(*fields)
    assert_allclose(to_physical(product).values, exact, atol=1e-12)


def test_dealiased_product_drops_aliased_modes():
    grid = make_grid(16, 2.0 * np.pi)
    field = from_function(grid, lambda x: np.cos(6 * x))
    product = dealiased_product(field, field)
    # cos^2 = 1/2 + cos(12x)/2 and mode 12 is above the grid's band
    assert product.coeffs[0] == pytest.approx(0.5)
    assert_allclose(np.abs(product.coeffs[1:]), 0.0, atol=1e-14)


def test_spectral_integral_powers(grid):
    xi = 4 * grid.dxi
    field = from_function(grid, lambda x: 1.0 + np.cos(xi * x))
    L = grid.box_length
    assert spectral_integral(field, 2) == pytest.approx(1.5 * L, rel=1e-12)
    assert spectral_integral(field, 3) == pytest.approx(2.5 * L, rel=1e-12)
    cosine = from_function(grid, lambda x: np.cos(xi * x))
    assert spectral_integral(cosine, 4) == pytest.approx(3.0 * L / 8.0, rel=1e-12)
