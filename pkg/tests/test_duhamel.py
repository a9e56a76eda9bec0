import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.duhamel import (
    bump_psi,
    contraction_factor,
    duhamel_bilinear,
    duhamel_integral,
    duhamel_map,
    free_evolution,
    lipschitz_data_dependence,
    linear_constant,
    picard_iterate,
    time_lattice,
    xsb_distance,
    zero_trajectory,
)
from src.exceptions import DivergenceError
from src.models import CutoffSpec, NormSpec, SpectralField, Trajectory
from src.propagator import solve
from src.seeding import keyed_rng
from src.spectral_core import hs_norm, random_band_limited

NORM = NormSpec(0.0, 0.6)


@pytest.fixture
def cutoff():
    return CutoffSpec(0.0625, 128)


@pytest.fixture
def datum(grid):
    return random_band_limited(grid, 8, keyed_rng(7, "duhamel_datum"))


def test_bump_profile():
    assert bump_psi(0.0) == 1.0
    assert bump_psi(0.5) == 1.0
    assert bump_psi(-0.3) == 1.0
    assert bump_psi(1.0) == 0.0
    assert bump_psi(2.5) == 0.0
    t = np.linspace(0.5, 1.0, 50)
    values = bump_psi(t)
    assert np.all(np.diff(values) <= 0)
    assert_allclose(bump_psi(-t), values)
    assert isinstance(bump_psi(0.75), float)


def test_time_lattice_contains_origin(cutoff):
    times = time_lattice(cutoff)
    assert len(times) == cutoff.n_time
    assert times[0] == -cutoff.delta
    assert times[cutoff.n_time // 2] == pytest.approx(0.0, abs=1e-15)
    assert_allclose(np.diff(times), cutoff.dt)


@pytest.mark.parametrize("delta, n_time", [(0.0, 64), (-1.0, 64), (0.1, 63)])
def test_cutoff_validation(delta, n_time):
    with pytest.raises(ValueError):
        CutoffSpec(delta, n_time)


@pytest.mark.parametrize("power", [0, 1, 2])
def test_duhamel_integral_is_exact_for_polynomial_forcing(datum, cutoff, kawahara, power):
    # F(t) = t^power W(t) f gives int_0^t W(t - t') F dt' = t^(power+1)/(power+1) W(t) f
    times = time_lattice(cutoff)
    free = free_evolution(datum, cutoff, kawahara)
    forcing = Trajectory.from_array(times, free.coeffs * (times ** power)[:, None], datum.grid, kawahara)
    result = duhamel_integral(forcing, cutoff, kawahara)
    expected = (bump_psi(times / cutoff.delta) * times ** (power + 1) / (power + 1))[:, None] * free.coeffs
    assert_allclose(result.coeffs, expected, atol=1e-13)


def test_duhamel_integral_rejects_foreign_lattice(datum, cutoff, kawahara):
    other = free_evolution(datum, CutoffSpec(0.125, 128), kawahara)
    with pytest.raises(ValueError):
        duhamel_integral(other, cutoff, kawahara)


def test_duhamel_integral_rejects_coarse_lattice(datum, kawahara):
    coarse = CutoffSpec(0.0625, 16)
    with pytest.raises(ValueError):
        duhamel_integral(free_evolution(datum, coarse, kawahara), coarse, kawahara)


def test_duhamel_map_of_zero_is_the_windowed_free_flow(datum, cutoff, kawahara):
    image = duhamel_map(zero_trajectory(datum, cutoff, kawahara), datum, cutoff, kawahara)
    assert_allclose(image.coeffs, free_evolution(datum, cutoff, kawahara, windowed=True).coeffs, atol=1e-14)


def test_bilinear_duhamel_is_symmetric_and_matches_the_map(datum, grid, cutoff, kawahara):
    a = free_evolution(datum, cutoff, kawahara, windowed=True)
    b = free_evolution(random_band_limited(grid, 8, keyed_rng(8, "other")), cutoff, kawahara, windowed=True)
    assert_allclose(duhamel_bilinear(a, b, cutoff, kawahara).coeffs,
                    duhamel_bilinear(b, a, cutoff, kawahara).coeffs, atol=1e-14)
    zero = SpectralField(np.zeros(grid.n), grid)
    assert_allclose(duhamel_bilinear(a, a, cutoff, kawahara).coeffs,
                    duhamel_map(a, zero, cutoff, kawahara).coeffs, atol=1e-14)


def test_picard_on_zero_data_stops_at_once(grid, cutoff, kawahara):
    traj, report = picard_iterate(SpectralField(np.zeros(grid.n), grid), cutoff, kawahara, NORM)
    assert report.converged
    assert report.iterations == 1
    assert np.all(traj.coeffs == 0)


@pytest.mark.parametrize("equation", ["kawahara", "modified_kawahara"])
def test_picard_converges_to_a_fixed_point_for_small_data(datum, cutoff, equation, request):
    params = request.getfixturevalue(equation)
    u0 = datum.scaled(1e-2)
    traj, report = picard_iterate(u0, cutoff, params, NORM, k_max=30, tol=1e-12)
    assert report.converged
    assert report.contraction_factor < 0.5
    assert xsb_distance(duhamel_map(traj, u0, cutoff, params), traj, cutoff, NORM) < 1e-11


def test_picard_detects_divergence(datum, kawahara):
    with pytest.raises(DivergenceError) as excinfo:
        picard_iterate(datum.scaled(1e4), CutoffSpec(0.5, 128), kawahara, NORM, k_max=20)
    assert len(excinfo.value.residuals) >= 1


def test_linear_constant_is_positive_and_scale_free(datum, cutoff, kawahara):
    c0 = linear_constant(datum, cutoff, kawahara, NORM)
    assert c0 > 0
    assert linear_constant(datum.scaled(3.0), cutoff, kawahara, NORM) == pytest.approx(c0, rel=1e-10)
    zero = SpectralField(np.zeros(datum.grid.n), datum.grid)
    assert linear_constant(zero, cutoff, kawahara, NORM) == 0.0


def test_contraction_factor_for_small_data(datum, cutoff, kawahara):
    small = datum.scaled(1e-3)
    factor = contraction_factor(small, cutoff, kawahara, NORM, probes=3, seed=11)
    assert 0 < factor < 0.5
    assert contraction_factor(small, cutoff, kawahara, NORM, probes=3, seed=11) == factor


def test_contraction_factor_edge_cases(grid, datum, cutoff, kawahara):
    zero = SpectralField(np.zeros(grid.n), grid)
    assert contraction_factor(zero, cutoff, kawahara, NORM, probes=2, seed=0) == 0.0
    with pytest.raises(ValueError):
        contraction_factor(datum, cutoff, kawahara, NORM, probes=1, seed=0)


def test_lipschitz_ratio_is_one_in_the_linear_regime(datum, grid, cutoff, kawahara):
    u0 = datum.scaled(1e-8)
    v0 = u0 + random_band_limited(grid, 8, keyed_rng(3, "perturbation")).scaled(1e-9)
    ratio = lipschitz_data_dependence(u0, v0, cutoff, kawahara, NORM)
    assert ratio == pytest.approx(1.0, rel=1e-4)
    assert lipschitz_data_dependence(u0, u0, cutoff, kawahara, NORM) == 0.0


def test_bilinear_duhamel_polarizes_the_quadratic_map(datum, grid, cutoff, kawahara):
    # N(u) - N(v) = -1/2 d/dx ((u + v)(u - v))
    u = free_evolution(datum, cutoff, kawahara, windowed=True)
    v = free_evolution(random_band_limited(grid, 8, keyed_rng(9, "polarization")), cutoff, kawahara, windowed=True)
    times = time_lattice(cutoff)
    total = Trajectory.from_array(times, u.coeffs + v.coeffs, grid, kawahara)
    difference = u - v
    lhs = duhamel_map(u, datum, cutoff, kawahara) - duhamel_map(v, datum, cutoff, kawahara)
    rhs = duhamel_bilinear(total, difference, cutoff, kawahara)
    assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-12)


@pytest.mark.parametrize("equation", ["kawahara", "modified_kawahara"])
def test_picard_fixed_point_is_the_solution_on_the_plateau(datum, equation, request):
    # psi = 1 on [0, delta/2], so the fixed point there is the solution of the equation
    params = request.getfixturevalue(equation)
    fine = CutoffSpec(0.0625, 512)
    u0 = datum.scaled(0.05)
    traj, report = picard_iterate(u0, fine, params, NORM, k_max=30, tol=1e-12)
    assert report.converged
    plateau = fine.n_time // 4
    reference = solve(u0, fine.delta / 2, fine.dt, params)
    assert len(reference.states) == plateau + 1
    free = free_evolution(u0, fine, params)
    origin = fine.n_time // 2
    for j in (plateau // 2, plateau):
        assert hs_norm(traj.states[origin + j] - reference.states[j], 0.0) < 1e-6
    assert hs_norm(traj.states[origin + plateau] - free.states[origin + plateau], 0.0) > 1e-5
