import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from src.duhamel import free_evolution
from src.exceptions import EmptySupportError
from src.models import (
    CutoffSpec,
    EstimateKind,
    NormSpec,
    PairRegime,
    SpectralField,
    Trajectory,
)
from src.seeding import keyed_rng
from src.spectral_core import dealiased_product, make_grid, random_band_limited
from src.xsb import (
    SCAN_COLUMNS,
    asym_bilinear_ratio,
    bilinear_ratio,
    block_concentrated_field,
    mode_location,
    ratio_scaling_scan,
    single_mode_asym_ratio,
    single_mode_bilinear_ratio,
    single_mode_field,
    single_mode_trilinear_ratio,
    slope_sign_change,
    spacetime_product,
    spacetime_spectrum,
    summarize_ratio_table,
    trilinear_ratio,
    verify_linear_estimates,
    xsb_norm,
)

CUTOFF = CutoffSpec(0.25, 128)


def _single_mode_datum(grid, k):
    coeffs = np.zeros(grid.n, dtype=complex)
    coeffs[k] = coeffs[-k] = 0.5
    return SpectralField(coeffs, grid)


def test_spectrum_obeys_plancherel(grid, rng, kawahara):
    traj = free_evolution(random_band_limited(grid, 10, rng), CUTOFF, kawahara, windowed=True)
    f = spacetime_spectrum(traj, CUTOFF, apply_window=False)
    direct = np.sqrt(grid.box_length * CUTOFF.dt * np.sum(np.abs(traj.coeffs) ** 2))
    assert xsb_norm(f, NormSpec(0.0, 0.0)) == pytest.approx(direct, rel=1e-12)
    assert f.n_tau == 4 * CUTOFF.n_time


def test_applying_the_window_matches_a_windowed_trajectory(grid, rng, kawahara):
    u0 = random_band_limited(grid, 10, rng)
    windowed = spacetime_spectrum(free_evolution(u0, CUTOFF, kawahara, windowed=True), CUTOFF, apply_window=False)
    applied = spacetime_spectrum(free_evolution(u0, CUTOFF, kawahara), CUTOFF, apply_window=True)
    assert_allclose(applied.amps, windowed.amps, atol=1e-13)


def test_spectrum_rejects_bad_lattices(grid, kawahara):
    zeros = np.zeros((4, grid.n))
    uneven = Trajectory.from_array(np.array([0.0, 0.1, 0.3, 0.4]), zeros, grid, kawahara)
    with pytest.raises(ValueError):
        spacetime_spectrum(uneven, CUTOFF)
    shifted = Trajectory.from_array(np.array([0.05, 0.15, 0.25, 0.35]), zeros, grid, kawahara)
    with pytest.raises(ValueError):
        spacetime_spectrum(shifted, CUTOFF)


def test_free_solutions_sit_on_the_characteristic(grid, kawahara):
    # psi W(t) u0 has the same modulation profile on every row, so the norm ignores xi when s = 0
    norm = NormSpec(0.0, 0.6)
    values = []
    for k in (2, 9, 20):
        traj = free_evolution(_single_mode_datum(grid, k), CUTOFF, kawahara, windowed=True)
        values.append(xsb_norm(spacetime_spectrum(traj, CUTOFF, apply_window=False, pad=16), norm))
    assert_allclose(values, values[0], rtol=2e-2)


def test_single_mode_field_location(grid, kawahara):
    f = single_mode_field(grid, 5, 2, 1.0, 2.0 * np.pi, kawahara)
    xi, tau = mode_location(f)
    assert xi == pytest.approx(5 * grid.dxi)
    p = -kawahara.beta * xi ** 5 + kawahara.alpha * xi ** 3
    assert tau == pytest.approx((round(p / f.dtau) + 2) * f.dtau)
    with pytest.raises(ValueError):
        single_mode_field(grid, 5, 9, 1.0, 2.0 * np.pi, kawahara)


def test_bilinear_ratio_matches_single_mode_closed_form(grid, kawahara):
    norm = NormSpec(-0.5, 0.6)
    f1 = single_mode_field(grid, 3, 1, 2.0, 2.0 * np.pi, kawahara)
    f2 = single_mode_field(grid, 5, -2, 1j, 2.0 * np.pi, kawahara)
    expected = single_mode_bilinear_ratio(mode_location(f1), mode_location(f2), norm, kawahara,
                                          f1.dtau, grid.box_length)
    assert bilinear_ratio(f1, f2, norm) == pytest.approx(expected, rel=1e-10)


def test_trilinear_ratio_matches_single_mode_closed_form(grid, modified_kawahara):
    norm = NormSpec(0.0, 0.55)
    fields = [single_mode_field(grid, k, d, 1.0, 2.0 * np.pi, modified_kawahara)
              for k, d in ((2, 0), (-7, 3), (4, -1))]
    expected = single_mode_trilinear_ratio(*[mode_location(f) for f in fields], norm, modified_kawahara,
                                           fields[0].dtau, grid.box_length)
    assert trilinear_ratio(*fields, norm) == pytest.approx(expected, rel=1e-10)


def test_asym_ratio_matches_single_mode_closed_form(grid, kawahara):
    f1 = single_mode_field(grid, 6, 1, 1.0, 2.0 * np.pi, kawahara)
    f2 = single_mode_field(grid, -2, 0, 3.0, 2.0 * np.pi, kawahara)
    expected = single_mode_asym_ratio(mode_location(f1), mode_location(f2), -1.0, 0.1, kawahara,
                                      f1.dtau, grid.box_length)
    assert asym_bilinear_ratio(f1, f2, -1.0, 0.1) == pytest.approx(expected, rel=1e-10)


def test_product_agrees_with_the_physical_product(rng, kawahara):
    grid = make_grid(64, 16.0 * np.pi)
    u = free_evolution(random_band_limited(grid, 8, rng), CUTOFF, kawahara, windowed=True)
    v = free_evolution(random_band_limited(grid, 8, rng), CUTOFF, kawahara, windowed=True)
    product = Trajectory.from_array(
        u.times, np.stack([dealiased_product(a, b).coeffs for a, b in zip(u.states, v.states)]), grid, kawahara)
    expected = xsb_norm(spacetime_spectrum(product, CUTOFF, apply_window=False), NormSpec(0.0, 0.0))
    fu = spacetime_spectrum(u, CUTOFF, apply_window=False)
    fv = spacetime_spectrum(v, CUTOFF, apply_window=False)
    assert spacetime_product(fu, fv).norm(0.0, 0.0) == pytest.approx(expected, rel=1e-4)


def test_product_requires_a_shared_lattice(grid, kawahara):
    f1 = single_mode_field(grid, 3, 0, 1.0, 2.0 * np.pi, kawahara)
    f2 = single_mode_field(grid, 3, 0, 1.0, 4.0 * np.pi, kawahara)
    with pytest.raises(ValueError):
        spacetime_product(f1, f2)
    with pytest.raises(ValueError):
        spacetime_product(f1)


def test_ratios_reject_zero_inputs(grid, kawahara):
    f = single_mode_field(grid, 3, 0, 1.0, 2.0 * np.pi, kawahara)
    zero = f.scaled(0.0)
    with pytest.raises(ValueError, match="zero denominator"):
        bilinear_ratio(f, zero, NormSpec(0.0, 0.6))
    with pytest.raises(ValueError):
        asym_bilinear_ratio(f, f, 0.0, 0.5)


@pytest.mark.slow
def test_linear_estimates(grid, kawahara):
    data = [_single_mode_datum(grid, 3), _single_mode_datum(grid, 17)]
    norm = NormSpec(0.0, 0.6)
    report = verify_linear_estimates(norm, [0.5, 0.25, 0.125, 0.0625], data, kawahara, n_time=128)
    table = report["table"]
    assert len(table) == 8
    assert list(table.columns) == ["delta", "datum", "homogeneous", "duhamel", "c0"]
    assert report["expected_slope"] == pytest.approx(-0.1)
    assert abs(report["slope_homogeneous"] - report["expected_slope"]) < 0.1
    assert report["c0"] > 0
    assert np.all(table["duhamel"] > 0)
    for _, group in table.groupby("delta"):
        assert_allclose(group["homogeneous"], group["homogeneous"].iloc[0], rtol=5e-2)


@pytest.mark.parametrize("norm, deltas", [(NormSpec(0.0, 0.5), [0.1]), (NormSpec(0.0, 0.6), [1.5])])
def test_linear_estimates_validate_inputs(grid, kawahara, norm, deltas):
    with pytest.raises(ValueError):
        verify_linear_estimates(norm, deltas, [_single_mode_datum(grid, 3)], kawahara)


@pytest.fixture
def scan_grid():
    return make_grid(128, 16.0 * np.pi)


def test_block_field_support_and_normalization(scan_grid, kawahara):
    f = block_concentrated_field(2.0, 4.0, -1, scan_grid, 2.0 * np.pi, kawahara, seed=3)
    assert xsb_norm(f, NormSpec(0.0, 0.0)) == pytest.approx(1.0)
    rows = np.flatnonzero(np.any(f.amps != 0, axis=1))
    xi = scan_grid.frequencies[rows]
    assert np.all((-xi >= 2.0) & (-xi < 4.0))
    again = block_concentrated_field(2.0, 4.0, -1, scan_grid, 2.0 * np.pi, kawahara, seed=3)
    assert np.array_equal(f.amps, again.amps)


def test_block_field_errors(scan_grid, kawahara):
    with pytest.raises(EmptySupportError):
        block_concentrated_field(64.0, 1.0, 1, scan_grid, 2.0 * np.pi, kawahara, seed=0)
    with pytest.raises(ValueError):
        block_concentrated_field(2.0, 1.0, 0, scan_grid, 2.0 * np.pi, kawahara, seed=0)


def test_slope_sign_change():
    assert slope_sign_change([0.0, -1.0, -2.0], [-0.5, -0.1, 0.3]) == pytest.approx(-1.25)
    assert slope_sign_change([0.0, -1.0], [-0.5, -0.1]) is None


def test_ratio_scan_table(scan_grid, kawahara):
    result = ratio_scaling_scan(EstimateKind.BILINEAR, PairRegime.PLUS_MINUS, [0.0, -1.0], [1.0, 2.0], [0],
                                kawahara, scan_grid)
    assert list(result.table.columns) == SCAN_COLUMNS
    assert len(result.table) == 4
    assert set(result.slopes) == {0.0, -1.0}
    assert np.all(result.table["ratio"] > 0)
    assert set(result.to_dict()) == {"slopes", "sign_change_s", "bounded"}


def test_asym_scan_records_eps(scan_grid, kawahara):
    result = ratio_scaling_scan(EstimateKind.ASYM, PairRegime.RANDOM, [0.0], [1.0], [0, 1], kawahara, scan_grid,
                                eps=0.2)
    assert np.all(result.table["b"] == 0.2)
    assert np.all(result.table["estimate"] == "asym")


def test_scan_summary_is_independent_of_splitting(scan_grid, kawahara):
    whole = ratio_scaling_scan(EstimateKind.BILINEAR, PairRegime.PLUS_PLUS, [0.0, -2.0], [1.0, 2.0], [0, 1],
                               kawahara, scan_grid)
    parts = [ratio_scaling_scan(EstimateKind.BILINEAR, PairRegime.PLUS_PLUS, [0.0, -2.0], [N], [0, 1],
                                kawahara, scan_grid).table for N in (1.0, 2.0)]
    merged = summarize_ratio_table(pd.concat(parts, ignore_index=True))
    assert merged.slopes == whole.slopes
    assert merged.sign_change == whole.sign_change


def test_scan_rejects_unresolved_frequencies(grid, kawahara):
    with pytest.raises(ValueError):
        ratio_scaling_scan(EstimateKind.BILINEAR, PairRegime.PLUS_MINUS, [0.0], [8.0], [0], kawahara, grid)


def _block_fields(grid, params, count, signs=(1, -1, 1), N=1.0):
    return [block_concentrated_field(N, 1.0, signs[role], grid, 2.0 * np.pi, params, seed=5, role=role)
            for role in range(count)]


def test_bilinear_ratio_is_symmetric(scan_grid, kawahara):
    u, v = _block_fields(scan_grid, kawahara, 2)
    norm = NormSpec(-1.0, 0.6)
    assert bilinear_ratio(u, v, norm) == pytest.approx(bilinear_ratio(v, u, norm), rel=1e-12)


def test_trilinear_ratio_is_invariant_under_permutation(scan_grid, modified_kawahara):
    fields = _block_fields(scan_grid, modified_kawahara, 3)
    norm = NormSpec(-0.25, 0.6)
    reference = trilinear_ratio(*fields, norm)
    for order in ((1, 0, 2), (2, 1, 0), (0, 2, 1), (1, 2, 0), (2, 0, 1)):
        assert trilinear_ratio(*[fields[i] for i in order], norm) == pytest.approx(reference, rel=1e-12)


def test_ratios_are_scale_invariant(scan_grid, kawahara, modified_kawahara):
    norm = NormSpec(-0.5, 0.6)
    u, v = _block_fields(scan_grid, kawahara, 2)
    base = bilinear_ratio(u, v, norm)
    assert bilinear_ratio(u.scaled(7.0), v, norm) == pytest.approx(base, rel=1e-12)
    assert bilinear_ratio(u.scaled(0.3), v.scaled(5.0), norm) == pytest.approx(base, rel=1e-12)
    assert asym_bilinear_ratio(u.scaled(7.0), v.scaled(0.2), -0.5, 0.1) == pytest.approx(
        asym_bilinear_ratio(u, v, -0.5, 0.1), rel=1e-12)
    fields = _block_fields(scan_grid, modified_kawahara, 3)
    scaled = [f.scaled(a) for f, a in zip(fields, (7.0, 0.5, 3.0))]
    assert trilinear_ratio(*scaled, norm) == pytest.approx(trilinear_ratio(*fields, norm), rel=1e-12)


def test_scan_slopes_do_not_depend_on_amplitude(scan_grid, kawahara):
    args = (EstimateKind.BILINEAR, PairRegime.PLUS_MINUS, [0.0, -1.0], [1.0, 2.0], [0], kawahara, scan_grid)
    unit = ratio_scaling_scan(*args)
    loud = ratio_scaling_scan(*args, amplitude=7.0)
    for s, slope in unit.slopes.items():
        assert loud.slopes[s] == pytest.approx(slope, rel=1e-9, abs=1e-12)


def test_bilinear_ratio_converges_under_time_refinement(grid, kawahara):
    norm = NormSpec(-0.5, 0.6)
    u0 = random_band_limited(grid, 8, keyed_rng(21, "refinement", "u"))
    v0 = random_band_limited(grid, 8, keyed_rng(21, "refinement", "v"))
    ratios = []
    for cutoff in (CutoffSpec(0.25, 128), CutoffSpec(0.25, 256)):
        fu = spacetime_spectrum(free_evolution(u0, cutoff, kawahara), cutoff)
        fv = spacetime_spectrum(free_evolution(v0, cutoff, kawahara), cutoff)
        ratios.append(bilinear_ratio(fu, fv, norm))
    assert ratios[1] == pytest.approx(ratios[0], rel=2e-2)


def test_high_low_bilinear_ratio_grows_below_the_threshold(kawahara):
    # (+-) inputs at frequency N interact at low output frequency with small modulation
    grid = make_grid(1024, 32.0 * np.pi)
    result = ratio_scaling_scan(EstimateKind.BILINEAR, PairRegime.PLUS_MINUS, [0.0, -1.0, -2.5], [2.0, 4.0, 8.0],
                                [0], kawahara, grid)
    assert result.slopes[-2.5] >= 0.3
    assert result.slopes[-2.5] > result.slopes[0.0]


def test_parallel_trilinear_ratio_stays_bounded_above_the_threshold(modified_kawahara):
    grid = make_grid(128, 4.0 * np.pi)
    result = ratio_scaling_scan(EstimateKind.TRILINEAR, PairRegime.PLUS_PLUS, [0.0, -0.25], [2.0, 4.0, 8.0],
                                [0, 1], modified_kawahara, grid)
    assert result.slopes[0.0] < 0.1
    assert result.slopes[-0.25] < 0.1


def test_asym_slope_shift_is_the_weight_of_the_second_factor(scan_grid, kawahara):
    # ||v||_{X_{0,b}} / ||v||_{X_{s,b}} grows like <N>^{-s}, so the slope shift lies in (0, -s)
    result = ratio_scaling_scan(EstimateKind.ASYM, PairRegime.PLUS_PLUS, [0.0, -0.25], [1.0, 2.0], [0],
                                kawahara, scan_grid)
    shift = result.slopes[-0.25] - result.slopes[0.0]
    assert 0.0 < shift < 0.25
