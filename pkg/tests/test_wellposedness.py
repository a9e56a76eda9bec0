import logging

import numpy as np
import pytest

from src import wellposedness
from src.config_loader import ConfigLoader
from src.exceptions import DivergenceError
from src.models import EquationKind
from src.spectral_core import hs_norm
from src.wellposedness import (
    PROBE_COLUMNS,
    is_inside_range,
    probe_point,
    probe_points,
    rough_datum,
    summarize_probe,
    wellposedness_threshold,
)


def _config(s=(-2.0, -1.0, 0.0), kinds=None, **options):
    return ConfigLoader.parse_experiment_config({
        "scenario": "wellposed-probe",
        "seed": 7,
        "equation": {"alpha": 1.0, "beta": -1.0, "kind": "kawahara"},
        "grid": {"n": 64, "box_length": 16.0 * np.pi},
        "sweep": {"s": list(s), "cutoff": [4, 8], "seeds": [0]},
        "options": {"n_time": 128, "kinds": kinds, **options},
    })


@pytest.mark.parametrize("s", [-1.5, 0.0, 1.0])
def test_rough_datum_has_unit_norm(grid, rng, s):
    datum = rough_datum(grid, s, 12, rng)
    assert hs_norm(datum, s) == pytest.approx(1.0, rel=1e-10)
    assert datum.is_conjugate_symmetric()
    assert datum.coeffs[0] == 0
    assert np.all(datum.coeffs[13:-12] == 0)


def test_rough_datum_spectrum_follows_the_power_law(grid, rng):
    datum = rough_datum(grid, -1.0, 12, rng)
    ks = np.arange(1, 13)
    ratio = np.abs(datum.coeffs[ks]) / (1.0 + ks * grid.dxi) ** 0.5
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-12)


def test_rough_datum_rejects_bad_cutoffs(grid, rng):
    with pytest.raises(ValueError):
        rough_datum(grid, 0.0, 0, rng)
    with pytest.raises(ValueError):
        rough_datum(grid, 0.0, grid.n // 2, rng)


def test_wellposedness_thresholds():
    assert wellposedness_threshold(EquationKind.KAWAHARA) == -1.75
    assert wellposedness_threshold("modified_kawahara") == -0.25


def test_inside_range():
    assert is_inside_range(-1.7, EquationKind.KAWAHARA)
    assert not is_inside_range(-1.75, EquationKind.KAWAHARA)
    assert is_inside_range(-0.25, EquationKind.MODIFIED_KAWAHARA)
    assert not is_inside_range(-0.3, "modified_kawahara")


def test_probe_points_cover_the_sweep():
    points = probe_points(_config(kinds=["kawahara", "modified_kawahara"], s=(-2.0, 0.0)))
    assert len(points) == 2 * 2 * 2
    assert points[0] == {"kind": EquationKind.KAWAHARA, "s": -2.0, "cutoff": 4, "seed": 0}


def test_probe_points_warn_without_a_straddle(caplog):
    with caplog.at_level(logging.WARNING, logger="src.wellposedness"):
        probe_points(_config(s=(0.0, 0.5)))
    assert "does not straddle" in caplog.text


def test_small_datum_probe():
    config = _config()
    point = {"kind": EquationKind.KAWAHARA, "s": -0.5, "cutoff": 4, "seed": 0}
    row = probe_point(config, point)
    assert set(row) == set(PROBE_COLUMNS)
    assert row["converged"] and row["inside_range"]
    assert row["contraction_rate"] < 0.5
    assert 0.999 <= row["persistence"] < 1.5
    assert 0.5 < row["lipschitz_ratio"] < 1.5
    assert probe_point(config, point) == row


def test_diverging_probe_is_recorded(monkeypatch):
    def diverge(*args, **kwargs):
        raise DivergenceError("residuals grew", [1.0, 2.0, 4.0, 8.0])

    monkeypatch.setattr(wellposedness, "picard_iterate", diverge)
    row = probe_point(_config(), {"kind": EquationKind.KAWAHARA, "s": -2.0, "cutoff": 8, "seed": 0})
    assert not row["converged"]
    assert row["iterations"] == 4
    assert np.isnan(row["lipschitz_ratio"]) and np.isnan(row["contraction_rate"])


def test_summary_per_kind_and_index():
    rows = [
        {"kind": "kawahara", "s": -1.0, "cutoff": c, "seed": seed, "inside_range": True, "converged": True,
         "iterations": 5, "contraction_rate": 0.1 * c, "persistence": 1.0, "lipschitz_ratio": 2.0 * c}
        for c in (4, 8) for seed in (0, 1)
    ] + [
        {"kind": "kawahara", "s": -2.0, "cutoff": 4, "seed": 0, "inside_range": False, "converged": False,
         "iterations": 3, "contraction_rate": np.nan, "persistence": np.nan, "lipschitz_ratio": np.nan},
    ]
    summary = summarize_probe(rows)["summary"]["kawahara"]
    assert summary["-1"]["converged_fraction"] == 1.0
    assert summary["-1"]["max_lipschitz_ratio"] == 16.0
    assert summary["-1"]["lipschitz_slope_vs_cutoff"] == pytest.approx(1.0)
    assert summary["-2"]["converged_fraction"] == 0.0
    assert not summary["-2"]["inside_range"]


def test_wellposed_probe_end_to_end():
    result = wellposedness.wellposed_probe(_config(s=(-2.0, 0.0)))
    table = result["table"]
    assert len(table) == 2 * 2
    assert table["converged"].all()
    assert set(result["summary"]["kawahara"]) == {"-2", "0"}
