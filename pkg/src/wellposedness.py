"""
Rough-data probes of the Picard construction near the well-posedness threshold
"""

import logging
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from src.duhamel import lipschitz_data_dependence, picard_iterate
from src.exceptions import DivergenceError
from src.models import CutoffSpec, EquationKind, EquationParams, ExperimentConfig, Grid, NormSpec, SpectralField
from src.seeding import keyed_rng
from src.spectral_core import hs_norm, japanese_bracket, make_grid
from src.xsb import loglog_slope

logger = logging.getLogger(__name__)

# Largest X_{s,b} exponent whose estimate still holds for each equation
WELLPOSEDNESS_THRESHOLDS = {
    EquationKind.KAWAHARA: -7.0 / 4.0,
    EquationKind.MODIFIED_KAWAHARA: -1.0 / 4.0,
}

# Distance in s the sweep should keep on both sides of the threshold
STRADDLE_MARGIN = 0.25

PROBE_COLUMNS = ["kind", "s", "cutoff", "seed", "inside_range", "converged", "iterations",
                 "contraction_rate", "persistence", "lipschitz_ratio"]


def wellposedness_threshold(kind: EquationKind) -> float:
    """Critical Sobolev index: -7/4 for Kawahara, -1/4 for modified Kawahara"""
    return WELLPOSEDNESS_THRESHOLDS[EquationKind(kind)]


def rough_datum(grid: Grid, s: float, cutoff: int, rng: np.random.Generator) -> SpectralField:
    """
    Random real datum with |u_hat(xi)| proportional to <xi>^{-s-1/2} on 1 <= |k| <= cutoff.

    Phases are uniform; the result is conjugate-symmetric with unit H^s norm.
    """
    if not 1 <= cutoff < grid.n // 2:
        raise ValueError(f"cutoff must lie in [1, {grid.n // 2 - 1}], got {cutoff}")
    ks = np.arange(1, cutoff + 1)
    amps = japanese_bracket(ks * grid.dxi) ** (-s - 0.5) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, cutoff))
    coeffs = np.zeros(grid.n, dtype=complex)
    coeffs[ks] = amps
    coeffs[-ks] = np.conj(amps)
    field = SpectralField(coeffs, grid)
    return field.scaled(1.0 / hs_norm(field, s))


def is_inside_range(s: float, kind: EquationKind) -> bool:
    """s > -7/4 for Kawahara, s >= -1/4 for modified Kawahara"""
    threshold = wellposedness_threshold(kind)
    if EquationKind(kind) is EquationKind.KAWAHARA:
        return s > threshold
    return s >= threshold


def _probe_kinds(config: ExperimentConfig) -> List[EquationKind]:
    kinds = config.options.get("kinds")
    if not kinds:
        return [config.params.kind]
    return [EquationKind(k) for k in kinds]


def probe_points(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """One point per (kind, s, cutoff, seed) of the sweep"""
    points = []
    for kind in _probe_kinds(config):
        s_values = [float(s) for s in config.sweep["s"]]
        threshold = wellposedness_threshold(kind)
        if not (min(s_values) <= threshold - STRADDLE_MARGIN and max(s_values) >= threshold + STRADDLE_MARGIN):
            logger.warning(f"s sweep {s_values} does not straddle the {kind.value} threshold "
                           f"{threshold:g} by {STRADDLE_MARGIN}")
        for s in s_values:
            for cutoff in config.sweep["cutoff"]:
                for seed in config.sweep["seeds"]:
                    points.append({"kind": kind, "s": s, "cutoff": int(cutoff), "seed": int(seed)})
    return points


def probe_point(config: ExperimentConfig, point: Dict[str, Any]) -> Dict[str, Any]:
    """
    Picard convergence, H^s persistence and Lipschitz ratio for one rough datum

    A diverging iteration is a measurement, not an error: the row records
    converged=False and NaN for the quantities it could not produce.
    """
    opts = config.options
    kind, s, cutoff, seed = point["kind"], point["s"], point["cutoff"], point["seed"]
    params = EquationParams(config.params.alpha, config.params.beta, kind)
    grid = make_grid(config.grid["n"], config.grid["box_length"])
    time_cutoff = CutoffSpec(float(opts["delta"]), int(opts["n_time"]))
    norm = NormSpec(s, float(opts["b"]))
    amplitude = float(opts["amplitude"])

    rng = keyed_rng(config.seed, "wellposed", kind.value, f"{s:g}", cutoff, seed)
    u0 = rough_datum(grid, s, cutoff, rng).scaled(amplitude)
    v0 = u0 + rough_datum(grid, s, cutoff, rng).scaled(amplitude * float(opts["perturbation"]))

    row = {"kind": kind.value, "s": s, "cutoff": cutoff, "seed": seed,
           "inside_range": is_inside_range(s, kind), "converged": False, "iterations": 0,
           "contraction_rate": np.nan, "persistence": np.nan, "lipschitz_ratio": np.nan}
    k_max, tol = int(opts["picard_iters"]), float(opts["tol"])
    try:
        traj, report = picard_iterate(u0, time_cutoff, params, norm, k_max, tol)
    except DivergenceError as e:
        logger.info(f"{kind.value} s={s:g} cutoff={cutoff} seed={seed}: {e}")
        row["iterations"] = len(e.residuals)
        return row

    row.update(converged=report.converged, iterations=report.iterations,
               contraction_rate=report.contraction_factor)
    forward = traj.times >= -1e-12
    row["persistence"] = float(max(hs_norm(state, s) for state, keep in zip(traj.states, forward) if keep)
                               / hs_norm(u0, s))
    try:
        row["lipschitz_ratio"] = lipschitz_data_dependence(u0, v0, time_cutoff, params, norm, k_max, tol)
    except DivergenceError as e:
        logger.info(f"{kind.value} s={s:g} cutoff={cutoff} seed={seed}: perturbed datum diverged: {e}")
    return row


def summarize_probe(rows: List[Dict[str, Any]]) -> Dict[str, Any]:
    """
    Per (kind, s): convergence fraction, worst rate and ratios, and log-log slopes against the cutoff

    Returns:
        {"table": DataFrame, "summary": {kind: {s: {...}}}}
    """
    table = pd.DataFrame(rows, columns=PROBE_COLUMNS)
    summary: Dict[str, Any] = {}
    for (kind, s), group in table.groupby(["kind", "s"], sort=True):
        worst = group.groupby("cutoff")[["lipschitz_ratio", "persistence"]].max().reset_index()
        summary.setdefault(kind, {})[f"{s:g}"] = {
            "inside_range": bool(group["inside_range"].iloc[0]),
            "converged_fraction": float(group["converged"].mean()),
            "max_contraction_rate": float(group["contraction_rate"].max()),
            "max_lipschitz_ratio": float(group["lipschitz_ratio"].max()),
            "max_persistence": float(group["persistence"].max()),
            "lipschitz_slope_vs_cutoff": loglog_slope(worst["cutoff"].to_numpy(float),
                                                      worst["lipschitz_ratio"].to_numpy(float)),
        }
    return {"table": table, "summary": summary}


def wellposed_probe(config: ExperimentConfig) -> Dict[str, Any]:
    """Run every probe point in order and summarize"""
    rows = [probe_point(config, point) for point in probe_points(config)]
    result = summarize_probe(rows)
    logger.info(f"Well-posedness probe: {len(rows)} points, "
                f"{int(result['table']['converged'].sum())} converged")
    return result
