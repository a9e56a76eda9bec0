"""
Dyadic block multipliers: regime classification, the block bounds, lattice
discretization of the block indicator and a trilinear norm estimator.
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.dispersion import resonance_h, resonant_scale
from src.exceptions import EmptySupportError
from src.models import DiscreteMultiplier, DyadicBlockSpec, EquationParams, NormEstimate, Regime
from src.seeding import keyed_rng

logger = logging.getLogger(__name__)

# "~" for frequencies: ratio <= FREQ_SIM; for modulations and H: ratio <= MOD_SIM
FREQ_SIM = 2.0
MOD_SIM = 8.0
# ">>": ratio >= MUCH
MUCH = 4.0
# H ~ N_max^4 N_min up to this factor
RESONANT_WINDOW = 256.0
# |h| ~ H means H <= |h| < H_WIDTH * H
H_WIDTH = 4.0


def _sim(a: float, b: float, factor: float) -> bool:
    return max(a, b) <= factor * min(a, b)


def classify_regime(spec: DyadicBlockSpec) -> Regime:
    """
    Vanishing when N_max ~ N_med, L_max ~ max(H, L_med) or (for N_med >= 1)
    H ~ N_max^4 N_min fails; otherwise (++) when all N_j are comparable and
    L_max ~ H, (+-) when two high frequencies meet a much lower one carrying
    L ~ H at least as large as the others; Other in the remaining cases.
    """
    n_max, n_med, n_min = spec.n_sorted
    l_max, l_med, l_min = spec.l_sorted
    if not _sim(n_max, n_med, FREQ_SIM):
        return Regime.VANISHING
    if not _sim(l_max, max(spec.H, l_med), MOD_SIM):
        return Regime.VANISHING
    if n_med >= 1 and not _sim(spec.H, n_max ** 4 * n_min, RESONANT_WINDOW):
        return Regime.VANISHING

    if _sim(n_max, n_min, FREQ_SIM) and _sim(l_max, spec.H, MOD_SIM):
        return Regime.PLUS_PLUS_COHERENCE

    for j in range(3):
        others = [k for k in range(3) if k != j]
        n_hi = [spec.n[k] for k in others]
        if not _sim(n_hi[0], n_hi[1], FREQ_SIM) or min(n_hi) < MUCH * spec.n[j]:
            continue
        l_j = spec.l[j]
        if _sim(l_j, spec.H, MOD_SIM) and all(l_j * MOD_SIM >= spec.l[k] for k in others):
            return Regime.PLUS_MINUS_COHERENCE
    return Regime.OTHER


def is_high_modulation(spec: DyadicBlockSpec) -> bool:
    """L_max ~ L_med >> H, the case settled by the elementary estimate"""
    l_max, l_med, _ = spec.l_sorted
    return _sim(l_max, l_med, MOD_SIM) and l_med >= MUCH * spec.H


def block_bound(spec: DyadicBlockSpec, regime: Optional[Regime] = None) -> float:
    """
    L_min^{1/2} N_max^{-2} times L_med^{1/2} for (++), min(H, (N_max/N_min) L_med)^{1/2}
    for (+-) and min(H, L_med)^{1/2} otherwise.

    Args:
        spec: Block
        regime: Formula to evaluate; classified from the spec when omitted

    Raises:
        ValueError: Vanishing block
    """
    regime = classify_regime(spec) if regime is None else Regime(regime)
    if regime is Regime.VANISHING:
        raise ValueError(f"block {spec.to_dict()} is vanishing; no bound applies")
    n_max, _, n_min = spec.n_sorted
    _, l_med, l_min = spec.l_sorted
    prefactor = np.sqrt(l_min) / n_max ** 2
    if regime is Regime.PLUS_PLUS_COHERENCE:
        return float(prefactor * np.sqrt(l_med))
    if regime is Regime.PLUS_MINUS_COHERENCE:
        return float(prefactor * np.sqrt(min(spec.H, n_max / n_min * l_med)))
    return float(prefactor * np.sqrt(min(spec.H, l_med)))


def elementary_upper_bound(spec: DyadicBlockSpec) -> float:
    """L_min^{1/2} N_min^{1/2}"""
    return float(np.sqrt(spec.l_sorted[2] * spec.n_sorted[2]))


# --------------------------------------------------------------------------- discretization

def _annulus_indices(N: float, step: float) -> np.ndarray:
    """Integers i with N <= |i step| < 2N"""
    lo = int(np.ceil(N / step - 1e-9))
    hi = int(np.ceil(2.0 * N / step - 1e-9)) - 1
    positive = np.arange(max(lo, 1), hi + 1)
    return np.concatenate([positive, -positive])


def _in_modulation_annulus(lam: np.ndarray, L: float) -> np.ndarray:
    a = np.abs(lam)
    return a < 2.0 if L <= 1 else (a >= L) & (a < 2.0 * L)


def _midpoint_cells(L: float, step: float) -> np.ndarray:
    """Integer m whose midpoints (m + 1/2) step cover the modulation annulus"""
    if L <= 1:
        half = int(np.round(2.0 / step))
        return np.arange(-half, half)
    lo = int(np.round(L / step))
    hi = int(np.round(2.0 * L / step))
    positive = np.arange(lo, hi)
    return np.concatenate([positive, -positive - 1])


def _compact(xi_index: np.ndarray, lam_cell: np.ndarray) -> Tuple[np.ndarray, int]:
    keys = np.stack([xi_index, lam_cell], axis=1)
    unique, inverse = np.unique(keys, axis=0, return_inverse=True)
    return np.asarray(inverse).ravel().astype(np.int64), len(unique)


def empty_multiplier(lattice: Optional[Dict] = None) -> DiscreteMultiplier:
    none = np.empty(0, dtype=np.int64)
    return DiscreteMultiplier((none, none, none), np.empty(0), (0, 0, 0), 1.0, dict(lattice or {}))


def discretize_block(spec: DyadicBlockSpec, cells_per_dyad: int, params: EquationParams,
                     modulation_cells: Optional[int] = None) -> DiscreteMultiplier:
    """
    Indicator of the block on a lattice.

    Frequencies sit on i * dxi with dxi = N_min / cells_per_dyad, so xi3 = -xi1 - xi2
    is exact. The two roles with the smallest L_j are integration variables on
    midpoint lattices of spacing L_j / modulation_cells (cells_per_dyad when
    omitted); the third modulation is lambda = -h - lambda_a - lambda_b, binned
    on its own lattice. The multiplier keeps points with every |xi_j| ~ N_j,
    |lambda_j| ~ L_j and H <= |h| < 4H. The support is indexed by (xi_1, xi_2,
    lambda_a, lambda_b), so it grows like cells_per_dyad^4 when both lattices
    are refined together and like cells_per_dyad^2 at fixed modulation_cells.

    Raises:
        ValueError: cells_per_dyad < 4
        EmptySupportError: Non-vanishing block with no lattice points
    """
    if cells_per_dyad < 4:
        raise ValueError(f"cells_per_dyad must be >= 4, got {cells_per_dyad}")
    if modulation_cells is None:
        modulation_cells = cells_per_dyad
    if modulation_cells < 1:
        raise ValueError("modulation_cells must be >= 1")
    regime = classify_regime(spec)
    n_min = spec.n_sorted[2]
    dxi = n_min / cells_per_dyad
    order = sorted(range(3), key=lambda j: (spec.l[j], j))
    a, b, c = order
    steps = [spec.l[j] / modulation_cells for j in range(3)]
    lattice = {"dxi": dxi, "dlambda": steps, "binned_role": c, "cells_per_dyad": cells_per_dyad,
               "modulation_cells": modulation_cells, "regime": regime.value}
    if regime is Regime.VANISHING:
        return empty_multiplier(lattice)

    i1, i2 = np.meshgrid(_annulus_indices(spec.N1, dxi), _annulus_indices(spec.N2, dxi), indexing="ij")
    i1, i2 = i1.ravel(), i2.ravel()
    i3 = -i1 - i2
    keep = (np.abs(i3) * dxi >= spec.N3 * (1 - 1e-12)) & (np.abs(i3) * dxi < 2.0 * spec.N3 * (1 - 1e-12))
    i1, i2, i3 = i1[keep], i2[keep], i3[keep]
    h = resonance_h(i1 * dxi, i2 * dxi, params)
    keep = (np.abs(h) >= spec.H) & (np.abs(h) < H_WIDTH * spec.H)
    xi_index = [i1[keep], i2[keep], i3[keep]]
    h = h[keep]

    m_a = _midpoint_cells(spec.l[a], steps[a])
    m_b = _midpoint_cells(spec.l[b], steps[b])
    point, ma, mb = np.meshgrid(np.arange(len(h)), m_a, m_b, indexing="ij")
    point, ma, mb = point.ravel(), ma.ravel(), mb.ravel()
    lam_c = -h[point] - (ma + 0.5) * steps[a] - (mb + 0.5) * steps[b]
    inside = _in_modulation_annulus(lam_c, spec.l[c])
    point, ma, mb, lam_c = point[inside], ma[inside], mb[inside], lam_c[inside]
    if point.size == 0:
        raise EmptySupportError(f"block {spec.to_dict()} has no lattice points at {cells_per_dyad} cells per dyad")

    lam_cells = {a: ma, b: mb, c: np.floor(lam_c / steps[c]).astype(np.int64)}
    cells, shape = [], []
    for role in range(3):
        ids, size = _compact(xi_index[role][point], lam_cells[role])
        cells.append(ids)
        shape.append(size)
    measure = float(np.sqrt(dxi * steps[a] * steps[b] / steps[c]))
    logger.debug(f"Block {spec.to_dict()}: {point.size} lattice points, cells {shape}")
    return DiscreteMultiplier(tuple(cells), np.ones(point.size), tuple(shape), measure, lattice)


def cyclic_multiplier(n: int, values: Union[None, np.ndarray, Callable] = None) -> DiscreteMultiplier:
    """
    Multiplier on {x + y + z = 0 mod n} with counting measure.

    Args:
        n: Group order
        values: None for m = 1, an (n, n) array indexed by (x, y), or a callable m(x, y, z)
    """
    if n < 1:
        raise ValueError("n must be positive")
    x, y = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    x, y = x.ravel(), y.ravel()
    z = np.mod(-x - y, n)
    if values is None:
        weights = np.ones(x.size)
    elif callable(values):
        weights = np.asarray(values(x, y, z), dtype=float)
    else:
        weights = np.asarray(values, dtype=float)[x, y]
    live = weights != 0
    return DiscreteMultiplier((x[live], y[live], z[live]), weights[live], (n, n, n), 1.0, {"group": n})


def dense_multiplier(tensor: np.ndarray, measure: float = 1.0) -> DiscreteMultiplier:
    """Sparse view of a dense (n1, n2, n3) tensor"""
    tensor = np.asarray(tensor)
    if tensor.ndim != 3:
        raise ValueError("dense_multiplier needs a 3-D tensor")
    i, j, k = np.nonzero(tensor)
    return DiscreteMultiplier((i, j, k), tensor[i, j, k], tuple(tensor.shape), measure, {})


# --------------------------------------------------------------------------- norm estimation

def _contract(m: DiscreteMultiplier, f: List[np.ndarray], role: int) -> np.ndarray:
    o1, o2 = [r for r in range(3) if r != role]
    terms = m.values * f[o1][m.cells[o1]] * f[o2][m.cells[o2]]
    size = m.shape[role]
    return (np.bincount(m.cells[role], weights=terms.real, minlength=size)
            + 1j * np.bincount(m.cells[role], weights=terms.imag, minlength=size))


def _unit(v: np.ndarray) -> np.ndarray:
    size = np.linalg.norm(v)
    return v / size if size > 0 else v


def estimate_multiplier_norm(m: DiscreteMultiplier, restarts: int = 16, max_iters: int = 200,
                             tol: float = 1e-10, seed: int = 0) -> NormEstimate:
    """
    Lower bound on sup |sum m f1 f2 f3| over unit vectors by alternating maximization.

    Each update replaces one f_j by the normalized conjugate of the contraction of
    m against the other two, which maximizes the form in that variable, so the
    value never decreases. The best value over restarts is returned.

    Args:
        m: Nonempty multiplier
        restarts: Random starting points
        max_iters: Full update cycles per restart
        tol: Relative improvement below which a restart stops
        seed: Seed of the starting points

    Returns:
        NormEstimate with one trace per restart
    """
    if m.is_empty:
        raise ValueError("cannot estimate the norm of an empty multiplier")
    if restarts < 1 or max_iters < 1:
        raise ValueError("restarts and max_iters must be positive")

    best = 0.0
    traces: List[List[float]] = []
    for r in range(restarts):
        rng = keyed_rng(seed, "multiplier_norm", r)
        f = [_unit(rng.standard_normal(n) + 1j * rng.standard_normal(n)) for n in m.shape]
        trace: List[float] = []
        for _ in range(max_iters):
            value = 0.0
            for role in range(3):
                g = _contract(m, f, role)
                size = float(np.linalg.norm(g))
                if size == 0:
                    break
                f[role] = np.conj(g) / size
                value = size * m.measure
            trace.append(value)
            if value == 0 or (len(trace) > 1 and trace[-1] - trace[-2] <= tol * trace[-1]):
                break
        traces.append(trace)
        best = max(best, max(trace))
    logger.debug(f"Multiplier norm over {restarts} restarts: {best:.6g}")
    return NormEstimate(best, traces, restarts)


# --------------------------------------------------------------------------- scans

def plus_plus_specs(N_list: Sequence[float], L_med_list: Sequence[float], params: EquationParams,
                    L_min: float = 1.0) -> List[DyadicBlockSpec]:
    """(N, N, 2N) blocks with L = (L_min, L_med, H) and H the resonant scale of the block"""
    specs = []
    for N in N_list:
        H = resonant_scale(N, N, 2.0 * N, params)
        specs.extend(DyadicBlockSpec(N, N, 2.0 * N, H, L_min, L_med, H) for L_med in L_med_list)
    return specs


def plus_minus_specs(N_list: Sequence[float], L_med_list: Sequence[float], params: EquationParams,
                     N_low: float = 1.0) -> List[DyadicBlockSpec]:
    """(N_low, N, N) blocks with L = (H, L_med, 1)"""
    specs = []
    for N in N_list:
        H = resonant_scale(N_low, N, N, params)
        specs.extend(DyadicBlockSpec(N_low, N, N, H, H, L_med, 1.0) for L_med in L_med_list)
    return specs


def _exponents(rows: pd.DataFrame) -> Dict[str, float]:
    """Least-squares exponents of the estimate against L_min, L_med, N_max (NaN when not varied)"""
    names = ["L_min", "L_med", "N_max"]
    varied = [name for name in names if rows[name].nunique() > 1]
    result = {name: float("nan") for name in names}
    if not varied:
        return result
    design = np.column_stack([np.log(rows[name].to_numpy()) for name in varied] + [np.ones(len(rows))])
    coef, *_ = np.linalg.lstsq(design, np.log(rows["estimate"].to_numpy()), rcond=None)
    result.update({name: float(v) for name, v in zip(varied, coef)})
    return result


def verify_block_estimates(scan: Sequence[DyadicBlockSpec], cells_per_dyad: int, restarts: int, seed: int,
                           params: EquationParams, modulation_cells: Optional[int] = None,
                           max_iters: int = 200) -> Dict:
    """
    Estimated norm, block bound and their ratio for every spec, with per-regime exponents.

    Returns:
        Dict with the table, the exponents per regime, C_scan (max estimate/bound per
        regime), C_disc (max estimate/elementary bound) and, for (+-) blocks, the
        L_med crossover H N_min / N_max at which the min in the bound switches
    """
    rows = [block_row(spec, cells_per_dyad, restarts, seed, params, modulation_cells, max_iters)
            for spec in scan]
    return summarize_block_rows(rows)


def block_row(spec: DyadicBlockSpec, cells_per_dyad: int, restarts: int, seed: int, params: EquationParams,
              modulation_cells: Optional[int] = None, max_iters: int = 200) -> Dict:
    """Estimate, bound and bookkeeping for one admissible block"""
    regime = classify_regime(spec)
    if regime is Regime.VANISHING:
        raise ValueError(f"block is not admissible: {spec.to_dict()}")
    m = discretize_block(spec, cells_per_dyad, params, modulation_cells)
    estimate = estimate_multiplier_norm(m, restarts, max_iters, seed=seed).lower_bound
    bound = block_bound(spec, regime)
    n_max, _, n_min = spec.n_sorted
    _, l_med, l_min = spec.l_sorted
    logger.debug(f"{regime.value} block {spec.n}: estimate {estimate:.4g}, bound {bound:.4g}")
    return {**spec.to_dict(), "regime": regime.value, "support": m.support_size,
            "estimate": estimate, "bound": bound, "ratio": estimate / bound,
            "elementary": elementary_upper_bound(spec), "high_modulation": is_high_modulation(spec),
            "L_min": l_min, "L_med": l_med, "N_max": n_max, "N_min": n_min,
            "crossover": spec.H * n_min / n_max}


def summarize_block_rows(rows: List[Dict]) -> Dict:
    """Per-regime exponents, C_scan, C_disc and the (+-) crossover list of a block table"""
    table = pd.DataFrame(rows)
    report = {"table": table, "exponents": {}, "C_scan": {}, "C_disc": float("nan"), "crossover": []}
    if table.empty:
        return report
    report["C_disc"] = float((table["estimate"] / table["elementary"]).max())
    for regime, group in table.groupby("regime"):
        report["exponents"][regime] = _exponents(group)
        report["C_scan"][regime] = float(group["ratio"].max())
    pm = table[table["regime"] == Regime.PLUS_MINUS_COHERENCE.value]
    report["crossover"] = [
        {"L_med": float(r.L_med), "crossover": float(r.crossover),
         "active": "H" if r.H <= r.N_max / r.N_min * r.L_med else "L_med"}
        for r in pm.itertuples()
    ]
    logger.info(f"Block scan: {len(table)} blocks, C_scan {report['C_scan']}, C_disc {report['C_disc']:.4g}")
    return report
