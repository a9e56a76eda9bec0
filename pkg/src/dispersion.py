"""
Dispersion symbol, resonance function and the shift identity
"""

import logging
from typing import Iterator, Tuple

import numpy as np

from src.models import EquationParams, FrequencyTriple, ModulationTriple, ResonanceReport
from src.seeding import keyed_rng

logger = logging.getLogger(__name__)


def symbol_p(xi, params: EquationParams):
    """p(xi) = -beta xi^5 + alpha xi^3"""
    xi = np.asarray(xi, dtype=float)
    xi3 = xi ** 3
    return -params.beta * xi3 * xi * xi + params.alpha * xi3


def resonance_h(xi1, xi2, params: EquationParams):
    """
    h = p(xi1) + p(xi2) + p(xi3) with xi3 = -xi1 - xi2, in factored form
    xi1 xi2 xi3 (3 alpha - 5 beta (xi1^2 + xi1 xi2 + xi2^2)).
    """
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    xi3 = -xi1 - xi2
    quad = xi1 * xi1 + xi1 * xi2 + xi2 * xi2
    return xi1 * xi2 * xi3 * (3.0 * params.alpha - 5.0 * params.beta * quad)


def q_shift(xi, eta, params: EquationParams):
    """q with p(eta) + p(xi - eta) = p(xi) + q(xi, eta)"""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    common = xi * eta * (xi - eta)
    return 5.0 * params.beta * common * (xi * xi - xi * eta + eta * eta) - 3.0 * params.alpha * common


def modulations(triple: FrequencyTriple, taus: Tuple[float, float, float],
                params: EquationParams) -> ModulationTriple:
    lam = [float(t - symbol_p(x, params)) for x, t in zip(triple.as_tuple(), taus)]
    return ModulationTriple(*lam)


def dyadic_label(x):
    """The dyadic N with N <= |x| < 2N (0 for x = 0)"""
    x = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        label = np.where(x > 0, 2.0 ** np.floor(np.log2(np.where(x > 0, x, 1.0))), 0.0)
    return label if label.ndim else float(label)


def n0_threshold(params: EquationParams) -> float:
    """Frequency above which the fifth-order part of h dominates by a factor 2"""
    return max(1.0, 2.0 * np.sqrt(abs(3.0 * params.alpha / (5.0 * params.beta))))


def _dyadic_range(lo: float, hi: float) -> Iterator[float]:
    k = int(np.ceil(np.log2(lo) - 1e-12))
    while 2.0 ** k <= hi * (1 + 1e-12):
        yield 2.0 ** k
        k += 1


def sample_block_triples(n_max: float, n_min: float, count: int,
                         rng: np.random.Generator, coarse: int = 8) -> np.ndarray:
    """
    Zero-sum triples whose largest |xi| lies in [n_max, 2 n_max) and smallest in [n_min, 2 n_min).

    A coarse deterministic lattice of the block is always included; random
    points are drawn uniformly in the annuli and kept by rejection.

    Returns:
        Array of shape (m, 3)
    """
    edge_small = n_min * (1.0 + np.arange(coarse) / coarse)
    edge_large = n_max * (1.0 + np.arange(coarse) / coarse)
    small = np.concatenate([edge_small, -edge_small, _annulus(rng, n_min, 8 * count)])
    large = np.concatenate([edge_large, -edge_large, _annulus(rng, n_max, 8 * count)])
    grid_small, grid_large = np.meshgrid(small[:2 * coarse], large[:2 * coarse], indexing="ij")
    pairs_small = np.concatenate([grid_small.ravel(), small[2 * coarse:]])
    pairs_large = np.concatenate([grid_large.ravel(), large[2 * coarse:]])
    triples = np.stack([pairs_small, pairs_large, -pairs_small - pairs_large], axis=1)
    mags = np.sort(np.abs(triples), axis=1)
    keep = (dyadic_label(mags[:, 2]) == n_max) & (dyadic_label(mags[:, 0]) == n_min)
    triples = triples[keep]
    n_grid = 4 * coarse * coarse
    n_grid_kept = int(np.count_nonzero(keep[:n_grid]))
    return triples[: n_grid_kept + count]


def _annulus(rng: np.random.Generator, n: float, count: int) -> np.ndarray:
    return rng.choice([-1.0, 1.0], size=count) * rng.uniform(n, 2.0 * n, size=count)


def verify_resonance_bound(params: EquationParams, n_cap: float, samples_per_block: int,
                           seed: int) -> ResonanceReport:
    """
    Sampled minimum of |h| / (N_max^4 N_min) over dyadic blocks with N_max ~ N_med.

    Args:
        params: Equation coefficients
        n_cap: Largest dyadic N_max scanned
        samples_per_block: Random triples per (N_max, N_min) block
        seed: Seed; each block owns a keyed stream

    Returns:
        ResonanceReport
    """
    n0 = n0_threshold(params)
    if n_cap < n0:
        raise ValueError(f"n_cap={n_cap} is below N0={n0:.4g}")
    if samples_per_block < 1:
        raise ValueError("samples_per_block must be >= 1")

    best_ratio = np.inf
    best_triple = (np.nan, np.nan, np.nan)
    total = 0
    for n_max in _dyadic_range(n0, n_cap):
        n_min = 2.0 ** -3
        while n_min <= n_max:
            rng = keyed_rng(seed, "resonance", int(np.log2(n_max)), int(np.log2(n_min)) + 16)
            triples = sample_block_triples(n_max, n_min, samples_per_block, rng)
            if triples.size:
                h = np.abs(resonance_h(triples[:, 0], triples[:, 1], params))
                mags = np.sort(np.abs(triples), axis=1)
                ratio = h / (dyadic_label(mags[:, 2]) ** 4 * dyadic_label(mags[:, 0]))
                i = int(np.argmin(ratio))
                total += len(ratio)
                if ratio[i] < best_ratio:
                    best_ratio = float(ratio[i])
                    best_triple = tuple(float(v) for v in triples[i])
            n_min *= 2.0
        logger.debug(f"N_max={n_max:g}: running minimum {best_ratio:.6g}")

    logger.info(f"Resonance scan up to N={n_cap:g}: min ratio {best_ratio:.6g} over {total} triples")
    return ResonanceReport(params, float(n_cap), best_ratio, best_triple, total)


def resonance_zero_set(params: EquationParams, resolution: int) -> np.ndarray:
    """
    Points of the ellipse xi1^2 + xi1 xi2 + xi2^2 = 3 alpha / (5 beta) where the
    quadratic factor of h vanishes; empty when the right-hand side is <= 0.

    Returns:
        Array of shape (m, 2)
    """
    r2 = 3.0 * params.alpha / (5.0 * params.beta)
    if r2 <= 0 or resolution < 1:
        return np.empty((0, 2))
    theta = 2.0 * np.pi * np.arange(resolution) / resolution
    # xi1^2 + xi1 xi2 + xi2^2 = (3/2) u^2 + (1/2) v^2 with u, v the rotated coordinates
    u = np.sqrt(2.0 * r2 / 3.0) * np.cos(theta)
    v = np.sqrt(2.0 * r2) * np.sin(theta)
    return np.stack([(u + v) / np.sqrt(2.0), (u - v) / np.sqrt(2.0)], axis=1)


def resonant_scale(n1: float, n2: float, n3: float, params: EquationParams,
                   samples: int = 2048, seed: int = 0) -> float:
    """Dyadic label of the median |h| over zero-sum triples with |xi_j| in [N_j, 2 N_j)"""
    rng = keyed_rng(seed, "resonant_scale")
    xi1 = _annulus(rng, n1, 16 * samples)
    xi2 = _annulus(rng, n2, 16 * samples)
    xi3 = -xi1 - xi2
    keep = (dyadic_label(xi3) == n3) & (np.abs(xi3) > 0)
    if not np.any(keep):
        raise ValueError(f"no zero-sum triples in frequency block ({n1}, {n2}, {n3})")
    h = np.abs(resonance_h(xi1[keep][:samples], xi2[keep][:samples], params))
    return float(dyadic_label(np.median(h)))
