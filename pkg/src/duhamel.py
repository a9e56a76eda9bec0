"""
Time cutoff, Duhamel map, Picard iteration and measured contraction/Lipschitz constants
"""

import logging
from typing import Callable, Optional, Tuple

import numpy as np

from src.dispersion import symbol_p
from src.exceptions import DivergenceError
from src.models import (
    CutoffSpec,
    EquationParams,
    FixedPointReport,
    NormSpec,
    SpectralField,
    Trajectory,
)
from src.propagator import nonlinear_term
from src.seeding import keyed_rng
from src.spectral_core import dealiased_product, hs_norm, random_band_limited, spectral_derivative

logger = logging.getLogger(__name__)

MIN_SUPPORT_POINTS = 32
DIVERGENCE_RUN = 3
ROUNDOFF_FLOOR = 1e-12


def _g(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, np.exp(-1.0 / safe), 0.0)


def bump_psi(t):
    """Smooth even cutoff: 1 on |t| <= 1/2, 0 on |t| >= 1"""
    a = np.abs(np.asarray(t, dtype=float))
    rise = _g(2.0 - 2.0 * a)
    fall = _g(2.0 * a - 1.0)
    value = rise / (rise + fall)
    return value if value.ndim else float(value)


def time_lattice(cutoff: CutoffSpec) -> np.ndarray:
    """n_time uniform points on [-delta, delta), t=0 at index n_time/2"""
    return -cutoff.delta + cutoff.dt * np.arange(cutoff.n_time)


def _check_lattice(times: np.ndarray, cutoff: CutoffSpec):
    if len(times) != cutoff.n_time or not np.allclose(times, time_lattice(cutoff), atol=1e-12 * cutoff.delta):
        raise ValueError("trajectory is not sampled on the cutoff's time lattice")
    inside = int(np.count_nonzero(np.abs(times) < cutoff.delta))
    if inside < MIN_SUPPORT_POINTS:
        raise ValueError(f"time lattice too coarse: {inside} points in the cutoff support, need {MIN_SUPPORT_POINTS}")


def _window(cutoff: CutoffSpec) -> np.ndarray:
    return bump_psi(time_lattice(cutoff) / cutoff.delta)


def _cumulative_from_origin(values: np.ndarray, dt: float, origin: int) -> np.ndarray:
    """
    int_{t_origin}^{t_m} of sampled values for every m, fourth order.

    Each cell uses the cubic through four neighbouring samples, one-sided at the ends.
    """
    n = values.shape[0]
    cells = np.empty((n - 1,) + values.shape[1:], dtype=complex)
    g = values
    cells[1:n - 2] = (-g[0:n - 3] + 13.0 * g[1:n - 2] + 13.0 * g[2:n - 1] - g[3:n]) / 24.0
    cells[0] = (9.0 * g[0] + 19.0 * g[1] - 5.0 * g[2] + g[3]) / 24.0
    cells[n - 2] = (g[n - 4] - 5.0 * g[n - 3] + 19.0 * g[n - 2] + 9.0 * g[n - 1]) / 24.0
    cells *= dt
    running = np.zeros_like(values, dtype=complex)
    running[origin + 1:] = np.cumsum(cells[origin:], axis=0)
    running[:origin] = -np.cumsum(cells[:origin][::-1], axis=0)[::-1]
    return running


def _integrate_forcing(forcing: Callable[[int], np.ndarray], cutoff: CutoffSpec,
                       params: EquationParams, grid) -> np.ndarray:
    """psi(t/delta) int_0^t W(t - t') F(t') dt' on the lattice, W applied exactly"""
    times = time_lattice(cutoff)
    p = symbol_p(grid.frequencies, params)
    phases = np.exp(1j * np.outer(times, p))
    integrand = np.stack([forcing(m) for m in range(cutoff.n_time)]) * np.conj(phases)
    integral = _cumulative_from_origin(integrand, cutoff.dt, cutoff.n_time // 2)
    return _window(cutoff)[:, None] * phases * integral


def duhamel_integral(forcing: Trajectory, cutoff: CutoffSpec, params: EquationParams) -> Trajectory:
    """psi(t/delta) int_0^t W(t - t') F(t') dt' for a forcing sampled on the cutoff lattice"""
    _check_lattice(forcing.times, cutoff)
    states = forcing.states
    coeffs = _integrate_forcing(lambda m: states[m].coeffs, cutoff, params, forcing.grid)
    return Trajectory.from_array(time_lattice(cutoff), coeffs, forcing.grid, params)


def duhamel_map(u: Trajectory, u0: SpectralField, cutoff: CutoffSpec, params: EquationParams) -> Trajectory:
    """
    T(u)(t) = psi(t/delta) W(t) u0 + psi(t/delta) int_0^t W(t - t') N(u(t')) dt'
    with N(u) = -u u_x (Kawahara) or -u^2 u_x (modified Kawahara).
    """
    _check_lattice(u.times, cutoff)
    grid = u0.grid
    times = time_lattice(cutoff)
    linear = _window(cutoff)[:, None] * np.exp(1j * np.outer(times, symbol_p(grid.frequencies, params))) * u0.coeffs
    states = u.states
    integral = _integrate_forcing(lambda m: nonlinear_term(states[m], params).coeffs, cutoff, params, grid)
    return Trajectory.from_array(times, linear + integral, grid, params)


def duhamel_bilinear(a: Trajectory, b: Trajectory, cutoff: CutoffSpec, params: EquationParams) -> Trajectory:
    """psi(t/delta) int_0^t W(t - t') (-1/2 d/dx (a b)) dt'"""
    _check_lattice(a.times, cutoff)
    grid = a.grid

    def forcing(m: int) -> np.ndarray:
        return spectral_derivative(dealiased_product(a.states[m], b.states[m]), 1).coeffs * -0.5

    return Trajectory.from_array(time_lattice(cutoff), _integrate_forcing(forcing, cutoff, params, grid), grid, params)


def free_evolution(u0: SpectralField, cutoff: CutoffSpec, params: EquationParams,
                   windowed: bool = False) -> Trajectory:
    """W(t) u0 on the cutoff lattice, optionally multiplied by psi(t/delta)"""
    times = time_lattice(cutoff)
    coeffs = np.exp(1j * np.outer(times, symbol_p(u0.grid.frequencies, params))) * u0.coeffs
    if windowed:
        coeffs = _window(cutoff)[:, None] * coeffs
    return Trajectory.from_array(times, coeffs, u0.grid, params)


def zero_trajectory(u0: SpectralField, cutoff: CutoffSpec, params: EquationParams) -> Trajectory:
    return Trajectory.from_array(time_lattice(cutoff), np.zeros((cutoff.n_time, u0.grid.n), dtype=complex),
                                 u0.grid, params)


def xsb_distance(u: Trajectory, v: Trajectory, cutoff: CutoffSpec, norm: NormSpec) -> float:
    """Discrete X_{s,b} norm of u - v; the iterates already carry the time cutoff"""
    from src.xsb import spacetime_spectrum, xsb_norm
    return xsb_norm(spacetime_spectrum(u - v, cutoff, apply_window=False), norm)


def _geometric_ratio(residuals) -> float:
    r = np.asarray(residuals, dtype=float)
    pairs = [(a, b) for a, b in zip(r[:-1], r[1:]) if a > 0 and b > 0]
    if not pairs:
        return 0.0
    return float(np.exp(np.mean([np.log(b / a) for a, b in pairs])))


def picard_iterate(u0: SpectralField, cutoff: CutoffSpec, params: EquationParams, norm: NormSpec,
                   k_max: int = 50, tol: float = 1e-10) -> Tuple[Trajectory, FixedPointReport]:
    """
    u^(0) = 0, u^(k+1) = T(u^(k)) until the X_{s,b} distance of successive iterates drops below tol.

    Raises:
        DivergenceError: Residuals grew for three consecutive iterations or became non-finite
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    current = zero_trajectory(u0, cutoff, params)
    residuals = []
    growth = 0
    converged = False
    for k in range(k_max):
        nxt = duhamel_map(current, u0, cutoff, params)
        residual = xsb_distance(nxt, current, cutoff, norm)
        if not np.isfinite(residual):
            raise DivergenceError(f"Picard iterate {k + 1} is not finite", residuals)
        if residuals and residual > residuals[-1] and residual > ROUNDOFF_FLOOR * max(residuals):
            growth += 1
        else:
            growth = 0
        residuals.append(residual)
        current = nxt
        logger.debug(f"Picard iteration {k + 1}: residual {residual:.3e}")
        if growth >= DIVERGENCE_RUN:
            raise DivergenceError(f"Picard residuals grew for {DIVERGENCE_RUN} consecutive iterations", residuals)
        if residual < tol:
            converged = True
            break
    report = FixedPointReport(residuals, _geometric_ratio(residuals), converged)
    logger.info(f"Picard: {report.iterations} iterations, ratio {report.contraction_factor:.3g}, converged={converged}")
    return current, report


def linear_constant(u0: SpectralField, cutoff: CutoffSpec, params: EquationParams, norm: NormSpec) -> float:
    """Measured c0 in ||psi W u0||_{X_{s,b}} <= c0 delta^{(1-2b)/2} ||u0||_{H^s}"""
    from src.xsb import spacetime_spectrum, xsb_norm
    data = hs_norm(u0, norm.s)
    if data == 0:
        return 0.0
    value = xsb_norm(spacetime_spectrum(free_evolution(u0, cutoff, params), cutoff), norm)
    return value / (cutoff.delta ** ((1.0 - 2.0 * norm.b) / 2.0) * data)


def _probe(u0: SpectralField, cutoff: CutoffSpec, params: EquationParams, norm: NormSpec,
           radius: float, rng: np.random.Generator, k_max: int) -> Trajectory:
    grid = u0.grid
    w1 = random_band_limited(grid, k_max, rng)
    w2 = random_band_limited(grid, k_max, rng)
    times = time_lattice(cutoff)
    ramp = (times / cutoff.delta)[:, None]
    phases = np.exp(1j * np.outer(times, symbol_p(grid.frequencies, params)))
    coeffs = _window(cutoff)[:, None] * phases * (w1.coeffs + ramp * w2.coeffs)
    probe = Trajectory.from_array(times, coeffs, grid, params)
    size = xsb_distance(probe, zero_trajectory(u0, cutoff, params), cutoff, norm)
    return Trajectory.from_array(times, coeffs * (radius / size), grid, params)


def contraction_factor(u0: SpectralField, cutoff: CutoffSpec, params: EquationParams, norm: NormSpec,
                       probes: int, seed: int, probe_modes: Optional[int] = None) -> float:
    """
    max ||T(u) - T(v)|| / ||u - v|| over random probe pairs on the sphere of radius
    2 c0 delta^{(1-2b)/2} ||u0||_{H^s}, distances in the discrete X_{s,b} norm.
    """
    if probes < 2:
        raise ValueError("probes must be >= 2")
    c0 = linear_constant(u0, cutoff, params, norm)
    radius = 2.0 * c0 * cutoff.delta ** ((1.0 - 2.0 * norm.b) / 2.0) * hs_norm(u0, norm.s)
    if radius == 0:
        return 0.0
    k_max = probe_modes or max(1, u0.grid.n // 8)
    worst = 0.0
    for i in range(probes):
        rng = keyed_rng(seed, "contraction", i)
        u = _probe(u0, cutoff, params, norm, radius, rng, k_max)
        v = _probe(u0, cutoff, params, norm, radius, rng, k_max)
        gap = xsb_distance(u, v, cutoff, norm)
        if gap == 0:
            continue
        image_gap = xsb_distance(duhamel_map(u, u0, cutoff, params), duhamel_map(v, u0, cutoff, params), cutoff, norm)
        worst = max(worst, image_gap / gap)
    logger.info(f"Contraction factor over {probes} probe pairs: {worst:.4g} (c0={c0:.4g})")
    return worst


def lipschitz_data_dependence(u0: SpectralField, v0: SpectralField, cutoff: CutoffSpec, params: EquationParams,
                              norm: NormSpec, k_max: int = 50, tol: float = 1e-12) -> float:
    """sup over lattice t in [0, delta/2] of ||u(t) - v(t)||_{H^s} / ||u0 - v0||_{H^s}"""
    data_gap = hs_norm(v0 - u0, norm.s)
    if data_gap == 0:
        return 0.0
    u, _ = picard_iterate(u0, cutoff, params, norm, k_max, tol)
    v, _ = picard_iterate(v0, cutoff, params, norm, k_max, tol)
    times = u.times
    window = (times >= -1e-12) & (times <= 0.5 * cutoff.delta + 1e-12)
    gaps = [hs_norm(a - b, norm.s) for a, b, keep in zip(u.states, v.states, window) if keep]
    return float(max(gaps) / data_gap)
