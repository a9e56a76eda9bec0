"""
Linear group W(t), integrating-factor RK4 time stepping, conserved quantities
and Petviashvili traveling-wave profiles.
"""

import logging
from typing import Optional

import numpy as np

from src.dispersion import symbol_p
from src.exceptions import BlowUpError, ConvergenceError
from src.models import EquationKind, EquationParams, Grid, InvariantLog, SpectralField, Trajectory
from src.spectral_core import (
    dealiased_product,
    from_function,
    hs_norm,
    spectral_derivative,
    spectral_integral,
)

logger = logging.getLogger(__name__)

DEFAULT_BLOWUP_FACTOR = 1e6


def _phase(grid: Grid, t: float, params: EquationParams) -> np.ndarray:
    return np.exp(1j * t * symbol_p(grid.frequencies, params))


def linear_flow(field: SpectralField, t: float, params: EquationParams) -> SpectralField:
    """W(t): multiply each coefficient by exp(i t p(xi_k))"""
    return SpectralField(field.coeffs * _phase(field.grid, t, params), field.grid, field.t + t)


def nonlinear_term(field: SpectralField, params: EquationParams) -> SpectralField:
    """-d/dx(u^2/2) for Kawahara, -d/dx(u^3/3) for modified Kawahara"""
    if params.kind is EquationKind.KAWAHARA:
        power = dealiased_product(field, field).scaled(0.5)
    else:
        power = dealiased_product(field, field, field).scaled(1.0 / 3.0)
    return spectral_derivative(power, 1).scaled(-1.0)


def step_ifrk4(state: SpectralField, dt: float, params: EquationParams,
               nonlinear: bool = True) -> SpectralField:
    """
    One integrating-factor RK4 step for v(t) = W(-t) u, linear phases exact.

    Args:
        state: Current state
        dt: Step size > 0
        params: Equation coefficients
        nonlinear: When False only the linear group acts

    Returns:
        State at t + dt
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    grid = state.grid
    e_half = _phase(grid, 0.5 * dt, params)
    e_full = e_half * e_half
    u = state.coeffs
    if not nonlinear:
        return SpectralField(e_full * u, grid, state.t + dt)

    def rhs(c: np.ndarray) -> np.ndarray:
        return nonlinear_term(SpectralField(c, grid), params).coeffs

    k1 = rhs(u)
    k2 = rhs(e_half * (u + 0.5 * dt * k1))
    k3 = rhs(e_half * u + 0.5 * dt * k2)
    k4 = rhs(e_full * u + dt * e_half * k3)
    new = e_full * u + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)
    return SpectralField(new, grid, state.t + dt)


def solve(u0: SpectralField, T: float, dt: float, params: EquationParams, sample_every: int = 1,
          blowup_factor: float = DEFAULT_BLOWUP_FACTOR, norm_index: float = 0.0,
          nonlinear: bool = True) -> Trajectory:
    """
    Integrate from t=0 to T with IFRK4.

    The step is shrunk to T/ceil(T/dt) so that T is hit exactly. States are
    recorded at t=0, every sample_every steps, and at t=T.

    Raises:
        BlowUpError: The H^norm_index norm exceeded blowup_factor times its initial value
    """
    if not T > 0 or not dt > 0:
        raise ValueError(f"T and dt must be positive, got T={T}, dt={dt}")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    steps = int(np.ceil(T / dt - 1e-9))
    h = T / steps
    cap = blowup_factor * hs_norm(u0, norm_index)

    state = SpectralField(u0.coeffs.copy(), u0.grid, 0.0)
    times, states = [0.0], [state]
    for i in range(1, steps + 1):
        state = step_ifrk4(state, h, params, nonlinear=nonlinear)
        state.t = i * h
        norm = hs_norm(state, norm_index)
        if not np.isfinite(norm) or norm > cap:
            raise BlowUpError(state.t, norm, cap)
        if i % sample_every == 0 or i == steps:
            times.append(state.t)
            states.append(state)
    logger.debug(f"solve: {steps} steps of {h:.3g} to T={T:g}, {len(states)} samples")
    return Trajectory(np.array(times), states, params)


def hamiltonian(field: SpectralField, params: EquationParams) -> float:
    """
    H[u] = int(-u^3/6 + (alpha/2) u_x^2 - (beta/2) u_xx^2) dx for Kawahara and
    int(-u^4/12 + ...) for modified Kawahara, so that u_t = d/dx (dH/du).
    """
    L = field.grid.box_length
    ux = spectral_derivative(field, 1).coeffs
    uxx = spectral_derivative(field, 2).coeffs
    gradient = L * np.sum(np.abs(ux) ** 2)
    curvature = L * np.sum(np.abs(uxx) ** 2)
    if params.kind is EquationKind.KAWAHARA:
        potential = -spectral_integral(field, 3) / 6.0
    else:
        potential = -spectral_integral(field, 4) / 12.0
    return float(potential + 0.5 * params.alpha * gradient - 0.5 * params.beta * curvature)


def invariants(traj: Trajectory) -> InvariantLog:
    """Mass, L^2 and Hamiltonian at every trajectory time"""
    L = traj.grid.box_length
    mass = np.array([L * s.coeffs[0].real for s in traj.states])
    l2 = np.array([L * np.sum(np.abs(s.coeffs) ** 2) for s in traj.states])
    ham = np.array([hamiltonian(s, traj.params) for s in traj.states])
    return InvariantLog(traj.times.copy(), mass, l2, ham)


def _profile_power(phi: SpectralField, params: EquationParams) -> np.ndarray:
    if params.kind is EquationKind.KAWAHARA:
        return dealiased_product(phi, phi).coeffs * 0.5
    return dealiased_product(phi, phi, phi).coeffs / 3.0


def profile_symbol(grid: Grid, c: float, params: EquationParams) -> np.ndarray:
    """M(xi) = c + alpha xi^2 - beta xi^4, so that M phi_hat = (phi^k / k)_hat"""
    xi = grid.frequencies
    return c + params.alpha * xi ** 2 - params.beta * xi ** 4


def profile_residual(phi: SpectralField, c: float, params: EquationParams) -> float:
    """Relative spectral residual of -c phi + phi^k/k + alpha phi'' + beta phi'''' = 0"""
    m_phi = profile_symbol(phi.grid, c, params) * phi.coeffs
    residual = m_phi - _profile_power(phi, params)
    residual[phi.grid.nyquist_index] = 0.0
    scale = np.linalg.norm(m_phi)
    return float(np.linalg.norm(residual) / scale) if scale > 0 else float(np.linalg.norm(residual))


def traveling_wave_petviashvili(c: float, params: EquationParams, grid: Grid, gamma: Optional[float] = None,
                                tol: float = 1e-10, max_iter: int = 500,
                                initial_guess: Optional[SpectralField] = None) -> SpectralField:
    """
    Traveling-wave profile phi(x - c t) by Petviashvili iteration.

    Args:
        c: Wave speed
        params: Equation coefficients
        grid: Periodic grid
        gamma: Stabilizing exponent (2 for quadratic, 3/2 for cubic by default)
        tol: Target relative residual
        max_iter: Iteration budget
        initial_guess: Starting profile; a sech^2 bump centred at x = 0 when omitted

    Returns:
        Even profile centred at x = 0; translate it to place the crest elsewhere

    Raises:
        ValueError: Singular profile symbol or degenerate (zero) iterate
        ConvergenceError: Residual above tol after max_iter iterations
    """
    if gamma is None:
        gamma = 2.0 if params.kind is EquationKind.KAWAHARA else 1.5
    symbol = profile_symbol(grid, c, params)
    if np.min(np.abs(symbol)) < 1e-10 * max(1.0, np.max(np.abs(symbol))):
        raise ValueError(f"profile symbol c + alpha xi^2 - beta xi^4 vanishes on the lattice for c={c}")

    if initial_guess is None:
        width = np.sqrt(abs(c)) / 2.0
        L = grid.box_length
        initial_guess = from_function(
            grid, lambda x: 3.0 * abs(c) / np.cosh(width * (np.mod(x + L / 2, L) - L / 2)) ** 2)
    # real coefficients <=> even about x = 0; this removes the translation mode
    phi = initial_guess.coeffs.real.astype(complex)
    phi[grid.nyquist_index] = 0.0

    residual = np.inf
    for iteration in range(1, max_iter + 1):
        field = SpectralField(phi, grid)
        power = _profile_power(field, params)
        numerator = np.vdot(phi, symbol * phi).real
        denominator = np.vdot(phi, power).real
        if denominator == 0 or numerator == 0:
            raise ValueError("Petviashvili iteration is degenerate: stabilizing factor undefined")
        stabilizer = (numerator / denominator) ** gamma
        phi = (stabilizer * power / symbol).real.astype(complex)
        phi[grid.nyquist_index] = 0.0
        residual = profile_residual(SpectralField(phi, grid), c, params)
        logger.debug(f"Petviashvili iteration {iteration}: residual {residual:.3e}")
        if residual < tol:
            logger.info(f"Petviashvili converged in {iteration} iterations (residual {residual:.2e})")
            return SpectralField(phi, grid)
    raise ConvergenceError(f"Petviashvili did not converge in {max_iter} iterations (residual {residual:.3e})")
