"""
Periodic grids, spectral transforms, Sobolev norms and dealiased products.

Coefficients are averaged integrals, u_hat(xi_k) = (1/L) * int_0^L u e^{-i xi_k x} dx,
approximated by the rectangle rule, so u(x) = sum_k u_hat(xi_k) e^{i xi_k x}.
"""

import logging
from typing import Callable, Optional

import numpy as np

from src.models import Grid, RealField, SpectralField

logger = logging.getLogger(__name__)


def make_grid(n: int, box_length: float) -> Grid:
    """
    Build a periodic grid

    Args:
        n: Number of points, a power of two >= 8
        box_length: Domain length L > 0

    Returns:
        Grid on [0, L)
    """
    if not isinstance(n, (int, np.integer)) or n < 8 or (n & (n - 1)) != 0:
        raise ValueError(f"n must be a power of two >= 8, got {n}")
    if not box_length > 0:
        raise ValueError(f"box_length must be positive, got {box_length}")
    return Grid(int(n), float(box_length))


def to_spectral(field: RealField, t: float = 0.0) -> SpectralField:
    return SpectralField(np.fft.fft(field.values) / field.grid.n, field.grid, t)


def to_physical(field: SpectralField) -> RealField:
    return RealField(np.fft.ifft(field.coeffs).real * field.grid.n, field.grid)


def from_function(grid: Grid, f: Callable[[np.ndarray], np.ndarray], t: float = 0.0) -> SpectralField:
    """Spectral coefficients of f sampled on the grid"""
    return to_spectral(RealField(f(grid.x), grid), t)


def japanese_bracket(xi: np.ndarray) -> np.ndarray:
    """<xi> = 1 + |xi|"""
    return 1.0 + np.abs(xi)


def hs_norm(field: SpectralField, s: float) -> float:
    """(L * sum_k <xi_k>^{2s} |u_hat(xi_k)|^2)^{1/2}"""
    weights = japanese_bracket(field.grid.frequencies) ** (2.0 * s)
    return float(np.sqrt(field.grid.box_length * np.sum(weights * np.abs(field.coeffs) ** 2)))


def spectral_derivative(field: SpectralField, order: int = 1) -> SpectralField:
    """d^order/dx^order with the unpaired Nyquist mode removed"""
    multiplier = (1j * field.grid.frequencies) ** order
    multiplier[field.grid.nyquist_index] = 0.0
    return field.with_coeffs(field.coeffs * multiplier)


def translate(field: SpectralField, shift: float) -> SpectralField:
    """u(x) -> u(x - shift)"""
    return field.with_coeffs(field.coeffs * np.exp(-1j * field.grid.frequencies * shift))


def random_band_limited(grid: Grid, k_max: int, rng: np.random.Generator,
                        decay: float = 0.0) -> SpectralField:
    """
    Random real field with modes 1 <= |k| <= k_max.

    Args:
        grid: Target grid
        k_max: Highest retained integer wavenumber (< n/2)
        rng: Random generator
        decay: Amplitudes scale like <xi>^{-decay}

    Returns:
        Conjugate-symmetric SpectralField with zero mean
    """
    if not 1 <= k_max < grid.n // 2:
        raise ValueError(f"k_max must lie in [1, {grid.n // 2 - 1}], got {k_max}")
    coeffs = np.zeros(grid.n, dtype=complex)
    ks = np.arange(1, k_max + 1)
    amps = (rng.standard_normal(k_max) + 1j * rng.standard_normal(k_max)) / np.sqrt(2.0)
    amps *= (1.0 + ks * grid.dxi) ** (-decay)
    coeffs[ks] = amps
    coeffs[-ks] = np.conj(amps)
    return SpectralField(coeffs, grid)


def pad_spectrum(coeffs: np.ndarray, m: int) -> np.ndarray:
    """Embed n FFT-ordered coefficients into length m >= n, dropping the Nyquist mode"""
    n = coeffs.shape[-1]
    half = n // 2
    out = np.zeros(coeffs.shape[:-1] + (m,), dtype=complex)
    out[..., :half] = coeffs[..., :half]
    out[..., m - half + 1:] = coeffs[..., half + 1:]
    return out


def truncate_spectrum(coeffs: np.ndarray, n: int) -> np.ndarray:
    """Inverse of pad_spectrum; the Nyquist mode of the result is zero"""
    m = coeffs.shape[-1]
    half = n // 2
    out = np.zeros(coeffs.shape[:-1] + (n,), dtype=complex)
    out[..., :half] = coeffs[..., :half]
    out[..., half + 1:] = coeffs[..., m - half + 1:]
    return out


def padded_physical(field: SpectralField, factor: int) -> np.ndarray:
    """Complex samples of u on a grid refined by an integer factor"""
    m = field.grid.n * factor
    return np.fft.ifft(pad_spectrum(field.coeffs, m)) * m


def dealiased_product(a: SpectralField, b: SpectralField,
                      c: Optional[SpectralField] = None) -> SpectralField:
    """
    Alias-free spectral coefficients of a*b or a*b*c.

    Inputs are zero-padded to 3n/2 points for two factors and 2n points for
    three, multiplied pointwise and truncated back; the Nyquist mode is zeroed.

    Args:
        a, b: Factors on the same grid
        c: Optional third factor

    Returns:
        SpectralField of the product
    """
    factors = [a, b] if c is None else [a, b, c]
    grid = a.grid
    if any(f.grid != grid for f in factors):
        raise ValueError("dealiased_product requires all factors on the same grid")
    m = (3 * grid.n) // 2 if c is None else 2 * grid.n
    product = np.ones(m, dtype=complex)
    for f in factors:
        product *= np.fft.ifft(pad_spectrum(f.coeffs, m)) * m
    return SpectralField(truncate_spectrum(np.fft.fft(product) / m, grid.n), grid, a.t)


def spectral_integral(field: SpectralField, power: int) -> float:
    """int_0^L u^power dx, exact for band-limited u and power <= 4"""
    factor = max(1, (power + 1) // 2)
    samples = padded_physical(field, factor).real
    return float(field.grid.box_length * np.mean(samples ** power))
