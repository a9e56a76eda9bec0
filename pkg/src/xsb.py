"""
Discrete X_{s,b} norms and measured bilinear, trilinear and asymmetric estimates.

Space-time amplitudes live on a sheared lattice: row k (frequency xi_k) is a
window of the global tau lattice, tau = m * dtau with dtau = 2*pi / T_w, centred
on the characteristic tau = p(xi_k). The time transform is
F(xi, tau) = int u_hat(xi, t) e^{-i tau t} dt, so
||F||^2_{X_{s,b}} = L * (dtau / 2 pi) * sum <xi>^{2s} <tau - p(xi)>^{2b} |F|^2.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.signal import fftconvolve
from scipy.stats import linregress

from src.dispersion import symbol_p
from src.duhamel import bump_psi, duhamel_integral, free_evolution
from src.exceptions import EmptySupportError
from src.models import (
    CutoffSpec,
    EquationParams,
    EstimateKind,
    EstimateSample,
    Grid,
    NormSpec,
    PairRegime,
    SpaceTimeField,
    SpectralField,
    Trajectory,
)
from src.seeding import keyed_rng
from src.spectral_core import hs_norm, japanese_bracket

logger = logging.getLogger(__name__)

DEFAULT_PAD = 4
BOUNDED_SLOPE = 0.1
SCAN_COLUMNS = ["estimate", "s", "b", "N", "regime", "seed", "ratio"]


def characteristic_offsets(grid: Grid, params: EquationParams, dtau: float, n_tau: int) -> np.ndarray:
    """First global tau index of each row so that the row window is centred on p(xi_k)"""
    centre = np.round(symbol_p(grid.frequencies, params) / dtau).astype(np.int64)
    return centre - n_tau // 2


def _modulation(xi: np.ndarray, tau_index: np.ndarray, dtau: float, params: EquationParams) -> np.ndarray:
    """tau - p(xi), subtracted in lattice units"""
    centre = symbol_p(xi, params) / dtau
    if np.ndim(tau_index) == 2:
        centre = centre[:, None]
    return (tau_index - centre) * dtau


def _weights(xi: np.ndarray, tau_index: np.ndarray, dtau: float, params: EquationParams,
             s: float, b: float) -> np.ndarray:
    lam = _modulation(xi, tau_index, dtau, params)
    xi_weight = japanese_bracket(xi) ** s
    if lam.ndim == 2:
        xi_weight = xi_weight[:, None]
    return xi_weight * japanese_bracket(lam) ** b


# --------------------------------------------------------------------------- spectrum and norm

def spacetime_spectrum(traj: Trajectory, cutoff: CutoffSpec, apply_window: bool = True,
                       pad: int = DEFAULT_PAD) -> SpaceTimeField:
    """
    Time transform of a trajectory onto the characteristic-aligned lattice.

    Args:
        traj: Samples on a uniform lattice t_l = (m0 + l) h with integer m0
        cutoff: Time localization; its window multiplies the samples when apply_window is set
        apply_window: Multiply by psi(t/delta) before transforming
        pad: Zero padding factor in time; T_w = pad * n_times * h

    Returns:
        SpaceTimeField with pad * n_times tau cells per row

    Raises:
        ValueError: Nonuniform lattice, or a lattice that does not pass through t = 0
    """
    times = traj.times
    if len(times) < 2:
        raise ValueError("spacetime_spectrum needs at least two time samples")
    steps = np.diff(times)
    h = float(np.mean(steps))
    if not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        raise ValueError("trajectory time lattice is not uniform")
    m0 = int(np.round(times[0] / h))
    if abs(times[0] - m0 * h) > 1e-9 * h:
        raise ValueError("trajectory time lattice must contain t = 0 as a lattice point")
    if pad < 1:
        raise ValueError("pad must be >= 1")

    grid = traj.grid
    n_t = len(times)
    m_t = pad * n_t
    time_window = m_t * h
    dtau = 2.0 * np.pi / time_window
    offsets = characteristic_offsets(grid, traj.params, dtau, m_t)

    samples = traj.coeffs
    if apply_window:
        samples = samples * bump_psi(times / cutoff.delta)[:, None]

    # demodulate by the row offset, e^{-2 pi i c_k q / M} with global time index q = m0 + l
    q = np.mod(m0 + np.arange(n_t), m_t).astype(np.int64)
    c = np.mod(offsets, m_t)
    demod = np.exp(-2j * np.pi * np.mod(np.outer(q, c), m_t) / m_t)
    buffer = np.zeros((m_t, grid.n), dtype=complex)
    buffer[:n_t] = samples * demod
    spectrum = np.fft.fft(buffer, axis=0)
    # e^{-2 pi i j m0 / M} from the lattice origin
    j = np.arange(m_t)
    origin = np.exp(-2j * np.pi * np.mod(j * m0, m_t) / m_t)
    amps = h * (spectrum * origin[:, None]).T
    return SpaceTimeField(amps, offsets, grid, time_window, traj.params)


def xsb_norm(f: SpaceTimeField, norm: NormSpec) -> float:
    """(L (dtau / 2 pi) sum <xi>^{2s} <tau - p(xi)>^{2b} |F|^2)^{1/2}"""
    weights = _weights(f.grid.frequencies, f.tau_index, f.dtau, f.params, norm.s, norm.b)
    total = np.sum((weights * np.abs(f.amps)) ** 2)
    return float(np.sqrt(f.grid.box_length * f.dtau / (2.0 * np.pi) * total))


def single_mode_field(grid: Grid, wavenumber: int, detune: int, amplitude: complex, time_window: float,
                      params: EquationParams, n_tau: int = 16) -> SpaceTimeField:
    """
    One nonzero cell at xi = wavenumber * dxi and global tau index round(p(xi)/dtau) + detune.
    """
    if not -grid.n // 2 < wavenumber < grid.n // 2:
        raise ValueError(f"wavenumber {wavenumber} outside the grid band")
    j = n_tau // 2 + detune
    if not 0 <= j < n_tau:
        raise ValueError(f"detune {detune} outside the row window of {n_tau} cells")
    dtau = 2.0 * np.pi / time_window
    amps = np.zeros((grid.n, n_tau), dtype=complex)
    amps[wavenumber % grid.n, j] = amplitude
    return SpaceTimeField(amps, characteristic_offsets(grid, params, dtau, n_tau), grid, time_window, params)


def mode_location(f: SpaceTimeField) -> Tuple[float, float]:
    """(xi, tau) of the largest cell"""
    k, j = np.unravel_index(int(np.argmax(np.abs(f.amps))), f.amps.shape)
    return float(f.grid.frequencies[k]), float(f.tau_index[k, j] * f.dtau)


def _mode_weight(mode: Tuple[float, float], s: float, b: float, params: EquationParams) -> float:
    xi, tau = mode
    return float(japanese_bracket(xi) ** s * japanese_bracket(tau - symbol_p(xi, params)) ** b)


def single_mode_bilinear_ratio(m1: Tuple[float, float], m2: Tuple[float, float], norm: NormSpec,
                               params: EquationParams, dtau: float, box_length: float) -> float:
    """Closed form of bilinear_ratio for two single lattice modes"""
    out = (m1[0] + m2[0], m1[1] + m2[1])
    top = abs(out[0]) * _mode_weight(out, norm.s, norm.b - 1.0, params)
    bottom = _mode_weight(m1, norm.s, norm.b, params) * _mode_weight(m2, norm.s, norm.b, params)
    return top / bottom * np.sqrt(dtau / (2.0 * np.pi * box_length))


def single_mode_trilinear_ratio(m1: Tuple[float, float], m2: Tuple[float, float], m3: Tuple[float, float],
                                norm: NormSpec, params: EquationParams, dtau: float, box_length: float) -> float:
    """Closed form of trilinear_ratio for three single lattice modes"""
    out = (m1[0] + m2[0] + m3[0], m1[1] + m2[1] + m3[1])
    top = abs(out[0]) * _mode_weight(out, norm.s, norm.b - 1.0, params)
    bottom = np.prod([_mode_weight(m, norm.s, norm.b, params) for m in (m1, m2, m3)])
    return top / bottom * dtau / (2.0 * np.pi * box_length)


def single_mode_asym_ratio(m1: Tuple[float, float], m2: Tuple[float, float], s: float, eps: float,
                           params: EquationParams, dtau: float, box_length: float) -> float:
    """Closed form of asym_bilinear_ratio for two single lattice modes"""
    bottom = _mode_weight(m1, -0.5, 0.5 - eps, params) * _mode_weight(m2, s, 0.5 + eps, params)
    return np.sqrt(dtau / (2.0 * np.pi * box_length)) / bottom


# --------------------------------------------------------------------------- products

@dataclass
class SparseSpaceTime:
    """Sparse space-time amplitudes: integer wavenumber, global tau index, amplitude"""
    wavenumbers: np.ndarray
    tau_index: np.ndarray
    amps: np.ndarray
    dxi: float
    dtau: float
    box_length: float
    params: EquationParams

    @property
    def frequencies(self) -> np.ndarray:
        return self.wavenumbers * self.dxi

    def norm(self, s: float, b: float) -> float:
        weights = _weights(self.frequencies, self.tau_index, self.dtau, self.params, s, b)
        total = np.sum((weights * np.abs(self.amps)) ** 2)
        return float(np.sqrt(self.box_length * self.dtau / (2.0 * np.pi) * total))

    def differentiated(self) -> "SparseSpaceTime":
        return SparseSpaceTime(self.wavenumbers, self.tau_index, 1j * self.frequencies * self.amps,
                               self.dxi, self.dtau, self.box_length, self.params)


@dataclass
class _Rows:
    """Rows of contiguous tau cells: wavenumber, first global tau index, data"""
    wavenumbers: np.ndarray
    starts: np.ndarray
    data: np.ndarray


def _field_rows(f: SpaceTimeField) -> _Rows:
    live = np.flatnonzero(np.any(f.amps != 0, axis=1))
    return _Rows(f.grid.wavenumbers[live].astype(np.int64), f.offsets[live], f.amps[live])


def _merge_rows(rows: _Rows) -> _Rows:
    """Sum rows sharing (wavenumber, start)"""
    keys = np.stack([rows.wavenumbers, rows.starts], axis=1)
    unique, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    if len(unique) == len(keys):
        return rows
    data = np.zeros((len(unique), rows.data.shape[1]), dtype=complex)
    np.add.at(data, inverse, rows.data)
    return _Rows(unique[:, 0], unique[:, 1], data)


def _convolve_rows(a: _Rows, b: _Rows, measure: float) -> _Rows:
    width = a.data.shape[1] + b.data.shape[1] - 1
    if len(a.starts) == 0 or len(b.starts) == 0:
        return _Rows(np.empty(0, np.int64), np.empty(0, np.int64), np.empty((0, width), complex))
    ks, starts, blocks = [], [], []
    for k, start, row in zip(a.wavenumbers, a.starts, a.data):
        blocks.append(fftconvolve(row[None, :], b.data, axes=1) * measure)
        ks.append(k + b.wavenumbers)
        starts.append(start + b.starts)
    return _merge_rows(_Rows(np.concatenate(ks), np.concatenate(starts), np.concatenate(blocks)))


def _accumulate(rows: _Rows) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten rows and sum coincident (wavenumber, tau) cells"""
    width = rows.data.shape[1]
    ks = np.repeat(rows.wavenumbers, width)
    taus = (rows.starts[:, None] + np.arange(width)[None, :]).ravel()
    amps = rows.data.ravel()
    if amps.size == 0:
        return ks, taus, amps
    k_lo, t_lo = ks.min(), taus.min()
    k_span = int(ks.max() - k_lo) + 1
    t_span = int(taus.max() - t_lo) + 1
    if k_span * t_span < 2 ** 62:
        keys = (ks - k_lo) * t_span + (taus - t_lo)
        unique, inverse = np.unique(keys, return_inverse=True)
        out_k = unique // t_span + k_lo
        out_t = unique % t_span + t_lo
    else:
        pairs, inverse = np.unique(np.stack([ks, taus], axis=1), axis=0, return_inverse=True)
        out_k, out_t = pairs[:, 0], pairs[:, 1]
    inverse = np.asarray(inverse).ravel()
    real = np.bincount(inverse, weights=amps.real, minlength=len(out_k))
    imag = np.bincount(inverse, weights=amps.imag, minlength=len(out_k))
    return out_k, out_t, real + 1j * imag


def spacetime_product(*fields: SpaceTimeField) -> SparseSpaceTime:
    """
    Space-time Fourier transform of the pointwise product of two or three fields.

    Full linear convolution in (xi, tau) with measure dtau / 2 pi per tau
    convolution; no output frequency is truncated.
    """
    if len(fields) < 2:
        raise ValueError("spacetime_product needs at least two fields")
    first = fields[0]
    if any(not first.same_lattice(f) for f in fields[1:]):
        raise ValueError("all factors must share one space-time lattice")
    measure = first.dtau / (2.0 * np.pi)
    rows = _field_rows(first)
    for f in fields[1:]:
        rows = _convolve_rows(rows, _field_rows(f), measure)
    ks, taus, amps = _accumulate(rows)
    return SparseSpaceTime(ks, taus, amps, first.grid.dxi, first.dtau, first.grid.box_length, first.params)


def _positive(value: float, what: str) -> float:
    if not value > 0:
        raise ValueError(f"zero denominator: {what} has vanishing norm")
    return value


def bilinear_ratio(u: SpaceTimeField, v: SpaceTimeField, norm: NormSpec) -> float:
    """||d/dx (u v)||_{X_{s,b-1}} / (||u||_{X_{s,b}} ||v||_{X_{s,b}})"""
    bottom = _positive(xsb_norm(u, norm), "u") * _positive(xsb_norm(v, norm), "v")
    top = spacetime_product(u, v).differentiated().norm(norm.s, norm.b - 1.0)
    return top / bottom


def trilinear_ratio(u1: SpaceTimeField, u2: SpaceTimeField, u3: SpaceTimeField, norm: NormSpec) -> float:
    """||d/dx (u1 u2 u3)||_{X_{s,b-1}} / prod ||u_j||_{X_{s,b}}"""
    bottom = 1.0
    for name, f in (("u1", u1), ("u2", u2), ("u3", u3)):
        bottom *= _positive(xsb_norm(f, norm), name)
    top = spacetime_product(u1, u2, u3).differentiated().norm(norm.s, norm.b - 1.0)
    return top / bottom


def asym_bilinear_ratio(u: SpaceTimeField, v: SpaceTimeField, s: float, eps: float) -> float:
    """||u v||_{L^2} / (||u||_{X_{-1/2, 1/2-eps}} ||v||_{X_{s, 1/2+eps}})"""
    if not 0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    bottom = (_positive(xsb_norm(u, NormSpec(-0.5, 0.5 - eps)), "u")
              * _positive(xsb_norm(v, NormSpec(s, 0.5 + eps)), "v"))
    return spacetime_product(u, v).norm(0.0, 0.0) / bottom


# --------------------------------------------------------------------------- linear estimates

def verify_linear_estimates(norm: NormSpec, delta_list: Sequence[float], data: Sequence[SpectralField],
                            params: EquationParams, n_time: int = 256, pad: int = DEFAULT_PAD) -> Dict:
    """
    Measure ||psi_delta W u0||_{X_{s,b}} / ||u0||_{H^s} and the Duhamel ratio
    ||psi_delta int_0^t W(t - t') F||_{X_{s,b}} / ||F||_{X_{s,b-1}} with F = psi_delta W u0.

    Args:
        norm: (s, b) with b > 1/2
        delta_list: Cutoff half-widths in (0, 1]
        data: Initial data
        params: Equation coefficients
        n_time: Time samples per cutoff lattice
        pad: Time zero padding

    Returns:
        Dict with the per-(delta, datum) table, maxima, the log-log slopes against
        delta and the measured constants c0 = ratio / delta^{(1-2b)/2}
    """
    if not norm.b > 0.5:
        raise ValueError(f"linear estimates need b > 1/2, got b={norm.b}")
    if any(not 0 < d <= 1 for d in delta_list):
        raise ValueError("every delta must lie in (0, 1]")

    rows = []
    for delta in delta_list:
        cutoff = CutoffSpec(float(delta), n_time)
        for index, u0 in enumerate(data):
            size = hs_norm(u0, norm.s)
            if size == 0:
                rows.append({"delta": delta, "datum": index, "homogeneous": 0.0, "duhamel": 0.0, "c0": 0.0})
                continue
            forcing = free_evolution(u0, cutoff, params, windowed=True)
            homogeneous = xsb_norm(spacetime_spectrum(forcing, cutoff, apply_window=False, pad=pad), norm) / size
            integral = duhamel_integral(forcing, cutoff, params)
            top = xsb_norm(spacetime_spectrum(integral, cutoff, apply_window=False, pad=pad), norm)
            bottom = xsb_norm(spacetime_spectrum(forcing, cutoff, apply_window=False, pad=pad),
                              NormSpec(norm.s, norm.b - 1.0))
            rows.append({"delta": delta, "datum": index, "homogeneous": homogeneous,
                         "duhamel": top / bottom if bottom > 0 else 0.0,
                         "c0": homogeneous / delta ** ((1.0 - 2.0 * norm.b) / 2.0)})

    table = pd.DataFrame(rows, columns=["delta", "datum", "homogeneous", "duhamel", "c0"])
    worst = table.groupby("delta")[["homogeneous", "duhamel"]].max()
    report = {
        "table": table,
        "max_homogeneous": float(table["homogeneous"].max()) if len(table) else 0.0,
        "max_duhamel": float(table["duhamel"].max()) if len(table) else 0.0,
        "c0": float(table["c0"].max()) if len(table) else 0.0,
        "slope_homogeneous": loglog_slope(worst.index.to_numpy(), worst["homogeneous"].to_numpy()),
        "slope_duhamel": loglog_slope(worst.index.to_numpy(), worst["duhamel"].to_numpy()),
        "expected_slope": (1.0 - 2.0 * norm.b) / 2.0,
    }
    logger.info(f"Linear estimates (s={norm.s}, b={norm.b}): slope {report['slope_homogeneous']:.3f}, "
                f"expected {report['expected_slope']:.3f}")
    return report


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    keep = (np.asarray(x) > 0) & (np.asarray(y) > 0)
    if np.count_nonzero(keep) < 2:
        return float("nan")
    return float(linregress(np.log(np.asarray(x)[keep]), np.log(np.asarray(y)[keep])).slope)


# --------------------------------------------------------------------------- adversarial generators

def _window_cells(L: float, dtau: float) -> int:
    half = int(np.ceil(2.0 * max(L, 1.0) / dtau)) + 2
    return max(16, 1 << int(np.ceil(np.log2(2 * half))))


def block_concentrated_field(N: float, L: float, sign: int, grid: Grid, time_window: float,
                             params: EquationParams, seed: int, n_tau: Optional[int] = None,
                             role: int = 0) -> SpaceTimeField:
    """
    Random amplitudes on {sign * xi in [N, 2N), |tau - p(xi)| in [L, 2L)} with unit X_{0,0} norm.

    L <= 1 stands for the whole low-modulation cell |tau - p(xi)| < 2.

    Raises:
        ValueError: Row window too short for the modulation band
        EmptySupportError: No lattice cell falls in the block
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    dtau = 2.0 * np.pi / time_window
    if n_tau is None:
        n_tau = _window_cells(L, dtau)
    if 2.0 * max(L, 1.0) > (n_tau // 2 - 1) * dtau:
        raise ValueError(f"row window of {n_tau} cells cannot hold modulations up to {2 * max(L, 1.0):g}")

    offsets = characteristic_offsets(grid, params, dtau, n_tau)
    xi = grid.frequencies
    rows = (sign * xi >= N) & (sign * xi < 2.0 * N)
    tau_index = offsets[:, None] + np.arange(n_tau)[None, :]
    lam = np.abs(_modulation(xi, tau_index, dtau, params))
    cells = (lam < 2.0) if L <= 1 else (lam >= L) & (lam < 2.0 * L)
    support = rows[:, None] & cells
    count = int(np.count_nonzero(support))
    if count == 0:
        raise EmptySupportError(f"block N={N:g}, L={L:g}, sign={sign:+d} has no lattice cells")

    rng = keyed_rng(seed, "block_field", f"{N:g}", f"{L:g}", sign, role)
    amps = np.zeros((grid.n, n_tau), dtype=complex)
    amps[support] = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    field = SpaceTimeField(amps, offsets, grid, time_window, params)
    return field.scaled(1.0 / xsb_norm(field, NormSpec(0.0, 0.0)))


_REGIME_SIGNS = {
    PairRegime.PLUS_PLUS: (1, 1, 1),
    PairRegime.PLUS_MINUS: (1, -1, 1),
}


def _regime_signs(regime: PairRegime, count: int, N: float, seed: int) -> Tuple[int, ...]:
    if regime is PairRegime.RANDOM:
        rng = keyed_rng(seed, "scan_signs", f"{N:g}")
        return tuple(int(v) for v in rng.choice([-1, 1], size=count))
    return _REGIME_SIGNS[regime][:count]


@dataclass
class ScanResult:
    """Ratio table, fitted slope per s and the interpolated slope sign change"""
    table: pd.DataFrame
    slopes: Dict[float, float]
    sign_change: Optional[float]

    def to_dict(self) -> Dict:
        return {
            "slopes": {f"{s:g}": v for s, v in self.slopes.items()},
            "sign_change_s": self.sign_change,
            "bounded": {f"{s:g}": bool(abs(v) <= BOUNDED_SLOPE) for s, v in self.slopes.items()},
        }


def _ratios_over_s(estimate: EstimateKind, fields: List[SpaceTimeField], s_list: Sequence[float],
                   b: float, eps: float) -> List[float]:
    """The product is formed once; each s only reweights it"""
    product = spacetime_product(*fields)
    if estimate is EstimateKind.ASYM:
        top = product.norm(0.0, 0.0)
        out = []
        for s in s_list:
            bottom = xsb_norm(fields[0], NormSpec(-0.5, 0.5 - eps)) * xsb_norm(fields[1], NormSpec(s, 0.5 + eps))
            out.append(top / bottom)
        return out
    derivative = product.differentiated()
    out = []
    for s in s_list:
        norm = NormSpec(s, b)
        bottom = np.prod([xsb_norm(f, norm) for f in fields])
        out.append(derivative.norm(s, b - 1.0) / bottom)
    return out


def slope_sign_change(s_values: Sequence[float], slopes: Sequence[float]) -> Optional[float]:
    """Linear interpolation of the largest s where the slope crosses zero from above"""
    order = np.argsort(s_values)[::-1]
    s_sorted = np.asarray(s_values, dtype=float)[order]
    k_sorted = np.asarray(slopes, dtype=float)[order]
    for i in range(len(s_sorted) - 1):
        a, c = k_sorted[i], k_sorted[i + 1]
        if np.isfinite(a) and np.isfinite(c) and a <= 0 < c:
            return float(s_sorted[i] + (0.0 - a) * (s_sorted[i + 1] - s_sorted[i]) / (c - a))
    return None


def ratio_scaling_scan(estimate: EstimateKind, regime: PairRegime, s_list: Sequence[float],
                       N_list: Sequence[float], seeds: Sequence[int], params: EquationParams, grid: Grid,
                       time_window: float = 2.0 * np.pi, b: float = 0.6, eps: float = 0.05,
                       modulation: float = 1.0, amplitude: float = 1.0) -> ScanResult:
    """
    Max ratio over seeds for every (s, N), log-log slope in N per s, and the s where the slope changes sign.

    Args:
        estimate: bilinear, trilinear or asym
        regime: Frequency sign pattern of the inputs (random, ++ or +-)
        s_list: Sobolev indices
        N_list: Dyadic input frequencies
        seeds: Ensemble seeds
        params: Equation coefficients
        grid: Spatial grid; must resolve frequency 2 max(N_list)
        time_window: T_w of the tau lattice
        b: Modulation index for bilinear and trilinear
        eps: Offset from 1/2 for the asymmetric estimate
        modulation: Dyadic modulation L of every input block
        amplitude: Common input amplitude

    Returns:
        ScanResult; the table has columns estimate, s, b, N, regime, seed, ratio (b holds eps for asym)
    """
    estimate = EstimateKind(estimate)
    regime = PairRegime(regime)
    if not s_list or not N_list or not seeds:
        raise ValueError("s_list, N_list and seeds must be nonempty")
    if 2.0 * max(N_list) > grid.dxi * (grid.n // 2 - 1):
        raise ValueError(f"grid resolves |xi| < {grid.dxi * (grid.n // 2):g}, scan needs {2 * max(N_list):g}")
    count = 3 if estimate is EstimateKind.TRILINEAR else 2
    dtau = 2.0 * np.pi / time_window
    n_tau = _window_cells(modulation, dtau)
    index_b = eps if estimate is EstimateKind.ASYM else b

    samples: List[EstimateSample] = []
    for N in N_list:
        for seed in seeds:
            signs = _regime_signs(regime, count, N, seed)
            fields = [block_concentrated_field(N, modulation, sign, grid, time_window, params, seed, n_tau, role)
                      .scaled(amplitude) for role, sign in enumerate(signs)]
            for s, ratio in zip(s_list, _ratios_over_s(estimate, fields, s_list, b, eps)):
                samples.append(EstimateSample(estimate, regime, float(N), int(seed), float(ratio), float(s), index_b))
        logger.debug(f"{estimate.value}/{regime.value}: N={N:g} done")

    table = pd.DataFrame([sample.to_row() for sample in samples], columns=SCAN_COLUMNS)
    return summarize_ratio_table(table)


def summarize_ratio_table(table: pd.DataFrame) -> ScanResult:
    """Slopes and sign change of a ratio table, possibly concatenated from per-N scans"""
    estimate = table["estimate"].iloc[0]
    regime = table["regime"].iloc[0]
    worst = table.groupby(["s", "N"])["ratio"].max().reset_index()
    slopes = {float(s): loglog_slope(group["N"].to_numpy(), group["ratio"].to_numpy())
              for s, group in worst.groupby("s")}
    change = slope_sign_change(list(slopes), list(slopes.values()))
    logger.info(f"{estimate} scan ({regime}): slopes "
                + ", ".join(f"s={s:g}: {v:.3f}" for s, v in slopes.items()))
    return ScanResult(table, slopes, change)
