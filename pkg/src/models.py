"""
Data models for fields, equations, estimates and experiments
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np


class EquationKind(str, Enum):
    """Which fifth-order equation is being studied"""
    KAWAHARA = "kawahara"
    MODIFIED_KAWAHARA = "modified_kawahara"

    @property
    def degree(self) -> int:
        """Polynomial degree of the nonlinearity (u^2 or u^3 under the derivative)"""
        return 2 if self is EquationKind.KAWAHARA else 3


class Regime(str, Enum):
    """Dyadic block classes of the fundamental block estimate"""
    PLUS_PLUS_COHERENCE = "PlusPlusCoherence"
    PLUS_MINUS_COHERENCE = "PlusMinusCoherence"
    OTHER = "Other"
    VANISHING = "Vanishing"


class EstimateKind(str, Enum):
    """Space-time estimates probed by ratio scans"""
    BILINEAR = "bilinear"
    TRILINEAR = "trilinear"
    ASYM = "asym"


class PairRegime(str, Enum):
    """How ratio-scan inputs are placed in frequency"""
    RANDOM = "random"              # independent random blocks of either sign
    PLUS_PLUS = "plus_plus"        # all inputs on the same side, comparable frequencies
    PLUS_MINUS = "plus_minus"      # opposite signs, output lands at low frequency


class ScenarioKind(str, Enum):
    """Experiment scenarios exposed on the command line"""
    SOLVE = "solve"
    RESONANCE_SCAN = "resonance-scan"
    BLOCK_NORM = "block-norm"
    BILINEAR_SCAN = "bilinear-scan"
    TRILINEAR_SCAN = "trilinear-scan"
    LINEAR_SCAN = "linear-scan"
    CONTRACTION = "contraction"
    WELLPOSED_PROBE = "wellposed-probe"


# --------------------------------------------------------------------------- spectral core

@dataclass(frozen=True)
class Grid:
    """Periodic grid on [0, L) with n points"""
    n: int
    box_length: float

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def dxi(self) -> float:
        """Frequency spacing 2*pi/L"""
        return 2.0 * np.pi / self.box_length

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @property
    def wavenumbers(self) -> np.ndarray:
        """Integer k in FFT order, k in {-n/2, ..., n/2-1}"""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(np.int64)

    @property
    def frequencies(self) -> np.ndarray:
        """xi_k = 2*pi*k/L in FFT order"""
        return self.wavenumbers * self.dxi

    @property
    def nyquist_index(self) -> int:
        return self.n // 2


@dataclass(eq=False)
class RealField:
    """Real samples of u on a grid"""
    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ValueError(f"RealField expects {self.grid.n} values, got shape {self.values.shape}")


@dataclass(eq=False)
class SpectralField:
    """Averaged Fourier coefficients u_hat(xi_k), FFT order"""
    coeffs: np.ndarray
    grid: Grid
    t: float = 0.0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (self.grid.n,):
            raise ValueError(f"SpectralField expects {self.grid.n} coefficients, got shape {self.coeffs.shape}")

    def with_coeffs(self, coeffs: np.ndarray, t: Optional[float] = None) -> "SpectralField":
        return SpectralField(coeffs, self.grid, self.t if t is None else t)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self.with_coeffs(self.coeffs - other.coeffs)

    def scaled(self, factor: complex) -> "SpectralField":
        return self.with_coeffs(self.coeffs * factor)

    def is_conjugate_symmetric(self, rtol: float = 1e-12) -> bool:
        c = self.coeffs
        mirrored = np.conj(c[(-self.grid.wavenumbers) % self.grid.n])
        mirrored[self.grid.nyquist_index] = np.conj(c[self.grid.nyquist_index])
        scale = max(np.max(np.abs(c)), np.finfo(float).tiny)
        return bool(np.max(np.abs(c - mirrored)) <= rtol * scale)


@dataclass(frozen=True)
class NormSpec:
    """Sobolev index s and modulation index b"""
    s: float
    b: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.s) and np.isfinite(self.b)):
            raise ValueError(f"NormSpec indices must be finite, got s={self.s}, b={self.b}")


# --------------------------------------------------------------------------- dispersion

@dataclass(frozen=True)
class EquationParams:
    """Coefficients of u_t + N(u) + alpha u_xxx + beta u_xxxxx = 0"""
    alpha: float
    beta: float
    kind: EquationKind = EquationKind.KAWAHARA

    def __post_init__(self):
        if self.beta == 0:
            raise ValueError("beta must be nonzero")
        object.__setattr__(self, "kind", EquationKind(self.kind))

    def to_dict(self) -> Dict[str, Any]:
        return {"alpha": self.alpha, "beta": self.beta, "kind": self.kind.value}


@dataclass(frozen=True)
class FrequencyTriple:
    """(xi1, xi2, xi3) on the zero-sum hyperplane"""
    xi1: float
    xi2: float
    xi3: float

    def __post_init__(self):
        if abs(self.xi1 + self.xi2 + self.xi3) > 1e-12 * max(1.0, abs(self.xi1), abs(self.xi2)):
            raise ValueError(f"frequencies must sum to zero, got {self.xi1 + self.xi2 + self.xi3:.3e}")

    @classmethod
    def from_pair(cls, xi1: float, xi2: float) -> "FrequencyTriple":
        return cls(xi1, xi2, -xi1 - xi2)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.xi1, self.xi2, self.xi3)

    @property
    def magnitudes(self) -> Tuple[float, float, float]:
        """(max, med, min) of |xi_j|"""
        a = sorted((abs(self.xi1), abs(self.xi2), abs(self.xi3)), reverse=True)
        return a[0], a[1], a[2]


@dataclass(frozen=True)
class ModulationTriple:
    """lambda_j = tau_j - p(xi_j)"""
    lambda1: float
    lambda2: float
    lambda3: float

    @property
    def magnitudes(self) -> Tuple[float, float, float]:
        a = sorted((abs(self.lambda1), abs(self.lambda2), abs(self.lambda3)), reverse=True)
        return a[0], a[1], a[2]


@dataclass
class ResonanceReport:
    """Sampled lower envelope of |h| / (N_max^4 N_min) over dyadic blocks"""
    params: EquationParams
    n_cap: float
    min_ratio: float
    argmin_triple: Tuple[float, float, float]
    samples: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "n_cap": self.n_cap,
            "min_ratio": self.min_ratio,
            "argmin_triple": list(self.argmin_triple),
            "samples": self.samples,
        }


# --------------------------------------------------------------------------- propagator

@dataclass(eq=False)
class Trajectory:
    """States of one solution sampled at increasing times"""
    times: np.ndarray
    states: List[SpectralField]
    params: EquationParams

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if self.states and any(s.grid != self.states[0].grid for s in self.states):
            raise ValueError("all trajectory states must share one grid")

    @property
    def grid(self) -> Grid:
        return self.states[0].grid

    @property
    def coeffs(self) -> np.ndarray:
        """Stacked coefficients, shape (n_times, n)"""
        return np.stack([s.coeffs for s in self.states])

    @classmethod
    def from_array(cls, times: np.ndarray, coeffs: np.ndarray, grid: Grid,
                   params: EquationParams) -> "Trajectory":
        states = [SpectralField(c, grid, float(t)) for t, c in zip(times, coeffs)]
        return cls(np.asarray(times, dtype=float), states, params)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        return Trajectory.from_array(self.times, self.coeffs - other.coeffs, self.grid, self.params)


@dataclass
class InvariantLog:
    """Conserved quantities along a trajectory"""
    times: np.ndarray
    mass: np.ndarray
    l2: np.ndarray
    hamiltonian: np.ndarray

    def to_dict(self) -> Dict[str, List[float]]:
        return {
            "times": [float(v) for v in self.times],
            "mass": [float(v) for v in self.mass],
            "l2": [float(v) for v in self.l2],
            "hamiltonian": [float(v) for v in self.hamiltonian],
        }


# --------------------------------------------------------------------------- duhamel

@dataclass(frozen=True)
class CutoffSpec:
    """Time localization psi(t/delta) on a uniform lattice over [-delta, delta)"""
    delta: float
    n_time: int = 256

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.n_time % 2:
            raise ValueError(f"n_time must be even so that t=0 is a lattice point, got {self.n_time}")

    @property
    def dt(self) -> float:
        return 2.0 * self.delta / self.n_time


@dataclass
class FixedPointReport:
    """Picard iteration record"""
    residuals: List[float]
    contraction_factor: float
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.residuals)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "residuals": [float(r) for r in self.residuals],
            "contraction_factor": float(self.contraction_factor),
            "converged": self.converged,
            "iterations": self.iterations,
        }


# --------------------------------------------------------------------------- xsb

@dataclass(eq=False)
class SpaceTimeField:
    """
    Space-time Fourier amplitudes on a characteristic-aligned lattice.

    Row k holds frequency xi_k (FFT order of the grid). Column j holds
    tau = (offsets[k] + j) * dtau, so every row is a window of the global
    tau lattice of spacing 2*pi/time_window placed around tau = p(xi_k).
    """
    amps: np.ndarray
    offsets: np.ndarray
    grid: Grid
    time_window: float
    params: EquationParams
    window_profile: str = "bump"

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=complex)
        self.offsets = np.asarray(self.offsets, dtype=np.int64)
        if self.amps.ndim != 2 or self.amps.shape[0] != self.grid.n:
            raise ValueError(f"amps must have shape ({self.grid.n}, n_tau), got {self.amps.shape}")
        if self.offsets.shape != (self.grid.n,):
            raise ValueError("offsets must hold one integer per frequency row")

    @property
    def n_tau(self) -> int:
        return self.amps.shape[1]

    @property
    def dtau(self) -> float:
        return 2.0 * np.pi / self.time_window

    @property
    def tau_index(self) -> np.ndarray:
        """Global integer tau index of each cell, shape (n, n_tau)"""
        return self.offsets[:, None] + np.arange(self.n_tau)[None, :]

    @property
    def taus(self) -> np.ndarray:
        return self.tau_index * self.dtau

    def same_lattice(self, other: "SpaceTimeField") -> bool:
        return (self.grid == other.grid and self.n_tau == other.n_tau
                and np.isclose(self.time_window, other.time_window, rtol=1e-12)
                and np.array_equal(self.offsets, other.offsets))

    def scaled(self, factor: complex) -> "SpaceTimeField":
        return SpaceTimeField(self.amps * factor, self.offsets, self.grid, self.time_window,
                              self.params, self.window_profile)


@dataclass
class EstimateSample:
    """One ratio measurement"""
    estimate: EstimateKind
    regime: PairRegime
    N: float
    seed: int
    ratio: float
    s: float
    b: float

    def to_row(self) -> Dict[str, Any]:
        return {"estimate": self.estimate.value, "s": self.s, "b": self.b, "N": self.N,
                "regime": self.regime.value, "seed": self.seed, "ratio": self.ratio}


# --------------------------------------------------------------------------- blocks

@dataclass(frozen=True)
class DyadicBlockSpec:
    """(N1, N2, N3; H; L1, L2, L3) dyadic block of the trilinear multiplier"""
    N1: float
    N2: float
    N3: float
    H: float
    L1: float = 1.0
    L2: float = 1.0
    L3: float = 1.0

    def __post_init__(self):
        if min(self.N1, self.N2, self.N3, self.H) <= 0:
            raise ValueError("N_j and H must be positive")
        if min(self.L1, self.L2, self.L3) < 1:
            raise ValueError("L_j must be >= 1")

    @property
    def n(self) -> Tuple[float, float, float]:
        return (self.N1, self.N2, self.N3)

    @property
    def l(self) -> Tuple[float, float, float]:
        return (self.L1, self.L2, self.L3)

    @property
    def n_sorted(self) -> Tuple[float, float, float]:
        """(N_max, N_med, N_min)"""
        a = sorted(self.n, reverse=True)
        return a[0], a[1], a[2]

    @property
    def l_sorted(self) -> Tuple[float, float, float]:
        """(L_max, L_med, L_min)"""
        a = sorted(self.l, reverse=True)
        return a[0], a[1], a[2]

    def permuted(self, order: Sequence[int]) -> "DyadicBlockSpec":
        n, l = self.n, self.l
        return DyadicBlockSpec(n[order[0]], n[order[1]], n[order[2]], self.H,
                               l[order[0]], l[order[1]], l[order[2]])

    def to_dict(self) -> Dict[str, float]:
        return {"N1": self.N1, "N2": self.N2, "N3": self.N3, "H": self.H,
                "L1": self.L1, "L2": self.L2, "L3": self.L3}


@dataclass(eq=False)
class DiscreteMultiplier:
    """
    Sparse multiplier on a discretized hyperplane.

    Point i of the support couples cell cells[0][i] of f1, cells[1][i] of f2
    and cells[2][i] of f3 with weight values[i]; measure is the factor that
    turns the unit-vector trilinear sum into the continuous form.
    """
    cells: Tuple[np.ndarray, np.ndarray, np.ndarray]
    values: np.ndarray
    shape: Tuple[int, int, int]
    measure: float = 1.0
    lattice: Dict[str, Any] = field(default_factory=dict)

    @property
    def support_size(self) -> int:
        return int(self.values.size)

    @property
    def is_empty(self) -> bool:
        return self.values.size == 0

    def scaled(self, factor: float) -> "DiscreteMultiplier":
        return DiscreteMultiplier(self.cells, self.values * factor, self.shape, self.measure, dict(self.lattice))


@dataclass
class NormEstimate:
    """Best trilinear value found by alternating maximization"""
    lower_bound: float
    trace: List[List[float]]
    restarts: int


# --------------------------------------------------------------------------- harness

@dataclass
class ExperimentConfig:
    """One reproducible experiment definition"""
    scenario: ScenarioKind
    params: EquationParams
    grid: Dict[str, Any]
    norms: List[NormSpec]
    sweep: Dict[str, List[Any]]
    seed: int
    output_dir: str = "output"
    threads: int = 1
    options: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario.value,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "threads": self.threads,
            "equation": self.params.to_dict(),
            "grid": dict(self.grid),
            "norms": [{"s": n.s, "b": n.b} for n in self.norms],
            "sweep": {k: list(v) for k, v in self.sweep.items()},
            "options": dict(self.options),
        }


@dataclass
class RunManifest:
    """What a scenario run produced"""
    config: Dict[str, Any]
    artifacts: Dict[str, str]
    timings: Dict[str, float]
    software_version: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": self.config,
            "artifacts": dict(sorted(self.artifacts.items())),
            "timings": self.timings,
            "software_version": self.software_version,
        }
